//! Exact majority-vote error probabilities for a known distribution:
//! exhaustive enumeration for tiny instances and an O(k n^3)-state dynamic
//! program that stays practical up to n ≈ 200.
//!
//! Both oracles count ties against the mode as errors.

use thiserror::Error;

use crate::dist::CategoricalDistribution;
use crate::special::{ln_factorial_table, log_add_exp};

/// Enumeration refuses instances with more compositions than this.
const ENUM_STATE_LIMIT: u64 = 1_000_000;
/// The O(n^3) table stops being a desk-scale tool past this; 200 is already
/// generous for the regime where exact answers beat the bounds.
const DP_N_LIMIT: u64 = 250;

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("instance too large for enumeration: {states} compositions exceed {limit}")]
    TooLarge { states: u64, limit: u64 },
    #[error("n = {n} exceeds the dynamic-program limit {limit} (memory grows as n^3)")]
    DpTooLarge { n: u64, limit: u64 },
    #[error("n must be at least 1")]
    ZeroSamples,
}

/// Error probability by summing the multinomial pmf over every count vector
/// where the mode fails to hold a strict plurality.
pub fn exact_error_enumeration(
    p: &CategoricalDistribution,
    n: u64,
) -> Result<f64, ExactError> {
    if n == 0 {
        return Err(ExactError::ZeroSamples);
    }
    let k = p.k();
    let states = compositions(n, k as u64);
    if states > ENUM_STATE_LIMIT {
        return Err(ExactError::TooLarge {
            states,
            limit: ENUM_STATE_LIMIT,
        });
    }

    let c_star = p.argmax();
    let ln_fact = ln_factorial_table(n as usize);
    let ln_p: Vec<f64> = p.probs().iter().map(|&x| x.ln()).collect();

    let mut counts = vec![0u64; k];
    let mut total = 0.0f64;
    enumerate_rec(
        0,
        n,
        &mut counts,
        &mut |counts: &[u64]| {
            let max_rival = counts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != c_star)
                .map(|(_, &c)| c)
                .max()
                .unwrap_or(0);
            if counts[c_star] > max_rival {
                return;
            }
            let mut ln_pmf = ln_fact[n as usize];
            for (j, &c) in counts.iter().enumerate() {
                if c > 0 {
                    if ln_p[j] == f64::NEG_INFINITY {
                        return; // zero-probability label, zero mass
                    }
                    ln_pmf += c as f64 * ln_p[j] - ln_fact[c as usize];
                } else {
                    ln_pmf -= ln_fact[0];
                }
            }
            total += ln_pmf.exp();
        },
    );
    Ok(total.min(1.0))
}

fn compositions(n: u64, k: u64) -> u64 {
    // C(n + k - 1, k - 1), saturating
    let mut acc: u64 = 1;
    for i in 0..(k - 1) {
        acc = acc.saturating_mul(n + k - 1 - i) / (i + 1);
    }
    acc
}

fn enumerate_rec(idx: usize, remaining: u64, counts: &mut Vec<u64>, visit: &mut impl FnMut(&[u64])) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        visit(counts);
        return;
    }
    for x in 0..=remaining {
        counts[idx] = x;
        enumerate_rec(idx + 1, remaining - x, counts, visit);
    }
}

/// Dynamic-program table over states (t, m, s): votes for the mode, maximum
/// rival count so far, and total votes allocated. Entries hold
/// log(DP(t,m,s)) where DP carries the pmf mass divided by n!.
pub struct DpTable {
    n: usize,
    /// Log entries of the final stage, indexed [t][m][s] flattened.
    entries: Vec<f64>,
}

impl DpTable {
    /// Runs the DP for `p` with `n` votes; the mode category is folded in
    /// first, rivals in ascending label order, vote counts in ascending
    /// order, so the accumulation order is fixed.
    pub fn build(p: &CategoricalDistribution, n: u64) -> Result<Self, ExactError> {
        if n == 0 {
            return Err(ExactError::ZeroSamples);
        }
        if n > DP_N_LIMIT {
            return Err(ExactError::DpTooLarge { n, limit: DP_N_LIMIT });
        }
        let n = n as usize;
        let c_star = p.argmax();
        let ln_fact = ln_factorial_table(n);
        let side = n + 1;
        let idx = |t: usize, m: usize, s: usize| (t * side + m) * side + s;

        // ln P_j(x) = x ln p_j - ln x!
        let ln_weight = |pj: f64, x: usize| -> f64 {
            if x == 0 {
                0.0
            } else if pj == 0.0 {
                f64::NEG_INFINITY
            } else {
                x as f64 * pj.ln() - ln_fact[x]
            }
        };

        let mut cur = vec![f64::NEG_INFINITY; side * side * side];
        for t in 0..=n {
            cur[idx(t, 0, t)] = ln_weight(p.prob(c_star), t);
        }

        let mut next = vec![f64::NEG_INFINITY; side * side * side];
        for (j, &pj) in p.probs().iter().enumerate() {
            if j == c_star {
                continue;
            }
            next.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            for t in 0..=n {
                for m in 0..=(n - t) {
                    for s in (t + m)..=n {
                        let v = cur[idx(t, m, s)];
                        if v == f64::NEG_INFINITY {
                            continue;
                        }
                        for x in 0..=(n - s) {
                            let w = ln_weight(pj, x);
                            if w == f64::NEG_INFINITY {
                                continue;
                            }
                            let slot = &mut next[idx(t, m.max(x), s + x)];
                            *slot = log_add_exp(*slot, v + w);
                        }
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }

        Ok(DpTable { n, entries: cur })
    }

    fn idx(&self, t: usize, m: usize, s: usize) -> usize {
        (t * (self.n + 1) + m) * (self.n + 1) + s
    }

    /// Pr[mode loses or ties]: sum of n! · exp(entry) over final states with
    /// t <= m and s = n.
    pub fn error_probability(&self) -> f64 {
        let ln_fact_n: f64 = ln_factorial_table(self.n)[self.n];
        let mut acc = f64::NEG_INFINITY;
        for t in 0..=self.n {
            for m in t..=self.n {
                acc = log_add_exp(acc, self.entries[self.idx(t, m, self.n)]);
            }
        }
        (ln_fact_n + acc).exp().min(1.0)
    }

    /// Total probability over all final states; 1 within 1e-9 by construction.
    pub fn total_probability(&self) -> f64 {
        let ln_fact_n: f64 = ln_factorial_table(self.n)[self.n];
        let mut acc = f64::NEG_INFINITY;
        for t in 0..=self.n {
            for m in 0..=self.n {
                acc = log_add_exp(acc, self.entries[self.idx(t, m, self.n)]);
            }
        }
        (ln_fact_n + acc).exp()
    }
}

/// Error probability via the dynamic program; equals
/// [`exact_error_enumeration`] wherever both run.
pub fn exact_error_dp(p: &CategoricalDistribution, n: u64) -> Result<f64, ExactError> {
    Ok(DpTable::build(p, n)?.error_probability())
}
