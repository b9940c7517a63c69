//! Seeded Monte Carlo harness: empirical error curves against the bound
//! family and stopping-time sweeps for the certificate. Per-trial seeds are
//! derived from the master seed with splitmix64, so trials are
//! order-independent and runs are reproducible across thread counts.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::BoundReport;
use crate::dist::CategoricalDistribution;
use crate::exact::exact_error_dp;
use crate::mmc::{run_certificate, CertificateConfig, Decision, PriorSpec};

/// Largest n for which comparison tables include the exact DP column.
pub const DEFAULT_DP_LIMIT: u64 = 200;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("delta {0} outside [0, 1)")]
    BadDelta(f64),
    #[error("sweep needs k >= 2, got {0}")]
    BadK(usize),
    #[error(transparent)]
    Mmc(#[from] crate::mmc::MmcError),
    #[error(transparent)]
    Dist(#[from] crate::dist::DistError),
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// splitmix64 output function; stated so seed derivations are reproducible.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-trial seed: splitmix64 applied to the master seed advanced by the
/// trial index times the splitmix increment.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(trial_index.wrapping_mul(0x9E3779B97F4A7C15)))
}

/// Uniform draw in [0, 1) from the top 53 bits of the generator.
fn next_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF categorical sampler over a precomputed cumulative array.
pub struct CategoricalSampler {
    cdf: Vec<f64>,
}

impl CategoricalSampler {
    pub fn new(p: &CategoricalDistribution) -> Self {
        let mut cdf = Vec::with_capacity(p.k());
        let mut acc = 0.0;
        for &x in p.probs() {
            acc += x;
            cdf.push(acc);
        }
        // Guard the final bucket against rounding in the partial sums.
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        CategoricalSampler { cdf }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let u = next_f64(rng);
        self.cdf.partition_point(|&c| c <= u)
    }
}

/// A Monte Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Fraction of seeded trials in which the sampled majority fails to be the
/// mode (ties count as failures).
pub fn mc_error_prob(
    p: &CategoricalDistribution,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<McEstimate, SimError> {
    if trials == 0 {
        return Err(SimError::NoTrials);
    }
    let sampler = CategoricalSampler::new(p);
    let c_star = p.argmax();
    let k = p.k();
    let errors: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, t));
            let mut counts = vec![0u64; k];
            for _ in 0..n {
                counts[sampler.draw(&mut rng)] += 1;
            }
            let max_rival = counts
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != c_star)
                .map(|(_, &c)| c)
                .max()
                .unwrap_or(0);
            u64::from(counts[c_star] <= max_rival)
        })
        .sum();
    let estimate = errors as f64 / trials as f64;
    let stderr = (estimate * (1.0 - estimate) / trials as f64).sqrt();
    Ok(McEstimate { estimate, stderr })
}

/// One row of the bound-comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundComparisonRow {
    pub n: u64,
    pub mc: f64,
    pub mc_stderr: f64,
    /// Empty when n exceeds the DP limit.
    pub exact_dp: Option<f64>,
    pub hoeffding: f64,
    pub bernstein: f64,
    pub chernoff: f64,
    pub clt: f64,
    pub clt_refined: f64,
    pub bahadur_rao: f64,
}

/// Monte Carlo error vs every bound, one row per n. Distributions without a
/// unique mode get the vacuous report (every clamped bound is 1, zero rate):
/// the certificates carry no information when the top two masses tie.
pub fn bound_comparison(
    p: &CategoricalDistribution,
    n_grid: &[u64],
    trials: u64,
    seed: u64,
    dp_limit: u64,
) -> Result<Vec<BoundComparisonRow>, SimError> {
    let vacuous = BoundReport {
        hoeffding: 1.0,
        bernstein: 1.0,
        bernstein_loose: 1.0,
        chernoff_markov: 1.0,
        clt: 1.0,
        clt_refined: 1.0,
        clt_refined_uninformative: true,
        bahadur_rao: 1.0,
        sanov_exponent: 0.0,
    };
    let mut rows = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let mc = mc_error_prob(p, n, trials, splitmix64(seed ^ i as u64))?;
        let report = BoundReport::compute(p, n).unwrap_or_else(|_| vacuous.clone());
        let exact = if n <= dp_limit {
            // The DP carries its own resource guard; past it the column
            // stays empty just as beyond dp_limit.
            exact_error_dp(p, n).ok()
        } else {
            None
        };
        rows.push(BoundComparisonRow {
            n,
            mc: mc.estimate,
            mc_stderr: mc.stderr,
            exact_dp: exact,
            hoeffding: report.hoeffding,
            bernstein: report.bernstein,
            chernoff: report.chernoff_markov,
            clt: report.clt,
            clt_refined: report.clt_refined,
            bahadur_rao: report.bahadur_rao,
        });
    }
    Ok(rows)
}

/// Shape of the synthetic distributions used by certificate sweeps. The only
/// family implemented spreads all non-leader mass uniformly, which makes the
/// runner-up gap the single free parameter:
/// p_lead = (δ(k−1) + 1)/k, every other label (1 − p_lead)/(k−1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailProfile {
    Uniform,
}

/// Full description of a certificate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k: usize,
    pub delta_grid: Vec<f64>,
    pub tail: TailProfile,
    pub epsilon: f64,
    pub budget: u64,
    #[serde(default = "default_m")]
    pub m: usize,
    pub prior: PriorSpec,
    pub trials: u64,
    pub master_seed: u64,
}

fn default_m() -> usize {
    2
}

/// The leader-vs-uniform-rest distribution for a given gap.
pub fn sweep_distribution(
    k: usize,
    delta: f64,
    tail: TailProfile,
) -> Result<CategoricalDistribution, SimError> {
    if k < 2 {
        return Err(SimError::BadK(k));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(SimError::BadDelta(delta));
    }
    let TailProfile::Uniform = tail;
    let p_lead = (delta * (k as f64 - 1.0) + 1.0) / k as f64;
    let rest = (1.0 - p_lead) / (k as f64 - 1.0);
    let mut probs = vec![rest; k];
    probs[0] = p_lead;
    Ok(CategoricalDistribution::new(probs)?)
}

/// Per-δ aggregate of a certificate sweep. Quartiles are over rounds used by
/// all trials (abstaining trials sit at the budget); the error rate is over
/// stopped trials only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub median_rounds: f64,
    pub q1_rounds: f64,
    pub q3_rounds: f64,
    pub abstain_rate: f64,
    /// Among stopped trials, fraction whose winner differs from the true
    /// mode; NaN serializes as an empty cell when nothing stopped.
    pub winner_error_rate: f64,
    pub stopped_trials: u64,
}

/// Runs `trials` certificates per δ and aggregates stopping statistics.
pub fn mmc_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, SimError> {
    if cfg.trials == 0 {
        return Err(SimError::NoTrials);
    }
    let mut rows = Vec::with_capacity(cfg.delta_grid.len());
    for (di, &delta) in cfg.delta_grid.iter().enumerate() {
        let p = sweep_distribution(cfg.k, delta, cfg.tail)?;
        let sampler = CategoricalSampler::new(&p);
        let config = CertificateConfig::new(cfg.epsilon, cfg.budget, cfg.m, cfg.prior.clone())?;
        // Distinct seed stream per grid point.
        let point_seed = splitmix64(cfg.master_seed ^ (di as u64).wrapping_mul(0x100000001B3));

        let results: Vec<(u64, bool, bool)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(point_seed, t));
                let votes = std::iter::repeat_with(|| sampler.draw(&mut rng) as u64)
                    .take(cfg.budget as usize);
                let outcome =
                    run_certificate(votes, config.clone()).expect("vote stream fits budget");
                let stopped = outcome.decision == Decision::Stopped;
                let wrong = stopped && outcome.winner != Some(0);
                (outcome.rounds_used, stopped, wrong)
            })
            .collect();

        let mut rounds: Vec<u64> = results.iter().map(|r| r.0).collect();
        rounds.sort_unstable();
        let stopped = results.iter().filter(|r| r.1).count() as u64;
        let wrong = results.iter().filter(|r| r.2).count() as u64;
        rows.push(SweepRow {
            delta,
            median_rounds: quantile_sorted(&rounds, 0.5),
            q1_rounds: quantile_sorted(&rounds, 0.25),
            q3_rounds: quantile_sorted(&rounds, 0.75),
            abstain_rate: 1.0 - stopped as f64 / cfg.trials as f64,
            winner_error_rate: if stopped > 0 {
                wrong as f64 / stopped as f64
            } else {
                f64::NAN
            },
            stopped_trials: stopped,
        });
    }
    Ok(rows)
}

/// Linear-interpolation quantile of a sorted sample (the common "type 7"
/// definition).
fn quantile_sorted(sorted: &[u64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let w = h - lo as f64;
    sorted[lo] as f64 * (1.0 - w) + sorted[hi] as f64 * w
}

/// Fixed-header CSV for bound comparisons; float formatting is the shortest
/// round-trip representation, so identical inputs give identical bytes.
pub fn write_bounds_csv<W: std::io::Write>(
    rows: &[BoundComparisonRow],
    out: W,
) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "mc",
        "mc_stderr",
        "exact_dp",
        "hoeffding",
        "bernstein",
        "chernoff",
        "clt",
        "clt_refined",
        "bahadur_rao",
    ])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.mc.to_string(),
            r.mc_stderr.to_string(),
            r.exact_dp.map_or(String::new(), |v| v.to_string()),
            r.hoeffding.to_string(),
            r.bernstein.to_string(),
            r.chernoff.to_string(),
            r.clt.to_string(),
            r.clt_refined.to_string(),
            r.bahadur_rao.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-header CSV for certificate sweeps.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "delta",
        "median_rounds",
        "q1_rounds",
        "q3_rounds",
        "abstain_rate",
        "winner_error_rate",
        "stopped_trials",
    ])?;
    for r in rows {
        w.write_record([
            r.delta.to_string(),
            r.median_rounds.to_string(),
            r.q1_rounds.to_string(),
            r.q3_rounds.to_string(),
            r.abstain_rate.to_string(),
            if r.winner_error_rate.is_nan() {
                String::new()
            } else {
                r.winner_error_rate.to_string()
            },
            r.stopped_trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
