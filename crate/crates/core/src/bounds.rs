//! Closed-form upper bounds on the majority-vote error probability and their
//! inversions: Hoeffding (with sample-size inversion), Bernstein (tight and
//! loose), Chernoff–Markov, CLT with continuity/Berry–Esseen refinement, the
//! large-deviation exponent with its Bahadur–Rao prefactor, plus the
//! weighted-majority and MAP extensions for heterogeneous experts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::CategoricalDistribution;
use crate::special::erfc;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("no unique mode: the top two probabilities are equal")]
    NoUniqueMode,
    #[error("sample-size inversion needs delta in (0, 1], got {0}")]
    BadDelta(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("expert panel fields must share one length >= 1")]
    BadPanel,
    #[error("weighted bound denominator is zero")]
    ZeroDenominator,
    #[error("competence must lie in (0, 1), got {0}")]
    BadCompetence(f64),
}

fn require_unique_mode(p: &CategoricalDistribution) -> Result<(usize, f64), BoundError> {
    let mp = p.mode_profile();
    if mp.delta <= 0.0 {
        return Err(BoundError::NoUniqueMode);
    }
    Ok((mp.c_star, p.prob(mp.c_star)))
}

/// min(1, Σ_{j≠c*} exp(−(n/2)(p_{c*}−p_j)²)).
pub fn hoeffding_bound(p: &CategoricalDistribution, n: u64) -> Result<f64, BoundError> {
    let (c_star, p_c) = require_unique_mode(p)?;
    let mut sum = 0.0;
    for (j, &p_j) in p.probs().iter().enumerate() {
        if j == c_star {
            continue;
        }
        let d = p_c - p_j;
        sum += (-(n as f64) / 2.0 * d * d).exp();
    }
    Ok(sum.min(1.0))
}

/// Smallest n with (k−1)·exp(−nδ²/2) ≤ ε, i.e. n ≥ −(2/δ²)·ln(ε/(k−1)),
/// floored at one sample.
pub fn hoeffding_sample_size(delta: f64, k: usize, epsilon: f64) -> Result<u64, BoundError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(BoundError::BadDelta(delta));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(BoundError::BadEpsilon(epsilon));
    }
    let raw = -2.0 / (delta * delta) * (epsilon / (k as f64 - 1.0)).ln();
    Ok((raw.ceil().max(1.0)) as u64)
}

/// Per-rival Bernstein exponent: δ² / (2σ² + (2/3)δ + (2/3)δ²) with
/// σ² = p_{c*} + p_j − δ².
pub fn bernstein_bound(p: &CategoricalDistribution, n: u64) -> Result<f64, BoundError> {
    bernstein_impl(p, n, false)
}

/// Looser Bernstein variant using σ² ≤ 1 − δ², which depends on the gaps only.
pub fn bernstein_loose_bound(p: &CategoricalDistribution, n: u64) -> Result<f64, BoundError> {
    bernstein_impl(p, n, true)
}

fn bernstein_impl(p: &CategoricalDistribution, n: u64, loose: bool) -> Result<f64, BoundError> {
    let (c_star, p_c) = require_unique_mode(p)?;
    let mut sum = 0.0;
    for (j, &p_j) in p.probs().iter().enumerate() {
        if j == c_star {
            continue;
        }
        let d = p_c - p_j;
        let sigma_sq = if loose {
            1.0 - d * d
        } else {
            p_c + p_j - d * d
        };
        let denom = 2.0 * sigma_sq + 2.0 / 3.0 * d + 2.0 / 3.0 * d * d;
        sum += (-(n as f64) * d * d / denom).exp();
    }
    Ok(sum.min(1.0))
}

/// Decay rate of the Chernoff–Markov bound against a single rival:
/// −ln(1 − (√p_c − √p_j)²). Identical to the per-rival Sanov rate.
pub fn chernoff_markov_rate(p_c: f64, p_j: f64) -> f64 {
    -(-(p_c.sqrt() - p_j.sqrt()).powi(2)).ln_1p()
}

/// min(1, Σ_{j≠c*} (1 − (√p_{c*} − √p_j)²)ⁿ).
pub fn chernoff_markov_bound(p: &CategoricalDistribution, n: u64) -> Result<f64, BoundError> {
    let (c_star, p_c) = require_unique_mode(p)?;
    let mut sum = 0.0;
    for (j, &p_j) in p.probs().iter().enumerate() {
        if j == c_star {
            continue;
        }
        sum += (-(n as f64) * chernoff_markov_rate(p_c, p_j)).exp();
    }
    Ok(sum.min(1.0))
}

/// The combined finite-sample certificate: per rival, the best of the
/// Hoeffding, Bernstein, and Chernoff–Markov terms, summed and clamped.
pub fn finite_sample_certificate(p: &CategoricalDistribution, n: u64) -> Result<f64, BoundError> {
    let (c_star, p_c) = require_unique_mode(p)?;
    let nf = n as f64;
    let mut sum = 0.0;
    for (j, &p_j) in p.probs().iter().enumerate() {
        if j == c_star {
            continue;
        }
        let d = p_c - p_j;
        let sigma_sq = p_c + p_j - d * d;
        let hoeffding = (-nf / 2.0 * d * d).exp();
        let bernstein =
            (-nf * d * d / (2.0 * sigma_sq + 2.0 / 3.0 * d + 2.0 / 3.0 * d * d)).exp();
        let chernoff = (-nf * chernoff_markov_rate(p_c, p_j)).exp();
        sum += hoeffding.min(bernstein).min(chernoff);
    }
    Ok(sum.min(1.0))
}

/// Gaussian-regime bound min(1, (k−1)/2 · exp(−(n/2)·min_j (δ_j/σ_j)²)).
pub fn clt_bound(p: &CategoricalDistribution, n: u64) -> Result<f64, BoundError> {
    require_unique_mode(p)?;
    let mp = p.mode_profile();
    let k = p.k() as f64;
    // The minimum over rivals is attained at the runner-up, which is what
    // mode_profile's snr reports; computed explicitly anyway.
    let mut min_snr = f64::INFINITY;
    for (j, &sig_sq) in mp.sigma_sq.iter().enumerate() {
        if j == mp.c_star {
            continue;
        }
        let d = p.prob(mp.c_star) - p.prob(j);
        let snr = if sig_sq > 0.0 {
            d * d / sig_sq
        } else {
            f64::INFINITY
        };
        min_snr = min_snr.min(snr);
    }
    let value = (k - 1.0) / 2.0 * (-(n as f64) / 2.0 * min_snr).exp();
    Ok(value.min(1.0))
}

/// CLT refinement with continuity correction and the Berry–Esseen term:
/// Σ_j [½·erfc((√n·δ_j − 1/(2√n))/(√2 σ_j)) + 0.56·ρ_j/(σ_j³√n)], clamped,
/// with ρ_j = δ_j(1 − 3(p_{c*}+p_j) + 2δ_j²) the third central moment of the
/// margin variable.
pub fn clt_refined_bound(p: &CategoricalDistribution, n: u64) -> Result<ValueWithFlag, BoundError> {
    let (c_star, p_c) = require_unique_mode(p)?;
    let nf = n as f64;
    let mut erfc_part = 0.0;
    let mut correction = 0.0;
    for (j, &p_j) in p.probs().iter().enumerate() {
        if j == c_star {
            continue;
        }
        let d = p_c - p_j;
        let sigma_sq = p_c + p_j - d * d;
        if sigma_sq <= 0.0 {
            continue; // Dirac rival contributes nothing
        }
        let sigma = sigma_sq.sqrt();
        let rho = d * (1.0 - 3.0 * (p_c + p_j) + 2.0 * d * d);
        let arg = (nf.sqrt() * d - 1.0 / (2.0 * nf.sqrt())) / (std::f64::consts::SQRT_2 * sigma);
        erfc_part += 0.5 * erfc(arg);
        correction += 0.56 * rho / (sigma_sq * sigma * nf.sqrt());
    }
    let raw = erfc_part + correction;
    Ok(ValueWithFlag {
        value: raw.clamp(0.0, 1.0),
        // When the Berry-Esseen term outweighs the Gaussian part the clamped
        // number carries no information.
        uninformative: correction.abs() >= erfc_part,
    })
}

/// A clamped probability bound plus a flag marking it uninformative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueWithFlag {
    pub value: f64,
    pub uninformative: bool,
}

/// Large-deviation exponent I*(p) = −log(1 − (√p_{c*} − √p_{j*})²) together
/// with its small-gap expansion δ²/(2σ_{j*}²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SanovExponent {
    /// Rate in nats per sample.
    pub rate: f64,
    /// δ²/(2σ_{j*}²), which the rate approaches as δ → 0.
    pub small_gap_approx: f64,
}

pub fn sanov_exponent(p: &CategoricalDistribution) -> SanovExponent {
    let mp = p.mode_profile();
    let p_c = p.prob(mp.c_star);
    let p_j = p.prob(mp.j_star);
    let rate = chernoff_markov_rate(p_c, p_j);
    let sigma_sq = mp.sigma_sq[mp.j_star];
    let small_gap_approx = if sigma_sq > 0.0 {
        mp.delta * mp.delta / (2.0 * sigma_sq)
    } else {
        f64::INFINITY
    };
    SanovExponent {
        rate,
        small_gap_approx,
    }
}

/// Bahadur–Rao sharpening of the large-deviation estimate:
/// exp(−n·I*)/(√(2πn)·(1 − √(p_{j*}/p_{c*}))·σ̃_{j*}), clamped to [0, 1],
/// with σ̃² = 2√(p_{c*}p_{j*})/(1 − (√p_{c*} − √p_{j*})²).
pub fn bahadur_rao_approx(p: &CategoricalDistribution, n: u64) -> Result<f64, BoundError> {
    let mp = p.mode_profile();
    if mp.delta <= 0.0 {
        return Err(BoundError::NoUniqueMode);
    }
    let p_c = p.prob(mp.c_star);
    let p_j = p.prob(mp.j_star);
    if p_j == 0.0 {
        // Dirac-against-nothing: the error is exactly zero.
        return Ok(0.0);
    }
    let rate = chernoff_markov_rate(p_c, p_j);
    let sigma_tilde_sq = 2.0 * (p_c * p_j).sqrt() / (1.0 - (p_c.sqrt() - p_j.sqrt()).powi(2));
    let nf = n as f64;
    let prefactor = 1.0
        / ((2.0 * std::f64::consts::PI * nf).sqrt()
            * (1.0 - (p_j / p_c).sqrt())
            * sigma_tilde_sq.sqrt());
    Ok((prefactor * (-nf * rate).exp()).clamp(0.0, 1.0))
}

/// Every bound evaluated at one (p, n) pair, for comparison tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub hoeffding: f64,
    pub bernstein: f64,
    pub bernstein_loose: f64,
    pub chernoff_markov: f64,
    pub clt: f64,
    pub clt_refined: f64,
    pub clt_refined_uninformative: bool,
    pub bahadur_rao: f64,
    /// Large-deviation rate in nats per sample (not a probability).
    pub sanov_exponent: f64,
}

impl BoundReport {
    pub fn compute(p: &CategoricalDistribution, n: u64) -> Result<Self, BoundError> {
        let refined = clt_refined_bound(p, n)?;
        Ok(BoundReport {
            hoeffding: hoeffding_bound(p, n)?,
            bernstein: bernstein_bound(p, n)?,
            bernstein_loose: bernstein_loose_bound(p, n)?,
            chernoff_markov: chernoff_markov_bound(p, n)?,
            clt: clt_bound(p, n)?,
            clt_refined: refined.value,
            clt_refined_uninformative: refined.uninformative,
            bahadur_rao: bahadur_rao_approx(p, n)?,
            sanov_exponent: sanov_exponent(p).rate,
        })
    }
}

/// Heterogeneous experts voting with weights: expert ℓ casts n_ℓ samples from
/// its own distribution and carries weight ω_ℓ > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertPanel {
    pub weights: Vec<f64>,
    pub per_expert_dists: Vec<CategoricalDistribution>,
    pub samples_per_expert: Vec<u64>,
}

impl ExpertPanel {
    fn validate(&self) -> Result<(), BoundError> {
        let l = self.weights.len();
        if l == 0
            || self.per_expert_dists.len() != l
            || self.samples_per_expert.len() != l
            || self.weights.iter().any(|&w| !(w > 0.0))
            || self.samples_per_expert.contains(&0)
        {
            return Err(BoundError::BadPanel);
        }
        Ok(())
    }
}

/// Hoeffding bound for the weighted majority vote toward a declared target
/// label: min(1, Σ_{j≠target} exp(−½·(Σ_ℓ n_ℓ ω_ℓ (p^ℓ_target − p^ℓ_j))² / Σ_ℓ n_ℓ ω_ℓ²)).
///
/// Experts with a nonpositive margin toward the target are permitted; they
/// only shrink the exponent.
pub fn weighted_hoeffding_bound(panel: &ExpertPanel, target: usize) -> Result<f64, BoundError> {
    panel.validate()?;
    let k = panel.per_expert_dists[0].k();
    let denom: f64 = panel
        .weights
        .iter()
        .zip(&panel.samples_per_expert)
        .map(|(&w, &n)| n as f64 * w * w)
        .sum();
    if denom <= 0.0 {
        return Err(BoundError::ZeroDenominator);
    }
    let mut sum = 0.0;
    for j in 0..k {
        if j == target {
            continue;
        }
        let margin: f64 = panel
            .weights
            .iter()
            .zip(&panel.per_expert_dists)
            .zip(&panel.samples_per_expert)
            .map(|((&w, d), &n)| n as f64 * w * (d.prob(target) - d.prob(j)))
            .sum();
        sum += (-0.5 * margin * margin / denom).exp();
    }
    Ok(sum.min(1.0))
}

/// MAP aggregation when only per-expert competences q_ℓ are known and errors
/// are assumed uniform over the k−1 wrong labels: the winning label maximizes
/// Σ_ℓ Σ_i [vote = j ? ln q_ℓ : ln((1−q_ℓ)/(k−1))]; ties break low.
pub fn map_decision(
    competences: &[f64],
    votes: &[Vec<usize>],
    k: usize,
) -> Result<usize, BoundError> {
    if competences.len() != votes.len() || competences.is_empty() || k < 2 {
        return Err(BoundError::BadPanel);
    }
    for &q in competences {
        if !(q > 0.0 && q < 1.0) {
            return Err(BoundError::BadCompetence(q));
        }
    }
    let mut scores = vec![0.0f64; k];
    for (q, expert_votes) in competences.iter().zip(votes) {
        let ln_hit = q.ln();
        let ln_miss = ((1.0 - q) / (k as f64 - 1.0)).ln();
        for &v in expert_votes {
            debug_assert!(v < k);
            for (j, score) in scores.iter_mut().enumerate() {
                *score += if j == v { ln_hit } else { ln_miss };
            }
        }
    }
    let mut best = 0;
    for j in 1..k {
        if scores[j] > scores[best] {
            best = j;
        }
    }
    Ok(best)
}
