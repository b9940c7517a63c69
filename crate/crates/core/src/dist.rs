//! Categorical distributions and their margin statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inputs whose probability mass drifts from 1 by more than this are rejected.
const SUM_REJECT_TOL: f64 = 1e-9;
/// Post-construction the mass sums to 1 within this tolerance.
const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("distribution needs at least 2 labels, got {0}")]
    TooFewLabels(usize),
    #[error("probability at index {index} is {value}, must be finite and >= 0")]
    NegativeEntry { index: usize, value: f64 },
    #[error("probabilities sum to {0}, further than 1e-9 from 1")]
    BadSum(f64),
}

/// A probability vector over k >= 2 labels, identified by index 0..k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDistribution {
    probs: Vec<f64>,
}

impl CategoricalDistribution {
    /// Validates and (when the drift is below 1e-9) renormalizes the vector.
    pub fn new(probs: Vec<f64>) -> Result<Self, DistError> {
        if probs.len() < 2 {
            return Err(DistError::TooFewLabels(probs.len()));
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(DistError::NegativeEntry { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_REJECT_TOL {
            return Err(DistError::BadSum(sum));
        }
        let mut probs = probs;
        if (sum - 1.0).abs() > SUM_TOL {
            for p in &mut probs {
                *p /= sum;
            }
        }
        Ok(Self { probs })
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, j: usize) -> f64 {
        self.probs[j]
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for j in 1..self.probs.len() {
            if self.probs[j] > self.probs[best] {
                best = j;
            }
        }
        best
    }

    /// Winner/runner-up margin statistics of this distribution.
    pub fn mode_profile(&self) -> ModeProfile {
        let c_star = self.argmax();
        let p_c = self.probs[c_star];
        let mut j_star = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        let mut sigma_sq = vec![f64::NAN; self.probs.len()];
        for (j, &p_j) in self.probs.iter().enumerate() {
            if j == c_star {
                continue;
            }
            let d_j = p_c - p_j;
            sigma_sq[j] = p_c + p_j - d_j * d_j;
            if p_j > best {
                best = p_j;
                j_star = j;
            }
        }
        let delta = p_c - best;
        // 2p_c - delta - delta^2 telescopes to sigma_{j*}^2; it is zero only
        // for a Dirac distribution, reported as the infinity sentinel.
        let denom = sigma_sq[j_star];
        let snr = if denom > 0.0 {
            delta * delta / denom
        } else {
            f64::INFINITY
        };
        ModeProfile {
            c_star,
            j_star,
            delta,
            sigma_sq,
            snr,
        }
    }
}

/// Margin statistics of a distribution: winner, runner-up, gap, per-rival
/// margin variances and the winner/runner-up signal-to-noise ratio
/// delta^2 / (2 p_c − delta − delta^2).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile {
    /// Mode label (lowest index on ties).
    pub c_star: usize,
    /// Runner-up label (lowest index on ties among the rest).
    pub j_star: usize,
    /// Gap p_{c*} − p_{j*}.
    pub delta: f64,
    /// Per-rival variances sigma_j^2 = p_{c*} + p_j − (p_{c*} − p_j)^2;
    /// the entry at c_star itself is NaN.
    pub sigma_sq: Vec<f64>,
    /// delta^2 / sigma_{j*}^2, infinite for a Dirac distribution.
    pub snr: f64,
}
