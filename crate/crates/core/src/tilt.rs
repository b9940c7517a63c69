//! Distribution sharpening and its reward-side estimators: exponential
//! tilting toward a chosen label, power tempering of the marginal, empirical
//! SNR and entropy group rewards, leave-one-out advantages, and a numeric
//! solver for the KL-regularized sharpening objectives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::CategoricalDistribution;
use crate::tally::{Label, Tally};

/// Default cap returned for the SNR estimator on unanimous samples.
pub const DEFAULT_SNR_CAP: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum TiltError {
    #[error("beta must be positive, got {0}")]
    BadBeta(f64),
    #[error("kappa must be at least 1 for tempering, got {0}")]
    BadKappa(f64),
    #[error("label index {0} out of range")]
    BadLabel(usize),
    #[error("reward samples need at least 2 answers, got {0}")]
    SampleTooSmall(usize),
    #[error("declared label universe {declared} smaller than {observed} observed labels")]
    UniverseTooSmall { declared: usize, observed: usize },
    #[error("optimizer failed to converge within {iterations} iterations; residual {residual:.3e}")]
    NoConvergence { iterations: u64, residual: f64 },
    #[error("solver requires strictly positive probabilities")]
    ZeroProbability,
}

/// A KL-regularization strength β and the sharpening exponent κ it induces:
/// κ = 1/β for the consensus-reward tilt, κ = β/(β−1) for the entropy-reward
/// temper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltParams {
    pub beta: f64,
    pub kappa: f64,
}

impl TiltParams {
    pub fn for_tilt(beta: f64) -> Result<Self, TiltError> {
        if !(beta > 0.0) {
            return Err(TiltError::BadBeta(beta));
        }
        Ok(TiltParams {
            beta,
            kappa: 1.0 / beta,
        })
    }

    pub fn for_temper(beta: f64) -> Result<Self, TiltError> {
        if !(beta > 1.0) {
            return Err(TiltError::BadBeta(beta));
        }
        Ok(TiltParams {
            beta,
            kappa: beta / (beta - 1.0),
        })
    }
}

fn renorm(mut q: Vec<f64>) -> CategoricalDistribution {
    let sum: f64 = q.iter().sum();
    for v in &mut q {
        *v /= sum;
    }
    CategoricalDistribution::new(q).expect("normalized vector is a distribution")
}

/// Exponential tilt of strength kappa toward `c_hat`:
/// q_j ∝ p_j · e^{κ·1{j=c_hat}}, Z = 1 + p_{c_hat}(e^κ − 1).
fn tilt_by_kappa(p: &CategoricalDistribution, c_hat: usize, kappa: f64) -> CategoricalDistribution {
    let boost = kappa.exp();
    let q = p
        .probs()
        .iter()
        .enumerate()
        .map(|(j, &pj)| if j == c_hat { pj * boost } else { pj })
        .collect();
    renorm(q)
}

/// The KL-regularized consensus-reward optimum: an exponential tilt of `p`
/// toward `c_hat` with κ = 1/β, normalizer Z_β = 1 + p_{c_hat}(e^{1/β} − 1).
pub fn ttrl_tilt(
    p: &CategoricalDistribution,
    c_hat: usize,
    beta: f64,
) -> Result<CategoricalDistribution, TiltError> {
    if !(beta > 0.0) {
        return Err(TiltError::BadBeta(beta));
    }
    if c_hat >= p.k() {
        return Err(TiltError::BadLabel(c_hat));
    }
    Ok(tilt_by_kappa(p, c_hat, 1.0 / beta))
}

/// Power tempering q_j ∝ p_j^κ; zeros stay zero.
pub fn temper(p: &CategoricalDistribution, kappa: f64) -> Result<CategoricalDistribution, TiltError> {
    if !(kappa >= 1.0) {
        return Err(TiltError::BadKappa(kappa));
    }
    Ok(renorm(p.probs().iter().map(|&pj| pj.powf(kappa)).collect()))
}

/// SNR of the tilted distribution at each κ of the grid (κ = 1/β; κ = 0 is
/// the untilted distribution). The runner-up is re-derived at every grid
/// point, so the curve is continuous but may kink where the runner-up swaps.
pub fn snr_curve_tilt(
    p: &CategoricalDistribution,
    c_hat: usize,
    kappa_grid: &[f64],
) -> Result<Vec<f64>, TiltError> {
    if c_hat >= p.k() {
        return Err(TiltError::BadLabel(c_hat));
    }
    Ok(kappa_grid
        .iter()
        .map(|&kappa| tilt_by_kappa(p, c_hat, kappa).mode_profile().snr)
        .collect())
}

/// A batch of self-generated answers used for group rewards. Leave-one-out
/// needs at least two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSample<L> {
    answers: Vec<L>,
}

impl<L: Label> RewardSample<L> {
    pub fn new(answers: Vec<L>) -> Result<Self, TiltError> {
        if answers.len() < 2 {
            return Err(TiltError::SampleTooSmall(answers.len()));
        }
        Ok(RewardSample { answers })
    }

    pub fn answers(&self) -> &[L] {
        &self.answers
    }

    pub fn n(&self) -> usize {
        self.answers.len()
    }
}

/// Value of the empirical SNR reward plus a flag marking the unanimous case
/// where the denominator vanishes and the configured cap is returned instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrReward {
    pub value: f64,
    pub capped: bool,
}

fn snr_reward_from_tally<L: Label>(tally: &Tally<L>, cap: f64) -> SnrReward {
    let top = tally.leader_and_runners(2);
    let n_c = top[0].observed().map_or(0, |l| tally.count(l)) as f64;
    let n_j = top[1].observed().map_or(0, |l| tally.count(l)) as f64;
    let n = tally.n() as f64;
    let diff = n_c - n_j;
    let denom = n * (n_c + n_j) - diff * diff;
    if denom <= 0.0 {
        SnrReward {
            value: cap,
            capped: true,
        }
    } else {
        SnrReward {
            value: diff * diff / denom,
            capped: false,
        }
    }
}

/// Empirical SNR (N_ĉ − N_{j*})² / (n(N_ĉ + N_{j*}) − (N_ĉ − N_{j*})²) with
/// the default cap on unanimous samples. Consistent for the population SNR.
pub fn snr_reward<L: Label>(sample: &RewardSample<L>) -> SnrReward {
    snr_reward_with_cap(sample, DEFAULT_SNR_CAP)
}

pub fn snr_reward_with_cap<L: Label>(sample: &RewardSample<L>, cap: f64) -> SnrReward {
    snr_reward_from_tally(&Tally::from_votes(sample.answers.iter().cloned()), cap)
}

fn entropy_from_tally<L: Label>(tally: &Tally<L>) -> f64 {
    let n = tally.n() as f64;
    tally
        .counts()
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let f = c as f64 / n;
            f * f.ln()
        })
        .sum()
}

/// Plug-in negative entropy Σ_{N_j>0} (N_j/n)·ln(N_j/n), in nats.
pub fn entropy_reward<L: Label>(sample: &RewardSample<L>) -> f64 {
    entropy_from_tally(&Tally::from_votes(sample.answers.iter().cloned()))
}

/// Dirichlet-smoothed variant Σ_j ((N_j+α)/(n+α))·ln((N_j+α)/(n+α)) over a
/// declared universe of `k` labels (unseen labels contribute the α term).
///
/// The n+α normalizer is a smoothing heuristic taken as printed, not the
/// Dirichlet posterior mean (which would divide by n+kα).
pub fn entropy_reward_dirichlet<L: Label>(
    sample: &RewardSample<L>,
    alpha: f64,
    k: usize,
) -> Result<f64, TiltError> {
    let tally = Tally::from_votes(sample.answers.iter().cloned());
    if k < tally.distinct() {
        return Err(TiltError::UniverseTooSmall {
            declared: k,
            observed: tally.distinct(),
        });
    }
    let n = sample.n() as f64;
    let term = |count: f64| {
        let f = (count + alpha) / (n + alpha);
        f * f.ln()
    };
    let observed: f64 = tally.counts().values().map(|&c| term(c as f64)).sum();
    let unseen = (k - tally.distinct()) as f64 * term(0.0);
    Ok(observed + unseen)
}

/// Which group reward drives the advantages or the regularized solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Snr,
    Entropy,
}

/// Leave-one-out advantages A_i = r(X) − r(X_{−i}); the leader and runner-up
/// are re-derived on each reduced sample.
pub fn loo_advantages<L: Label>(sample: &RewardSample<L>, kind: RewardKind) -> Vec<f64> {
    loo_advantages_with_cap(sample, kind, DEFAULT_SNR_CAP)
}

pub fn loo_advantages_with_cap<L: Label>(
    sample: &RewardSample<L>,
    kind: RewardKind,
    cap: f64,
) -> Vec<f64> {
    let full_tally = Tally::from_votes(sample.answers.iter().cloned());
    let full = match kind {
        RewardKind::Snr => snr_reward_from_tally(&full_tally, cap).value,
        RewardKind::Entropy => entropy_from_tally(&full_tally),
    };
    (0..sample.n())
        .map(|i| {
            let reduced = Tally::from_votes(
                sample
                    .answers
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, l)| l.clone()),
            );
            let r = match kind {
                RewardKind::Snr => snr_reward_from_tally(&reduced, cap).value,
                RewardKind::Entropy => entropy_from_tally(&reduced),
            };
            full - r
        })
        .collect()
}

/// Group-relative centering Â_i = A_i − mean(A). One refinement pass keeps
/// the output sum at zero even when cap-scale values dominate the mean.
pub fn grpo_center(advantages: &[f64]) -> Vec<f64> {
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let mut centered: Vec<f64> = advantages.iter().map(|a| a - mean).collect();
    let residual = centered.iter().sum::<f64>() / n;
    for c in &mut centered {
        *c -= residual;
    }
    centered
}

/// Result of the regularized-objective solver: the iterate at convergence,
/// the stationarity residual at that point, and the achieved objective
/// objective(q) − β·KL(q‖p).
///
/// The entropy objective is strictly concave for β > 1 and the iterate
/// matches the tempering closed form. The SNR objective is unbounded as mass
/// collapses onto the leader, so an interior stationary point need not
/// exist; when it does not, the ascent drifts toward the collapse until the
/// iterates stall and the returned residual stays large. Callers judge
/// solvability by `residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedSolution {
    pub q: CategoricalDistribution,
    pub residual: f64,
    pub objective: f64,
    pub iterations: u64,
}

const SOLVER_MAX_ITER: u64 = 100_000;
const SOLVER_TV_TOL: f64 = 1e-10;
/// Per-coordinate log-space step clamp.
const SOLVER_STEP_CLAMP: f64 = 0.5;
const LN_FLOOR: f64 = -700.0;

/// Maximizes objective(q) − β·KL(q‖p) over the simplex by deterministic
/// multiplicative mirror ascent: fixed base step 1/max(β,1), per-iteration
/// backtracking to keep the objective nondecreasing, stopping when
/// successive iterates differ by less than 1e-10 in total variation.
pub fn solve_regularized(
    p: &CategoricalDistribution,
    objective: RewardKind,
    beta: f64,
) -> Result<RegularizedSolution, TiltError> {
    match objective {
        RewardKind::Snr if !(beta > 0.0) => return Err(TiltError::BadBeta(beta)),
        RewardKind::Entropy if !(beta > 1.0) => return Err(TiltError::BadBeta(beta)),
        _ => {}
    }
    if p.probs().iter().any(|&x| x <= 0.0) {
        return Err(TiltError::ZeroProbability);
    }
    let k = p.k();
    let mp = p.mode_profile();
    let (c, y) = (mp.c_star, mp.j_star);
    let ln_p: Vec<f64> = p.probs().iter().map(|&x| x.ln()).collect();

    let value = |q: &[f64]| -> f64 {
        let kl: f64 = q
            .iter()
            .zip(p.probs())
            .map(|(&qi, &pi)| if qi > 0.0 { qi * (qi / pi).ln() } else { 0.0 })
            .sum();
        let obj = match objective {
            RewardKind::Snr => snr_value(q, c, y),
            RewardKind::Entropy => q
                .iter()
                .map(|&qi| if qi > 0.0 { qi * qi.ln() } else { 0.0 })
                .sum(),
        };
        obj - beta * kl
    };

    let gradient = |q: &[f64], g: &mut [f64]| {
        for j in 0..k {
            let reg = -beta * (1.0 + (q[j].ln() - ln_p[j]));
            g[j] = reg
                + match objective {
                    RewardKind::Entropy => 1.0 + q[j].ln(),
                    RewardKind::Snr => snr_grad_coord(q, c, y, j),
                };
        }
    };

    let mut q: Vec<f64> = p.probs().to_vec();
    let mut f_cur = value(&q);
    let mut g = vec![0.0; k];
    let base_step = 1.0 / beta.max(1.0);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < SOLVER_MAX_ITER {
        iterations += 1;
        gradient(&q, &mut g);
        // Backtrack until the objective is nondecreasing up to rounding at
        // its own scale; the final halved step is taken unconditionally so
        // stalls resolve through the TV test rather than a special exit.
        let mut eta = base_step;
        let mut cand = mirror_step(&q, &g, eta);
        let mut f_new = value(&cand);
        for _ in 0..40 {
            if f_new >= f_cur - 1e-12 * (1.0 + f_cur.abs()) {
                break;
            }
            eta *= 0.5;
            cand = mirror_step(&q, &g, eta);
            f_new = value(&cand);
        }
        let tv = 0.5
            * cand
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        q = cand;
        f_cur = f_cur.max(f_new);
        if tv < SOLVER_TV_TOL {
            converged = true;
            break;
        }
    }

    let residual = match objective {
        RewardKind::Snr => snr_stationarity_residual(p, &q, beta),
        RewardKind::Entropy => entropy_stationarity_residual(p, &q, beta),
    };
    if !converged {
        return Err(TiltError::NoConvergence {
            iterations,
            residual,
        });
    }
    let objective = value(&q);
    Ok(RegularizedSolution {
        q: renorm(q),
        residual,
        objective,
        iterations,
    })
}

fn mirror_step(q: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    // Normalization cancels any common shift of the log iterate, so center
    // the gradient before clamping; otherwise a clamp hit on every
    // coordinate would turn the step into a no-op.
    let g_mean = g.iter().sum::<f64>() / g.len() as f64;
    let mut ln_q: Vec<f64> = q
        .iter()
        .zip(g)
        .map(|(&qi, &gi)| {
            let step = (eta * (gi - g_mean)).clamp(-SOLVER_STEP_CLAMP, SOLVER_STEP_CLAMP);
            (qi.ln() + step).max(LN_FLOOR)
        })
        .collect();
    let hi = ln_q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for v in &mut ln_q {
        *v -= hi;
    }
    let mut out: Vec<f64> = ln_q.iter().map(|&v| v.exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

fn snr_value(q: &[f64], c: usize, y: usize) -> f64 {
    let d = q[c] - q[y];
    let e = q[c] + q[y] - d * d;
    if e <= 0.0 {
        f64::INFINITY
    } else {
        d * d / e
    }
}

fn snr_grad_coord(q: &[f64], c: usize, y: usize, j: usize) -> f64 {
    if j != c && j != y {
        return 0.0;
    }
    let d = q[c] - q[y];
    let e = q[c] + q[y] - d * d;
    if j == c {
        (2.0 * d * e - d * d * (1.0 - 2.0 * d)) / (e * e)
    } else {
        (-2.0 * d * e - d * d * (1.0 + 2.0 * d)) / (e * e)
    }
}

/// Residual of the stationarity system for the SNR objective at `q`: the
/// multiplier is eliminated through the non-top coordinates' proportionality
/// q_i ∝ p_i, and the reported value is the worst violation across the two
/// top-coordinate equations and that proportionality.
pub fn snr_stationarity_residual(p: &CategoricalDistribution, q: &[f64], beta: f64) -> f64 {
    let mp = p.mode_profile();
    let (c, y) = (mp.c_star, mp.j_star);
    let k = p.k();
    // Paper convention: g is the negated ratio, so g_x = -ds/dx.
    let gx = -snr_grad_coord(q, c, y, c);
    let gy = -snr_grad_coord(q, c, y, y);
    let term = |j: usize| beta * (1.0 + (q[j] / p.prob(j)).ln());
    let others: Vec<usize> = (0..k).filter(|&j| j != c && j != y).collect();
    if others.is_empty() {
        // k = 2: no coordinate pins the multiplier; the residual is the
        // inconsistency between the two equations.
        return ((gx + term(c)) - (gy + term(y))).abs();
    }
    let lambdas: Vec<f64> = others.iter().map(|&j| -term(j)).collect();
    let lambda = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    let spread = lambdas
        .iter()
        .map(|&l| (l - lambda).abs())
        .fold(0.0, f64::max);
    let r1 = (gx + term(c) + lambda).abs();
    let r2 = (gy + term(y) + lambda).abs();
    r1.max(r2).max(spread)
}

fn entropy_stationarity_residual(p: &CategoricalDistribution, q: &[f64], beta: f64) -> f64 {
    // Stationarity: (1-beta)(1+ln q_j) + beta ln p_j is constant across j.
    let vals: Vec<f64> = q
        .iter()
        .zip(p.probs())
        .map(|(&qj, &pj)| (1.0 - beta) * (1.0 + qj.ln()) + beta * pj.ln())
        .collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    vals.iter().map(|&v| (v - mean).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> CategoricalDistribution {
        CategoricalDistribution::new(v.to_vec()).unwrap()
    }

    fn sample(labels: &[&str]) -> RewardSample<String> {
        RewardSample::new(labels.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn tv(a: &CategoricalDistribution, b: &[f64]) -> f64 {
        0.5 * a
            .probs()
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
    }

    #[test]
    fn ttrl_tilt_values() {
        // q0 = 0.5e / (1 + 0.5(e-1)), evaluated independently.
        let q = ttrl_tilt(&dist(&[0.5, 0.5]), 0, 1.0).unwrap();
        assert!((q.prob(0) - 0.7310585786300049).abs() < 1e-14);
        let sum: f64 = q.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // beta -> infinity leaves p untouched.
        let q = ttrl_tilt(&dist(&[0.5, 0.3, 0.2]), 0, 1e6).unwrap();
        for (a, b) in q.probs().iter().zip([0.5, 0.3, 0.2]) {
            assert!((a - b).abs() < 1e-6);
        }
        // Dirac fixed point.
        let q = ttrl_tilt(&dist(&[1.0, 0.0]), 0, 2.0).unwrap();
        assert_eq!(q.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn temper_values() {
        let q = temper(&dist(&[0.5, 0.3, 0.2]), 2.0).unwrap();
        let want = [0.25 / 0.38, 0.09 / 0.38, 0.04 / 0.38];
        assert!(tv(&q, &want) < 1e-14);
        // kappa = 1 is the identity.
        let q = temper(&dist(&[0.5, 0.3, 0.2]), 1.0).unwrap();
        assert!(tv(&q, &[0.5, 0.3, 0.2]) < 1e-15);
        // kappa -> infinity approaches the Dirac at the mode.
        let q = temper(&dist(&[0.5, 0.3, 0.2]), 200.0).unwrap();
        assert!(q.prob(0) > 1.0 - 1e-9);
    }

    #[test]
    fn tilt_and_temper_keep_argmax() {
        let p = dist(&[0.4, 0.35, 0.25]);
        assert_eq!(ttrl_tilt(&p, 0, 0.7).unwrap().argmax(), 0);
        assert_eq!(temper(&p, 3.0).unwrap().argmax(), 0);
    }

    #[test]
    fn snr_curve_is_monotone_on_grid() {
        let p = dist(&[0.5, 0.3, 0.2]);
        let grid = [0.0, 0.5, 1.0, 2.0, 4.0];
        let curve = snr_curve_tilt(&p, 0, &grid).unwrap();
        assert!((curve[0] - p.mode_profile().snr).abs() < 1e-15);
        for w in curve.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn snr_curve_dirac_is_constant_infinity() {
        let p = dist(&[1.0, 0.0]);
        let curve = snr_curve_tilt(&p, 0, &[0.0, 1.0, 3.0]).unwrap();
        assert!(curve.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn snr_reward_values() {
        let mut answers = Vec::new();
        for (label, c) in [("a", 6), ("b", 3), ("c", 1)] {
            answers.extend(std::iter::repeat_n(label, c));
        }
        let r = snr_reward(&sample(&answers));
        assert!((r.value - 1.0 / 9.0).abs() < 1e-15);
        assert!(!r.capped);

        let r = snr_reward(&sample(&["x", "x", "x", "x", "x"]));
        assert_eq!(r.value, DEFAULT_SNR_CAP);
        assert!(r.capped);

        let r = snr_reward(&sample(&["a", "a", "b", "b"]));
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn entropy_reward_values() {
        let mut answers = Vec::new();
        for (label, c) in [("a", 6), ("b", 3), ("c", 1)] {
            answers.extend(std::iter::repeat_n(label, c));
        }
        let h = entropy_reward(&sample(&answers));
        assert!((h - (-0.8979457248567798)).abs() < 1e-14);
        // Unanimous: single term 1 ln 1 = 0.
        assert_eq!(entropy_reward(&sample(&["z", "z", "z"])), 0.0);
        // Uniform over observed labels: -ln k.
        let h = entropy_reward(&sample(&["a", "b", "c", "a", "b", "c"]));
        assert!((h - (-(3.0f64.ln()))).abs() < 1e-14);
    }

    #[test]
    fn entropy_dirichlet_uses_declared_universe() {
        let s = sample(&["a", "a", "b"]);
        // k=3 with alpha=1: counts (2,1,0), n=3, normalizer 4.
        let want = [3.0 / 4.0, 2.0 / 4.0, 1.0 / 4.0]
            .iter()
            .map(|f: &f64| f * f.ln())
            .sum::<f64>();
        let got = entropy_reward_dirichlet(&s, 1.0, 3).unwrap();
        assert!((got - want).abs() < 1e-14);
        assert!(matches!(
            entropy_reward_dirichlet(&s, 1.0, 1),
            Err(TiltError::UniverseTooSmall { .. })
        ));
    }

    #[test]
    fn loo_advantage_trace() {
        // [a,a,b] with the snr reward: full 0.125; dropping an 'a' leaves a
        // tie (0); dropping 'b' leaves a unanimous pair (cap).
        let a = loo_advantages(&sample(&["a", "a", "b"]), RewardKind::Snr);
        assert!((a[0] - 0.125).abs() < 1e-15);
        assert!((a[1] - 0.125).abs() < 1e-15);
        assert!((a[2] - (0.125 - DEFAULT_SNR_CAP)).abs() < 1e-9);
    }

    #[test]
    fn loo_identical_answers_zero_entropy_advantage() {
        let a = loo_advantages(&sample(&["q", "q", "q", "q"]), RewardKind::Entropy);
        assert!(a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grpo_center_sums_to_zero() {
        let a = loo_advantages(&sample(&["a", "a", "b"]), RewardKind::Snr);
        let centered = grpo_center(&a);
        let total: f64 = centered.iter().sum();
        assert!(total.abs() < 1e-12, "sum {total}");
    }

    #[test]
    fn solver_entropy_matches_temper() {
        let p = dist(&[0.5, 0.3, 0.2]);
        let sol = solve_regularized(&p, RewardKind::Entropy, 2.0).unwrap();
        let closed = temper(&p, 2.0).unwrap();
        assert!(tv(&sol.q, closed.probs()) < 1e-6, "tv {}", tv(&sol.q, closed.probs()));
        assert!(sol.residual < 1e-6);
        // Near-infinite regularization returns p itself.
        let sol = solve_regularized(&p, RewardKind::Entropy, 1e6).unwrap();
        assert!(tv(&sol.q, p.probs()) < 1e-6);
    }

    #[test]
    fn solver_snr_improves_objective() {
        let p = dist(&[0.5, 0.3, 0.2]);
        let sol = solve_regularized(&p, RewardKind::Snr, 1.0).unwrap();
        let snr_p = p.mode_profile().snr;
        assert!(sol.q.mode_profile().snr >= snr_p);
        let kl: f64 = sol
            .q
            .probs()
            .iter()
            .zip(p.probs())
            .map(|(&q, &pp)| if q > 0.0 { q * (q / pp).ln() } else { 0.0 })
            .sum();
        assert!(kl > 0.0);
        assert!(sol.objective >= snr_p - 1e-12);
    }

    #[test]
    fn solver_snr_finds_stationary_point_under_strong_regularization() {
        // With beta large enough the KL pull creates an interior optimum.
        let p = dist(&[0.6, 0.4]);
        let sol = solve_regularized(&p, RewardKind::Snr, 10.0).unwrap();
        assert!(
            sol.residual < 1e-6,
            "residual {} at q {:?}",
            sol.residual,
            sol.q.probs()
        );
        assert!(sol.q.prob(0) > 0.6 && sol.q.prob(0) < 0.75);
    }

    #[test]
    fn tilt_params_map_beta_to_kappa() {
        assert_eq!(TiltParams::for_tilt(2.0).unwrap().kappa, 0.5);
        assert_eq!(TiltParams::for_temper(2.0).unwrap().kappa, 2.0);
        assert!(TiltParams::for_tilt(0.0).is_err());
        assert!(TiltParams::for_temper(1.0).is_err());
    }

    #[test]
    fn solver_rejects_bad_inputs() {
        let p = dist(&[0.5, 0.5]);
        assert!(solve_regularized(&p, RewardKind::Entropy, 1.0).is_err());
        assert!(solve_regularized(&p, RewardKind::Snr, 0.0).is_err());
        let zero = dist(&[1.0, 0.0]);
        assert!(matches!(
            solve_regularized(&zero, RewardKind::Snr, 1.0),
            Err(TiltError::ZeroProbability)
        ));
    }
}
