//! Anytime-valid certification of the majority vote.
//!
//! Two families of nonnegative test processes track the stream: "run"
//! processes betting the predictable leader beats each of the top-(m−1)
//! runner-ups, and an "others" process betting the leader beats everything
//! outside the top m combined. Each process multiplies a per-round factor of
//! the form 2θ on leader hits and 2(1−θ) on its rival's hits, mixed over a
//! prior on θ ∈ (1/2, 1]; rounds that touch neither label leave it unchanged.
//! Under the null (leader not ahead) every process is a supermartingale
//! started at 1, so by Ville's inequality the rule "stop when every process
//! reaches 1/ε" certifies the leader with error at most ε at any stopping
//! time. On budget exhaustion the certificate abstains and reports a
//! Beta-approximation lower bound on the probability the current majority is
//! the mode.
//!
//! All e-values are kept in log space; budgets in the tens of thousands
//! would overflow the linear form.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::dist::CategoricalDistribution;
use crate::special::{kl_bernoulli, ln_upper_half_beta, reg_inc_beta_half};
use crate::tally::{Label, Tally, TopLabel};

const LN_2: f64 = std::f64::consts::LN_2;
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum MmcError {
    #[error("vote after budget: round {round} of budget {budget}")]
    BudgetExhausted { round: u64, budget: u64 },
    #[error("invalid certificate config: {0}")]
    InvalidConfig(String),
    #[error("snapshot version {found} not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },
    #[error("malformed snapshot: {0}")]
    SnapshotFormat(String),
}

/// Prior family for the e-process mixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Shared-parameter Beta(a,b) truncated to (1/2, 1].
    TruncatedBeta { a: f64, b: f64 },
    /// Dirichlet-smoothed plug-in point prior; the whole e-value is
    /// recomputed each round with the current clipped estimate applied to
    /// all past rounds.
    PointShared {
        alpha_a: f64,
        alpha_b: f64,
        alpha_o: f64,
        clip: f64,
    },
    /// Plug-in point prior applied through per-round ratio updates only.
    PointRatio {
        alpha_a: f64,
        alpha_b: f64,
        alpha_o: f64,
        clip: f64,
    },
}

impl PriorSpec {
    /// Truncated Beta(1/2, 1/2), the default.
    pub fn jeffreys() -> Self {
        PriorSpec::TruncatedBeta { a: 0.5, b: 0.5 }
    }

    /// Truncated Beta(1, 1).
    pub fn laplace() -> Self {
        PriorSpec::TruncatedBeta { a: 1.0, b: 1.0 }
    }

    /// Point prior with unit smoothing and the largest permitted clip.
    pub fn point_shared_default() -> Self {
        PriorSpec::PointShared {
            alpha_a: 1.0,
            alpha_b: 1.0,
            alpha_o: 1.0,
            clip: 1e-3,
        }
    }

    pub fn point_ratio_default() -> Self {
        PriorSpec::PointRatio {
            alpha_a: 1.0,
            alpha_b: 1.0,
            alpha_o: 1.0,
            clip: 1e-3,
        }
    }

    fn validate(&self) -> Result<(), MmcError> {
        let bad = |msg: String| Err(MmcError::InvalidConfig(msg));
        match *self {
            PriorSpec::TruncatedBeta { a, b } => {
                if !(a > 0.0 && b > 0.0) {
                    return bad(format!("beta shapes must be positive, got ({a}, {b})"));
                }
            }
            PriorSpec::PointShared {
                alpha_a,
                alpha_b,
                alpha_o,
                clip,
            }
            | PriorSpec::PointRatio {
                alpha_a,
                alpha_b,
                alpha_o,
                clip,
            } => {
                if !(alpha_a > 0.0 && alpha_b > 0.0 && alpha_o > 0.0) {
                    return bad("smoothing parameters must be positive".into());
                }
                if !(clip > 0.0 && clip <= 1e-3) {
                    return bad(format!("clip must lie in (0, 1e-3], got {clip}"));
                }
            }
        }
        Ok(())
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self::jeffreys()
    }
}

/// Parameters of one certificate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateConfig {
    /// Confidence level: at stopping, Pr[winner != mode] <= epsilon.
    pub epsilon: f64,
    /// Maximum number of votes before abstaining.
    pub budget: u64,
    /// Width of the tracked top set (leader + m−1 runner-ups).
    pub m: usize,
    pub prior: PriorSpec,
}

impl CertificateConfig {
    pub fn new(epsilon: f64, budget: u64, m: usize, prior: PriorSpec) -> Result<Self, MmcError> {
        let cfg = CertificateConfig {
            epsilon,
            budget,
            m,
            prior,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), MmcError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(MmcError::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.budget < 1 {
            return Err(MmcError::InvalidConfig("budget must be at least 1".into()));
        }
        if self.m < 2 {
            return Err(MmcError::InvalidConfig("top-m width must be at least 2".into()));
        }
        self.prior.validate()
    }
}

/// Leader / per-runner / others hit counters.
///
/// `s + Σf_i + o` equals the number of rounds elapsed; `s + f_i` and `s + o`
/// are the informative sample sizes of the i-th run process and the others
/// process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecursiveCounts {
    pub s: u64,
    pub f: Vec<u64>,
    pub o: u64,
}

impl RecursiveCounts {
    fn new(m: usize) -> Self {
        RecursiveCounts {
            s: 0,
            f: vec![0; m - 1],
            o: 0,
        }
    }

    pub fn rounds(&self) -> u64 {
        self.s + self.f.iter().sum::<u64>() + self.o
    }

    /// Informative sample size of the i-th run process.
    pub fn m_i(&self, i: usize) -> u64 {
        self.s + self.f[i]
    }

    /// Informative sample size of the others process.
    pub fn t(&self) -> u64 {
        self.s + self.o
    }
}

/// Per-prior scratch carried across rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum PriorState {
    /// Cached ln 𝖡_{>1/2}(a+s, b+f_i) per run process and ln 𝖡_{>1/2}(a+s, b+o);
    /// per-round ratios are differences of consecutive values.
    TruncatedBeta { ln_u_run: Vec<f64>, ln_u_oth: f64 },
    Point,
}

/// How a vote relates to the predictable top-m of the pre-vote tally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VoteClass {
    Leader,
    Runner(usize),
    Other,
}

/// Full state of one certificate run; a value type, serializable for
/// checkpoint/resume via [`CertificateState::to_snapshot_json`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "L: Serialize + Ord",
    deserialize = "L: DeserializeOwned + Ord"
))]
pub struct CertificateState<L: Label> {
    config: CertificateConfig,
    tally: Tally<L>,
    counts: RecursiveCounts,
    log_e_run: Vec<f64>,
    log_e_oth: f64,
    round: u64,
    prior_state: PriorState,
}

/// Versioned wrapper for the snapshot document.
#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "L: Serialize + Ord",
    deserialize = "L: DeserializeOwned + Ord"
))]
struct Snapshot<L: Label> {
    version: u32,
    state: CertificateState<L>,
}

impl<L: Label> CertificateState<L> {
    pub fn new(config: CertificateConfig) -> Result<Self, MmcError> {
        config.validate()?;
        let m = config.m;
        let prior_state = match config.prior {
            PriorSpec::TruncatedBeta { a, b } => {
                let ln_u0 = ln_upper_half_beta(a, b);
                PriorState::TruncatedBeta {
                    ln_u_run: vec![ln_u0; m - 1],
                    ln_u_oth: ln_u0,
                }
            }
            _ => PriorState::Point,
        };
        Ok(CertificateState {
            tally: Tally::new(),
            counts: RecursiveCounts::new(m),
            log_e_run: vec![0.0; m - 1],
            log_e_oth: 0.0,
            round: 0,
            prior_state,
            config,
        })
    }

    pub fn config(&self) -> &CertificateConfig {
        &self.config
    }

    pub fn tally(&self) -> &Tally<L> {
        &self.tally
    }

    pub fn counts(&self) -> &RecursiveCounts {
        &self.counts
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Log e-values of the leader-vs-runner-up processes.
    pub fn log_e_run(&self) -> &[f64] {
        &self.log_e_run
    }

    /// Log e-value of the leader-vs-others process.
    pub fn log_e_oth(&self) -> f64 {
        self.log_e_oth
    }

    /// The predictable top-m the next vote will be classified against.
    pub fn predictable_top(&self) -> Vec<TopLabel<L>> {
        self.tally.leader_and_runners(self.config.m)
    }

    fn classify(top: &[TopLabel<L>], vote: &L) -> VoteClass {
        if top[0].matches(vote) {
            return VoteClass::Leader;
        }
        for (i, slot) in top[1..].iter().enumerate() {
            if slot.matches(vote) {
                return VoteClass::Runner(i);
            }
        }
        VoteClass::Other
    }

    /// Consumes one vote: classifies it against the pre-vote top-m, applies
    /// the per-round e-value factors for the configured prior, then updates
    /// counts, tally and round index.
    pub fn step(mut self, vote: L) -> Result<Self, MmcError> {
        if self.round >= self.config.budget {
            return Err(MmcError::BudgetExhausted {
                round: self.round,
                budget: self.config.budget,
            });
        }
        let top = self.tally.leader_and_runners(self.config.m);
        let class = Self::classify(&top, &vote);

        match self.config.prior.clone() {
            PriorSpec::TruncatedBeta { a, b } => self.step_truncated_beta(a, b, class),
            PriorSpec::PointShared {
                alpha_a,
                alpha_b,
                alpha_o,
                clip,
            } => self.step_point(alpha_a, alpha_b, alpha_o, clip, class, true),
            PriorSpec::PointRatio {
                alpha_a,
                alpha_b,
                alpha_o,
                clip,
            } => self.step_point(alpha_a, alpha_b, alpha_o, clip, class, false),
        }

        match class {
            VoteClass::Leader => self.counts.s += 1,
            VoteClass::Runner(i) => self.counts.f[i] += 1,
            VoteClass::Other => self.counts.o += 1,
        }
        self.tally.record(vote);
        self.round += 1;
        Ok(self)
    }

    fn step_truncated_beta(&mut self, a: f64, b: f64, class: VoteClass) {
        let PriorState::TruncatedBeta {
            ref mut ln_u_run,
            ref mut ln_u_oth,
        } = self.prior_state
        else {
            unreachable!("prior state matches prior spec by construction");
        };
        let s = self.counts.s as f64;
        match class {
            VoteClass::Leader => {
                // Success ratio 2·𝖡(a'+1,b')/𝖡(a',b') = 2(a' + w)/(a'+b') with
                // w = 2^{−(a'+b')}/𝖡(a',b'); integration by parts gives
                // (a'+b')𝖡(a'+1,b') = a'𝖡(a',b') + 2^{−(a'+b')}, so the update
                // needs no fresh quadrature and involves only additions.
                for (i, ln_u) in ln_u_run.iter_mut().enumerate() {
                    let a1 = a + s;
                    let b1 = b + self.counts.f[i] as f64;
                    let w = (-(a1 + b1) * LN_2 - *ln_u).exp();
                    let d = (a1 + w).ln() - (a1 + b1).ln();
                    self.log_e_run[i] += LN_2 + d;
                    *ln_u += d;
                }
                let a1 = a + s;
                let b1 = b + self.counts.o as f64;
                let w = (-(a1 + b1) * LN_2 - *ln_u_oth).exp();
                let d = (a1 + w).ln() - (a1 + b1).ln();
                self.log_e_oth += LN_2 + d;
                *ln_u_oth += d;
            }
            VoteClass::Runner(i) => {
                // Failure ratios re-evaluate the mass directly; the identity
                // route would difference two nearly equal quantities.
                let next = ln_upper_half_beta(a + s, b + self.counts.f[i] as f64 + 1.0);
                self.log_e_run[i] += LN_2 + next - ln_u_run[i];
                ln_u_run[i] = next;
            }
            VoteClass::Other => {
                let next = ln_upper_half_beta(a + s, b + self.counts.o as f64 + 1.0);
                self.log_e_oth += LN_2 + next - *ln_u_oth;
                *ln_u_oth = next;
            }
        }
    }

    fn step_point(
        &mut self,
        alpha_a: f64,
        alpha_b: f64,
        alpha_o: f64,
        clip: f64,
        class: VoteClass,
        shared: bool,
    ) {
        let m = self.config.m;
        // Plug-in estimates from the pre-vote counts.
        let l = self.counts.rounds() as f64;
        let denom = l + alpha_a + (m - 1) as f64 * alpha_b + alpha_o;
        let p_a = (self.counts.s as f64 + alpha_a) / denom;
        let p_o = (self.counts.o as f64 + alpha_o) / denom;
        let lo = 0.5 + clip;
        let hi = 1.0 - clip;
        let theta: Vec<f64> = self
            .counts
            .f
            .iter()
            .map(|&f_i| {
                let p_b = (f_i as f64 + alpha_b) / denom;
                (p_a / (p_a + p_b)).clamp(lo, hi)
            })
            .collect();
        let lambda = (p_a / (p_a + p_o)).clamp(lo, hi);

        if shared {
            // The whole e-value is recomputed with the current estimate
            // applied retroactively, exponents taken from post-vote counts.
            let mut s = self.counts.s;
            let mut f = self.counts.f.clone();
            let mut o = self.counts.o;
            match class {
                VoteClass::Leader => s += 1,
                VoteClass::Runner(i) => f[i] += 1,
                VoteClass::Other => o += 1,
            }
            for i in 0..m - 1 {
                self.log_e_run[i] = (s + f[i]) as f64 * LN_2
                    + s as f64 * theta[i].ln()
                    + f[i] as f64 * (1.0 - theta[i]).ln();
            }
            self.log_e_oth = (s + o) as f64 * LN_2
                + s as f64 * lambda.ln()
                + o as f64 * (1.0 - lambda).ln();
        } else {
            match class {
                VoteClass::Leader => {
                    for (le, th) in self.log_e_run.iter_mut().zip(&theta) {
                        *le += (2.0 * th).ln();
                    }
                    self.log_e_oth += (2.0 * lambda).ln();
                }
                VoteClass::Runner(i) => {
                    self.log_e_run[i] += (2.0 * (1.0 - theta[i])).ln();
                }
                VoteClass::Other => {
                    self.log_e_oth += (2.0 * (1.0 - lambda)).ln();
                }
            }
        }
    }

    /// True iff every run process and the others process sit at or above 1/ε
    /// (compared in log space, boundary inclusive).
    pub fn check_stop(&self, epsilon: f64) -> bool {
        let threshold = -epsilon.ln();
        self.log_e_run.iter().all(|&le| le >= threshold) && self.log_e_oth >= threshold
    }

    /// Serializes the state as a versioned JSON document with fixed field
    /// names: `version`, and under `state` the fields `config` (`epsilon`,
    /// `budget`, `m`, `prior`), `tally` (`counts`, `n`), `counts` (`s`, `f`,
    /// `o`), `log_e_run`, `log_e_oth`, `round`, and `prior_state`. Counts
    /// round-trip bit-faithfully; log e-values re-parse to the identical f64.
    pub fn to_snapshot_json(&self) -> String
    where
        L: Serialize,
    {
        serde_json::to_string(&Snapshot {
            version: SNAPSHOT_VERSION,
            state: self.clone(),
        })
        .expect("certificate state serializes")
    }

    pub fn from_snapshot_json(json: &str) -> Result<Self, MmcError>
    where
        L: DeserializeOwned,
    {
        let snap: Snapshot<L> =
            serde_json::from_str(json).map_err(|e| MmcError::SnapshotFormat(e.to_string()))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(MmcError::SnapshotVersion {
                found: snap.version,
                expected: SNAPSHOT_VERSION,
            });
        }
        snap.state.config.validate()?;
        Ok(snap.state)
    }
}

/// Outcome of a certificate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateOutcome<L> {
    pub decision: Decision,
    /// Current majority at termination; `None` if no vote arrived.
    pub winner: Option<L>,
    pub rounds_used: u64,
    pub final_log_e_run: Vec<f64>,
    pub final_log_e_oth: f64,
    /// Beta-approximation lower bound on Pr[winner = mode] (the 1−ε̂ form).
    pub eps_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Stopped,
    Abstained,
}

/// Lower bound on Pr[current majority = mode] from the recursive counts:
/// the worst of I_{1/2}(f_i+1, s+1) over runner-ups, then against
/// I_{1/2}(o+1, s+1).
pub fn eps_hat(counts: &RecursiveCounts) -> f64 {
    let s = counts.s as f64;
    let mut lo = f64::INFINITY;
    for &f_i in &counts.f {
        lo = lo.min(reg_inc_beta_half(f_i as f64 + 1.0, s + 1.0));
    }
    lo.min(reg_inc_beta_half(counts.o as f64 + 1.0, s + 1.0))
}

/// Runs the certificate over a fallible vote stream until it stops, the
/// budget is exhausted, or the stream ends or fails. A stream error is
/// surfaced alongside the (abstained) outcome.
pub fn run_certificate_fallible<L: Label, E, I>(
    votes: I,
    config: CertificateConfig,
) -> Result<(CertificateOutcome<L>, Option<E>), MmcError>
where
    I: IntoIterator<Item = Result<L, E>>,
{
    let mut state = CertificateState::new(config)?;
    let epsilon = state.config.epsilon;
    let budget = state.config.budget;
    let mut stream_error = None;

    let mut stopped = false;
    for vote in votes {
        let vote = match vote {
            Ok(v) => v,
            Err(e) => {
                stream_error = Some(e);
                break;
            }
        };
        state = state.step(vote)?;
        if state.check_stop(epsilon) {
            stopped = true;
            break;
        }
        if state.round >= budget {
            break;
        }
    }

    let outcome = CertificateOutcome {
        decision: if stopped {
            Decision::Stopped
        } else {
            Decision::Abstained
        },
        winner: state.tally.leader().cloned(),
        rounds_used: state.round,
        final_log_e_run: state.log_e_run.clone(),
        final_log_e_oth: state.log_e_oth,
        eps_hat: eps_hat(&state.counts),
    };
    Ok((outcome, stream_error))
}

/// Infallible-stream convenience wrapper around [`run_certificate_fallible`].
pub fn run_certificate<L: Label, I>(
    votes: I,
    config: CertificateConfig,
) -> Result<CertificateOutcome<L>, MmcError>
where
    I: IntoIterator<Item = L>,
{
    let (outcome, _none) = run_certificate_fallible::<L, std::convert::Infallible, _>(
        votes.into_iter().map(Ok),
        config,
    )?;
    Ok(outcome)
}

/// Closed-form approximations of the rounds needed to stop when the terminal
/// distribution is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopTimeHeuristics {
    /// Informative rounds for the leader-vs-runner-up process:
    /// log(1/ε) / KL(Ber(θ*) ‖ Ber(1/2)) with θ* = p_c/(p_c + p_j).
    pub m_run: f64,
    /// Informative rounds for the leader-vs-others process.
    pub m_oth: f64,
    /// Total rounds 2(p_c + p_j)/(p_c − p_j)² · log(1/ε).
    pub n_run: f64,
    /// Total rounds 2(1 − p_j)/(2p_c + p_j − 1)² · log(1/ε).
    pub n_oth: f64,
}

pub fn stop_time_heuristics(p: &CategoricalDistribution, epsilon: f64) -> StopTimeHeuristics {
    let mp = p.mode_profile();
    let p_c = p.prob(mp.c_star);
    let p_j = p.prob(mp.j_star);
    let log_inv_eps = (1.0 / epsilon).ln();
    if log_inv_eps == 0.0 {
        return StopTimeHeuristics {
            m_run: 0.0,
            m_oth: 0.0,
            n_run: 0.0,
            n_oth: 0.0,
        };
    }

    let informative_kl = |theta: f64| -> f64 {
        if theta <= 0.5 || theta >= 1.0 {
            // Null or degenerate parameter: no finite crossing time.
            return 0.0;
        }
        kl_bernoulli(theta, 0.5)
    };
    let theta = p_c / (p_c + p_j);
    let lambda = p_c / (1.0 - p_j);
    let div = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };

    StopTimeHeuristics {
        m_run: div(log_inv_eps, informative_kl(theta)),
        m_oth: div(log_inv_eps, informative_kl(lambda.min(1.0))),
        n_run: div(2.0 * (p_c + p_j) * log_inv_eps, mp.delta * mp.delta),
        n_oth: div(
            2.0 * (1.0 - p_j) * log_inv_eps,
            (2.0 * p_c + p_j - 1.0).powi(2),
        ),
    }
}
