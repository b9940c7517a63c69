//! Statistical certificates for categorical majority votes.
//!
//! Given votes drawn from an unknown categorical distribution, this crate
//! answers "is the current majority the true mode?" three ways:
//!
//! * [`exact`] — ground-truth error probabilities when the distribution is
//!   known, by enumeration or dynamic programming;
//! * [`bounds`] — closed-form finite-sample and asymptotic certificates
//!   (Hoeffding, Bernstein, Chernoff–Markov, CLT variants, large-deviation
//!   rate with Bahadur–Rao prefactor) plus weighted-expert extensions;
//! * [`mmc`] — an anytime-valid sequential certificate that watches the
//!   stream and stops as soon as the majority is certified at level ε.
//!
//! [`tilt`] analyzes how sharpening the vote distribution (exponential
//! tilting, tempering) cuts certification cost and provides the matching
//! label-free reward estimators; [`sim`] is a seeded Monte Carlo harness for
//! error curves and stopping-time sweeps; [`ingest`] feeds the certificate
//! from memory, JSONL replays, or an HTTP completion endpoint.

// Parameter guards are written as !(x > 0.0) on purpose: the negation
// rejects NaN, which x <= 0.0 would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference constants keep the digits of the high-precision values they
// were checked against.
#![allow(clippy::excessive_precision)]

pub mod bounds;
pub mod dist;
pub mod exact;
pub mod ingest;
pub mod mmc;
pub mod sim;
pub mod special;
pub mod tally;
pub mod tilt;

pub use bounds::{BoundReport, ExpertPanel};
pub use dist::{CategoricalDistribution, DistError, ModeProfile};
pub use mmc::{
    CertificateConfig, CertificateOutcome, CertificateState, Decision, PriorSpec, RecursiveCounts,
};
pub use special::{ln_upper_half_beta, reg_inc_beta_half, upper_half_beta};
pub use tally::{Label, Tally, TopLabel};
