//! Simulation laboratory for robust distributed mean estimation with
//! adversarial workers.
//!
//! A parameter server estimates the mean of a hidden random vector
//! from scalar worker measurements `a_j' X` while up to `m` workers
//! report arbitrary values. The crate provides the two-timescale
//! estimator (synchronous and asynchronous), recoverability
//! certification with exact margin computation, partial recovery via
//! exact `l1` fitting, finite-time rate-bound evaluators,
//! robust-aggregation baselines under a collinear attack, and a
//! deterministic experiment harness.
//!
//! Start with the runnable examples, one per capability:
//!
//! ```bash
//! cargo run --release --example certify_recoverability
//! cargo run --release --example estimate_mean
//! cargo run --release --example theorem_bounds
//! cargo run --release --example partial_recovery
//! cargo run --release --example tomography
//! cargo run --release --example attack_vs_baselines
//! cargo run --release --example decomposition_diagnostics
//! ```
//!
//! Module map:
//!
//! - [`problem`]: the sensing world, measurement sampling, box
//!   projection, and the exact-zero sign convention.
//! - [`schedule`]: the three stepsize regimes and tail-average weights.
//! - [`recover`]: the recoverability margin (exact and multistart), the
//!   partial-recovery condition, the `l1` fitting program, and sensing
//!   matrices composed from path-link routing.
//! - [`lp`]: the dense two-phase simplex behind the `l1` programs.
//! - [`estimator`]: the two-timescale recursions, trajectory runner,
//!   drive-term decomposition, and rate-bound evaluators.
//! - [`aggregators`]: robust-aggregation baselines with bucketing and
//!   buffered wrappers.
//! - [`adversary`]: attack models over the measurement and momentum
//!   channels.
//! - [`harness`]: configs, seeded multi-trial experiments, CSV/series
//!   emission, rate fitting, comparison, and the tomography demo.
//! - [`data`]: the bundled matrices behind the demos.
//! - [`rng`]: the deterministic stream-splitting randomness contract.

pub mod adversary;
pub mod aggregators;
pub mod data;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod lp;
pub mod problem;
pub mod recover;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
