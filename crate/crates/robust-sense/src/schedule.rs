//! Stepsize schedules for the two-timescale recursions and the
//! tail-averaging weights.
//!
//! Three named regimes are shipped, one per rate statement:
//! constant/constant (horizon-tuned), constant alpha with `1/(t+1)`
//! beta, and fully decaying `1/sqrt(t+1)`, `1/(t+1)`. `Custom` accepts
//! any pair of sequences.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
pub enum StepsizeSchedule {
    /// `alpha_t = 1/sqrt(n)`, `beta_t = (ln n - 2 ln ln n) / (2 r n)`
    /// for the whole horizon; requires `n >= 3` so beta is positive.
    ConstConst { n: u64, r: f64 },
    /// `alpha_t = 1/sqrt(n)`, `beta_t = 1/(t+1)`.
    ConstDecay { n: u64 },
    /// `alpha_t = 1/sqrt(t+1)`, `beta_t = 1/(t+1)`; horizon-free.
    DecayDecay,
    /// Arbitrary `t -> (alpha_t, beta_t)`.
    Custom(Arc<dyn Fn(u64) -> (f64, f64) + Send + Sync>),
}

impl fmt::Debug for StepsizeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConstConst { n, r } => write!(f, "ConstConst {{ n: {n}, r: {r} }}"),
            Self::ConstDecay { n } => write!(f, "ConstDecay {{ n: {n} }}"),
            Self::DecayDecay => write!(f, "DecayDecay"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl StepsizeSchedule {
    pub fn const_const(n: u64, r: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!(
                "constant/constant schedule needs n >= 3, got {n}"
            )));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidArgument(format!("r = {r} must lie in (0, 1)")));
        }
        let nf = n as f64;
        let beta = (nf.ln() - 2.0 * nf.ln().ln()) / (2.0 * r * nf);
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "constant beta = {beta} falls outside (0, 1] for n = {n}, r = {r}"
            )));
        }
        Ok(Self::ConstConst { n, r })
    }

    pub fn const_decay(n: u64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("constant/decaying schedule needs n >= 1".into()));
        }
        Ok(Self::ConstDecay { n })
    }

    /// Stepsizes at iteration `t`. For the horizon-tuned regimes the
    /// caller keeps `t <= n`.
    pub fn stepsizes_at(&self, t: u64) -> (f64, f64) {
        match self {
            Self::ConstConst { n, r } => {
                debug_assert!(t <= *n);
                let nf = *n as f64;
                let alpha = 1.0 / nf.sqrt();
                let beta = (nf.ln() - 2.0 * nf.ln().ln()) / (2.0 * r * nf);
                (alpha, beta)
            }
            Self::ConstDecay { n } => {
                debug_assert!(t <= *n);
                (1.0 / (*n as f64).sqrt(), 1.0 / (t as f64 + 1.0))
            }
            Self::DecayDecay => {
                let tf = t as f64;
                (1.0 / (tf + 1.0).sqrt(), 1.0 / (tf + 1.0))
            }
            Self::Custom(f) => f(t),
        }
    }

    pub fn alpha_at(&self, t: u64) -> f64 {
        self.stepsizes_at(t).0
    }

    pub fn beta_at(&self, t: u64) -> f64 {
        self.stepsizes_at(t).1
    }
}

/// Normalized tail weights `alpha_t / sum(alpha)` over a window of
/// iterations. Errors on an empty window; weights sum to one.
pub fn tail_weights(alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("empty tail window".into()));
    }
    if alphas.iter().any(|a| a.is_nan() || *a <= 0.0) {
        return Err(Error::InvalidArgument("tail weights need all alpha > 0".into()));
    }
    let total: f64 = alphas.iter().sum();
    Ok(alphas.iter().map(|a| a / total).collect())
}
