//! Recoverability certification: the margin constant `eta`, the
//! robustness constant `K`, the partial-recovery condition and its
//! exact `l1` fitting program, and structured sensing matrices built
//! from path-link routing.

mod eta;
mod partial;

pub use eta::{
    compute_eta, compute_eta_exact, compute_eta_multistart, EtaMethod, EtaWitness,
    RecoverabilityReport, EXACT_MAX_COLS, EXACT_MAX_ROWS,
};
pub use partial::{check_a2_prime, l1_fit, L1Fit, PartialReport, PartialStructure};

use crate::error::{Error, Result};
use ndarray::Array2;

/// Margin below which a strict inequality is not considered certified.
pub const STRICT_MARGIN: f64 = 1e-9;

/// `K = 2 m A_bar / (N eta) + 1`, the worst-case adversarial
/// degradation factor. Requires a positive margin; `K = 1` with no
/// adversary budget.
pub fn robustness_k(report: &RecoverabilityReport, a: &Array2<f64>, m: usize) -> Result<f64> {
    if report.eta <= 0.0 {
        return Err(Error::RecoverabilityFailure { eta: report.eta });
    }
    let n = a.nrows() as f64;
    let a_bar = a
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(2.0 * m as f64 * a_bar / (n * report.eta) + 1.0)
}

/// Effective sensing matrix `A = P B` for a path-link routing matrix
/// `P` (0/1 entries) and a structure matrix `B`.
pub fn compose_tomography(p: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if p.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "P is {}x{} but B is {}x{}",
            p.nrows(),
            p.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if p.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument(
            "path-link matrix entries must be 0 or 1".into(),
        ));
    }
    Ok(p.dot(b))
}
