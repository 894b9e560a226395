//! Bundled reference data: the demo tomography network (path-link matrix
//! `P`, structure matrix `B`, effective sensing matrix `A = P B`), the
//! demo hidden mean, and the 5x2 partial-recovery instance. The same
//! data ships as plain-text files under `data/` for use with the CLI;
//! the accessors here parse those files at compile time so the two never
//! drift.

use crate::linalg::parse_matrix;
use ndarray::{Array1, Array2};

fn embedded(text: &str, name: &str) -> Array2<f64> {
    parse_matrix(text, name).expect("bundled matrix parses")
}

/// Pinned regression value: the recoverability margin of the demo
/// sensing matrix at adversary budget 1, fixed by the exact-enumeration
/// and multistart cross-check.
pub const DEMO_ETA_M1: f64 = 0.0792428851750327;

/// 7x8 path-link routing matrix of the demo network.
pub fn demo_path_matrix() -> Array2<f64> {
    embedded(include_str!("../data/demo_P.txt"), "demo_P")
}

/// 8x4 structure matrix: the five edge links share one mean delay.
pub fn demo_structure_matrix() -> Array2<f64> {
    embedded(include_str!("../data/demo_B.txt"), "demo_B")
}

/// 7x4 effective sensing matrix of the demo problem (`P B`).
pub fn demo_sensing_matrix() -> Array2<f64> {
    embedded(include_str!("../data/demo_A.txt"), "demo_A")
}

/// Hidden mean used by the demo experiments.
pub fn demo_mean() -> Array1<f64> {
    let m = embedded(include_str!("../data/demo_mu.txt"), "demo_mu");
    Array1::from_iter(m.iter().copied())
}

/// 5x2 matrix where full recovery fails with one adversary but the
/// first coordinate is recoverable under 1-sparse corruption.
pub fn partial_recovery_matrix() -> Array2<f64> {
    embedded(include_str!("../data/partial_A.txt"), "partial_A")
}

/// Recoverable-component basis (2x1) for the partial-recovery instance.
pub fn partial_recovery_u() -> Array2<f64> {
    embedded(include_str!("../data/partial_U.txt"), "partial_U")
}

/// Complementary-component basis (2x1) for the partial-recovery instance.
pub fn partial_recovery_v() -> Array2<f64> {
    embedded(include_str!("../data/partial_V.txt"), "partial_V")
}
