//! The recoverability margin
//! `eta = min_{|S|=m} min_{x != 0} [sum_{S^c} |a_j'x| - sum_S |a_j'x|] / (N ||x||)`.
//!
//! Exact mode minimizes the piecewise-linear positively-homogeneous
//! objective over the unit sphere by enumerating the faces of the
//! hyperplane arrangement `{a_j' x = 0}`: on each face the objective is
//! linear, so every local minimizer is (up to sign) the normalized
//! projection of one signed row combination onto the face's subspace.
//! Evaluating the true objective at that finite candidate set and
//! taking the minimum is exact. Multistart mode runs projected
//! subgradient descent on the sphere from random starts and only yields
//! an upper bound on `eta`; it is never reported as certified.

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use ndarray::{Array1, Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

use super::STRICT_MARGIN;

/// Exact enumeration is restricted to desk-scale instances.
pub const EXACT_MAX_ROWS: usize = 12;
pub const EXACT_MAX_COLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaMethod {
    /// Face enumeration; the reported value is the exact minimum.
    ExactEnumeration,
    /// Subgradient multistart; the reported value is an upper bound.
    Multistart,
}

#[derive(Debug, Clone)]
pub struct EtaWitness {
    /// Adversarial subset attaining the minimum.
    pub subset: Vec<usize>,
    /// Unit direction attaining the minimum.
    pub direction: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct RecoverabilityReport {
    pub eta: f64,
    /// `2 m A_bar / (N eta) + 1`; infinite when the margin is not positive.
    pub k: f64,
    pub holds_a2: bool,
    pub witness: Option<EtaWitness>,
    pub method: EtaMethod,
}

impl RecoverabilityReport {
    pub fn certified(&self) -> bool {
        self.method == EtaMethod::ExactEnumeration
    }
}

/// Objective `sum_j |a_j'x| - 2 * (sum of the m largest |a_j'x|)`,
/// which equals `min_{|S|=m} [sum_{S^c} - sum_S]` at unit `x`.
fn worst_subset_value(a: &ArrayView2<f64>, m: usize, x: &Array1<f64>) -> f64 {
    let mut mags: Vec<f64> = a.rows().into_iter().map(|r| r.dot(x).abs()).collect();
    let total: f64 = mags.iter().sum();
    mags.sort_by(|p, q| q.partial_cmp(p).unwrap());
    let top: f64 = mags.iter().take(m).sum();
    total - 2.0 * top
}

/// The subset of the m largest magnitudes; lowest indices on ties.
fn worst_subset(a: &ArrayView2<f64>, m: usize, x: &Array1<f64>) -> Vec<usize> {
    let mut idx: Vec<(usize, f64)> = a
        .rows()
        .into_iter()
        .enumerate()
        .map(|(j, r)| (j, r.dot(x).abs()))
        .collect();
    idx.sort_by(|p, q| q.1.partial_cmp(&p.1).unwrap().then(p.0.cmp(&q.0)));
    let mut s: Vec<usize> = idx.into_iter().take(m).map(|(j, _)| j).collect();
    s.sort_unstable();
    s
}

fn validate(a: &Array2<f64>, m: usize) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidArgument("matrix must be nonempty".into()));
    }
    if m >= a.nrows() {
        return Err(Error::InvalidArgument(format!(
            "adversary budget m = {m} must be below N = {}",
            a.nrows()
        )));
    }
    Ok(())
}

fn report_from(
    a: &Array2<f64>,
    m: usize,
    best: f64,
    best_x: Array1<f64>,
    method: EtaMethod,
) -> RecoverabilityReport {
    let n = a.nrows() as f64;
    let eta = best / n;
    let holds = eta > STRICT_MARGIN;
    let a_bar = a
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let k = if holds {
        2.0 * m as f64 * a_bar / (n * eta) + 1.0
    } else {
        f64::INFINITY
    };
    let subset = worst_subset(&a.view(), m, &best_x);
    RecoverabilityReport {
        eta,
        k,
        holds_a2: holds,
        witness: Some(EtaWitness {
            subset,
            direction: best_x,
        }),
        method,
    }
}

/// Exact `eta` by face enumeration; errors on instances beyond the
/// desk-scale limits.
pub fn compute_eta_exact(a: &Array2<f64>, m: usize) -> Result<RecoverabilityReport> {
    validate(a, m)?;
    let (n, d) = (a.nrows(), a.ncols());
    if n > EXACT_MAX_ROWS || d > EXACT_MAX_COLS {
        return Err(Error::TooLargeForExact { n, d });
    }

    let rows: Vec<Array1<f64>> = a.rows().into_iter().map(|r| r.to_owned()).collect();
    let view = a.view();
    let norm_tol = 1e-12 * (1.0 + a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));

    let mut best = f64::INFINITY;
    let mut best_x: Option<Array1<f64>> = None;
    let mut consider = |x: Array1<f64>| {
        let val = worst_subset_value(&view, m, &x);
        if val < best {
            best = val;
            best_x = Some(x);
        }
    };

    // Subsets J of active hyperplanes, |J| <= d-1 (larger active sets
    // reduce to an independent subset spanning the same space).
    for mask in 0u32..(1 << n) {
        if (mask.count_ones() as usize) > d.saturating_sub(1) {
            continue;
        }
        // Orthonormal basis of span{a_j : j in J}.
        let mut basis: Vec<Array1<f64>> = Vec::new();
        for (j, row) in rows.iter().enumerate() {
            if mask & (1 << j) == 0 {
                continue;
            }
            let mut v = row.clone();
            for q in &basis {
                let c = q.dot(&v);
                v = &v - &(q * c);
            }
            let nv = v.dot(&v).sqrt();
            if nv > norm_tol {
                basis.push(v / nv);
            }
        }
        if basis.len() == d {
            continue; // face subspace is {0}
        }

        // Basis of the face subspace itself (orthogonal complement):
        // covers minima where the projected gradient vanishes.
        {
            let mut ext = basis.clone();
            for k in 0..d {
                let mut v = Array1::zeros(d);
                v[k] = 1.0;
                for q in &ext {
                    let c = q.dot(&v);
                    v = &v - &(q * c);
                }
                let nv = v.dot(&v).sqrt();
                if nv > 1e-10 {
                    let u = v / nv;
                    consider(u.clone());
                    ext.push(u);
                }
            }
        }

        // Signed row combinations projected onto the face subspace. The
        // objective is even, so the leading free sign is fixed.
        let free: Vec<usize> = (0..n).filter(|j| mask & (1 << *j) == 0).collect();
        let nf = free.len();
        if nf == 0 {
            continue;
        }
        for smask in 0u32..(1 << (nf - 1)) {
            let mut c = rows[free[0]].clone();
            for (b, &j) in free.iter().enumerate().skip(1) {
                let sign = if smask & (1 << (b - 1)) != 0 { -1.0 } else { 1.0 };
                c = &c + &(&rows[j] * sign);
            }
            for q in &basis {
                let dot = q.dot(&c);
                c = &c - &(q * dot);
            }
            let nc = c.dot(&c).sqrt();
            if nc > norm_tol {
                consider(c / nc);
            }
        }
    }

    let best_x = best_x.expect("candidate set is never empty");
    Ok(report_from(a, m, best, best_x, EtaMethod::ExactEnumeration))
}

/// Upper bound on `eta` from projected subgradient descent over
/// `starts` random unit starts (at least 200 recommended), followed by
/// a shrinking-radius local polish. Not a certificate.
pub fn compute_eta_multistart(
    a: &Array2<f64>,
    m: usize,
    starts: usize,
    source: &RandomSource,
) -> Result<RecoverabilityReport> {
    validate(a, m)?;
    let d = a.ncols();
    let view = a.view();
    let rows: Vec<Array1<f64>> = a.rows().into_iter().map(|r| r.to_owned()).collect();
    let a_bar = rows
        .iter()
        .map(|r| r.dot(r).sqrt())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut rng = source.stream(0);

    let gauss_unit = |rng: &mut crate::rng::StreamRng| -> Array1<f64> {
        loop {
            let v: Array1<f64> = Array1::from_iter((0..d).map(|_| StandardNormal.sample(rng)));
            let nv = v.dot(&v).sqrt();
            if nv > 1e-6 {
                return v / nv;
            }
        }
    };

    let subgradient = |x: &Array1<f64>| -> Array1<f64> {
        let mut mags: Vec<(usize, f64, f64)> = rows
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let p = r.dot(x);
                (j, p.abs(), if p > 0.0 { 1.0 } else if p < 0.0 { -1.0 } else { 0.0 })
            })
            .collect();
        mags.sort_by(|p, q| q.1.partial_cmp(&p.1).unwrap().then(p.0.cmp(&q.0)));
        let mut g = Array1::zeros(d);
        for (rank, (j, _, s)) in mags.into_iter().enumerate() {
            let w = if rank < m { -1.0 } else { 1.0 };
            g = &g + &(&rows[j] * (w * s));
        }
        g
    };

    let mut best = f64::INFINITY;
    let mut best_x = Array1::zeros(d);
    for _ in 0..starts.max(1) {
        let mut x = gauss_unit(&mut rng);
        for t in 0..300u32 {
            let val = worst_subset_value(&view, m, &x);
            if val < best {
                best = val;
                best_x = x.clone();
            }
            let g = subgradient(&x);
            let tau = 0.5 / (a_bar * ((t + 1) as f64).sqrt());
            let stepped = &x - &(&g * tau);
            let nv = stepped.dot(&stepped).sqrt();
            if nv < 1e-9 {
                break;
            }
            x = stepped / nv;
        }
    }

    // Shrinking-radius polish around the best point found.
    for level in 0..32 {
        let radius = 0.5f64.powi(level);
        for _ in 0..32 {
            let probe = &best_x + &(gauss_unit(&mut rng) * radius);
            let nv = probe.dot(&probe).sqrt();
            if nv < 1e-9 {
                continue;
            }
            let probe = probe / nv;
            let val = worst_subset_value(&view, m, &probe);
            if val < best {
                best = val;
                best_x = probe;
            }
        }
    }

    Ok(report_from(a, m, best, best_x, EtaMethod::Multistart))
}

/// Exact mode when the instance is desk-scale, multistart otherwise.
pub fn compute_eta(a: &Array2<f64>, m: usize) -> Result<RecoverabilityReport> {
    if a.nrows() <= EXACT_MAX_ROWS && a.ncols() <= EXACT_MAX_COLS {
        compute_eta_exact(a, m)
    } else {
        compute_eta_multistart(a, m, 200, &RandomSource::new(0x6e74612d))
    }
}
