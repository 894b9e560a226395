//! The sensing world: matrix, hidden mean, worker roles, measurement
//! sampling, and box projection.
//!
//! Worker `j` observes scalar samples of `a_j' X` where `a_j'` is the
//! `j`-th row of the sensing matrix and `X` is a random vector with the
//! hidden mean. A fixed subset of workers (at most `m`) is adversarial
//! and reports arbitrary values instead; those values are produced by
//! the attack models in [`crate::adversary`], never here.

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use ndarray::{Array1, Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// Pluggable distribution of `X` around its mean. The estimation theory
/// only needs bounded per-coordinate variance; simulations default to
/// isotropic Gaussian.
pub trait NoiseSampler: Send + Sync {
    /// Draw one realization of `X` given its mean and scale parameter.
    fn sample_x(&self, mu: &Array1<f64>, sigma: f64, rng: &mut StreamRng) -> Array1<f64>;
    fn name(&self) -> &str;
}

/// `X = mu + sigma * z`, `z` standard Gaussian per coordinate.
#[derive(Debug, Default, Clone, Copy)]
pub struct IsotropicGaussian;

impl NoiseSampler for IsotropicGaussian {
    fn sample_x(&self, mu: &Array1<f64>, sigma: f64, rng: &mut StreamRng) -> Array1<f64> {
        let mut x = mu.clone();
        for v in x.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += sigma * z;
        }
        x
    }

    fn name(&self) -> &str {
        "isotropic-gaussian"
    }
}

#[derive(Clone)]
pub struct SensingProblem {
    a: Array2<f64>,
    mu_true: Array1<f64>,
    sigma: f64,
    adversary_set: BTreeSet<usize>,
    m: usize,
    noise: Arc<dyn NoiseSampler>,
}

impl fmt::Debug for SensingProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SensingProblem")
            .field("n", &self.n_workers())
            .field("d", &self.dim())
            .field("sigma", &self.sigma)
            .field("m", &self.m)
            .field("adversary_set", &self.adversary_set)
            .field("noise", &self.noise.name())
            .finish()
    }
}

impl SensingProblem {
    pub fn new(
        a: Array2<f64>,
        mu_true: Array1<f64>,
        sigma: f64,
        adversary_set: BTreeSet<usize>,
        m: usize,
    ) -> Result<Self> {
        let (n, d) = (a.nrows(), a.ncols());
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument("matrix must be nonempty".into()));
        }
        if mu_true.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "mu has length {}, matrix has {} columns",
                mu_true.len(),
                d
            )));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma = {sigma} must be finite and >= 0")));
        }
        if adversary_set.len() > m {
            return Err(Error::InvalidArgument(format!(
                "{} adversaries exceed budget m = {m}",
                adversary_set.len()
            )));
        }
        if m > n {
            return Err(Error::InvalidArgument(format!("budget m = {m} exceeds N = {n}")));
        }
        if let Some(&w) = adversary_set.iter().next_back() {
            if w >= n {
                return Err(Error::InvalidArgument(format!(
                    "adversary index {w} out of range for N = {n}"
                )));
            }
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        if a.rows().into_iter().all(|r| r.iter().all(|v| *v == 0.0)) {
            return Err(Error::InvalidArgument("at least one row must be nonzero".into()));
        }
        Ok(Self {
            a,
            mu_true,
            sigma,
            adversary_set,
            m,
            noise: Arc::new(IsotropicGaussian),
        })
    }

    pub fn with_noise(mut self, noise: Arc<dyn NoiseSampler>) -> Self {
        self.noise = noise;
        self
    }

    /// Same geometry with every sensing row scaled by `c` (used to dial
    /// measurement heterogeneity up or down).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut p = self.clone();
        p.a = &self.a * c;
        if c == 0.0 {
            return Err(Error::InvalidArgument("scale must be nonzero".into()));
        }
        Ok(p)
    }

    pub fn n_workers(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn row(&self, j: usize) -> ArrayView1<'_, f64> {
        self.a.row(j)
    }

    pub fn mu_true(&self) -> &Array1<f64> {
        &self.mu_true
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn budget(&self) -> usize {
        self.m
    }

    pub fn adversary_set(&self) -> &BTreeSet<usize> {
        &self.adversary_set
    }

    pub fn is_adversarial(&self, j: usize) -> bool {
        self.adversary_set.contains(&j)
    }

    pub fn honest_workers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_workers()).filter(|j| !self.is_adversarial(*j))
    }

    /// True measurement means `A mu`. Simulator-side knowledge: the
    /// algorithms never read this.
    pub fn expected_y(&self) -> Array1<f64> {
        self.a.dot(&self.mu_true)
    }

    /// Largest sensing-row Euclidean norm.
    pub fn a_bar(&self) -> f64 {
        self.a
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest coordinate magnitude of the hidden mean.
    pub fn mu_bar(&self) -> f64 {
        self.mu_true.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn noise(&self) -> &Arc<dyn NoiseSampler> {
        &self.noise
    }
}

/// One honest measurement `a_j' X` for worker `j`, drawn from the
/// worker's own stream. Adversarial indices are rejected: their values
/// come from the attack model, not from the sensing world.
pub fn sample_measurement(
    problem: &SensingProblem,
    worker: usize,
    rng: &mut StreamRng,
) -> Result<f64> {
    if worker >= problem.n_workers() {
        return Err(Error::InvalidArgument(format!(
            "worker {worker} out of range for N = {}",
            problem.n_workers()
        )));
    }
    if problem.is_adversarial(worker) {
        return Err(Error::AdversarialWorker(worker));
    }
    let x = problem
        .noise
        .sample_x(&problem.mu_true, problem.sigma, rng);
    Ok(problem.row(worker).dot(&x))
}

/// Sign with an exact zero: +1 for positive, -1 for negative, 0 at 0.
/// No tolerance band; any subgradient value in [-1, 1] is admissible at
/// zero and 0 is the convention used throughout.
pub fn sign(r: f64) -> i32 {
    if r > 0.0 {
        1
    } else if r < 0.0 {
        -1
    } else {
        0
    }
}

/// An axis-aligned box, the only projection set shipped.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxProjection {
    lo: Array1<f64>,
    hi: Array1<f64>,
}

impl BoxProjection {
    pub fn new(lo: Array1<f64>, hi: Array1<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidArgument("box has lo > hi in some coordinate".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, d: usize) -> Result<Self> {
        Self::new(Array1::from_elem(d, lo), Array1::from_elem(d, hi))
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &Array1<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &Array1<f64> {
        &self.hi
    }

    pub fn center(&self) -> Array1<f64> {
        (&self.lo + &self.hi) / 2.0
    }

    pub fn contains(&self, x: &Array1<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Distance from `x0` to the farthest box corner: the diameter
    /// constant of the projection set as seen from the start point.
    pub fn max_corner_distance(&self, x0: &Array1<f64>) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.dim() {
            let d = (x0[k] - self.lo[k]).abs().max((x0[k] - self.hi[k]).abs());
            acc += d * d;
        }
        acc.sqrt()
    }
}

/// Euclidean projection onto the box: a coordinate-wise clamp.
pub fn project_box(x: &Array1<f64>, bounds: &BoxProjection) -> Result<Array1<f64>> {
    if x.len() != bounds.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has length {}, box has dimension {}",
            x.len(),
            bounds.dim()
        )));
    }
    Ok(Array1::from_iter(x.iter().enumerate().map(|(k, v)| {
        v.clamp(bounds.lo[k], bounds.hi[k])
    })))
}

/// `D_X`: distance from the start point to the farthest point of the box.
pub fn diameter_from(bounds: &BoxProjection, x0: &Array1<f64>) -> f64 {
    bounds.max_corner_distance(x0)
}
