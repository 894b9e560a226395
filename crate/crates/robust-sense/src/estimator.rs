//! The two-timescale estimator: a projected sign-subgradient recursion
//! on the mean estimate `x` coupled with a faster averaging recursion
//! on the measurement-mean estimate `y`, in synchronous and
//! asynchronous variants, plus the decomposition diagnostics and
//! numeric evaluators for the rate bounds.
//!
//! Update order within one iteration is normative: `x` moves first,
//! against the current `y`; the fresh report updates `y` afterwards.

use crate::adversary::{attack_measurement, AttackContext, AttackSpec};
use crate::error::{Error, Result};
use crate::linalg::l2_norm;
use crate::problem::{project_box, sample_measurement, sign, BoxProjection, SensingProblem};
use crate::rng::{RandomSource, TrialStreams};
use crate::schedule::StepsizeSchedule;
use ndarray::{Array1, ArrayView1};
use rand::RngExt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sync,
    Async,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Sync => "sync",
            Mode::Async => "async",
        }
    }
}

/// `f(x) = ||A x - EY||_1 / N`, the objective the estimator descends.
/// Reported against the true measurement means; the algorithm itself
/// never reads them.
pub fn objective_f(
    a: &ndarray::Array2<f64>,
    expected_y: &Array1<f64>,
    x: &Array1<f64>,
) -> Result<f64> {
    if a.ncols() != x.len() || a.nrows() != expected_y.len() {
        return Err(Error::DimensionMismatch(format!(
            "objective: A is {}x{}, EY has {}, x has {}",
            a.nrows(),
            a.ncols(),
            expected_y.len(),
            x.len()
        )));
    }
    let resid = a.dot(x) - expected_y;
    Ok(resid.iter().map(|r| r.abs()).sum::<f64>() / a.nrows() as f64)
}

/// Constants entering the rate bounds, derived from the problem, the
/// projection box and the start point.
#[derive(Debug, Clone)]
pub struct RateConstants {
    pub k: f64,
    pub d_x: f64,
    pub a_bar: f64,
    pub c_n: f64,
    pub delta: f64,
    pub e0_y: f64,
    pub eta: f64,
    pub mode: Mode,
    pub n_workers: usize,
    pub budget: usize,
}

impl RateConstants {
    /// Derive every constant from the simulator's ground truth: the
    /// noise term uses the per-mode table (asynchronous reports are
    /// rescaled by the worker count so their second moment picks up the
    /// mean as well), and the initial y-error is exact because `y`
    /// starts at zero.
    pub fn derive(
        problem: &SensingProblem,
        bounds: &BoxProjection,
        x0: &Array1<f64>,
        eta: f64,
        mode: Mode,
    ) -> Result<Self> {
        let n = problem.n_workers();
        let m = problem.budget();
        let d = problem.dim() as f64;
        let a_bar = problem.a_bar();
        let sigma_bar = problem.sigma();
        let mu_bar = problem.mu_bar();
        let delta = match mode {
            Mode::Async => (d * a_bar * a_bar * (sigma_bar * sigma_bar + mu_bar * mu_bar)).sqrt(),
            Mode::Sync => (d * a_bar * a_bar * sigma_bar * sigma_bar).sqrt(),
        };
        let c_n = match mode {
            Mode::Async => 2.0 * (n - m) as f64 / (n as f64).sqrt(),
            Mode::Sync => 2.0 * (n - m) as f64 / n as f64,
        };
        let k = if m == 0 {
            1.0
        } else {
            if eta <= 0.0 {
                return Err(Error::RecoverabilityFailure { eta });
            }
            2.0 * m as f64 * a_bar / (n as f64 * eta) + 1.0
        };
        let ey = problem.expected_y();
        let e0_y = problem
            .honest_workers()
            .map(|j| ey[j].abs())
            .fold(0.0, f64::max);
        Ok(Self {
            k,
            d_x: bounds.max_corner_distance(x0),
            a_bar,
            c_n,
            delta,
            e0_y,
            eta,
            mode,
            n_workers: n,
            budget: m,
        })
    }
}

/// Which rate statement to evaluate: constant/constant stepsizes,
/// constant alpha with decaying beta, or fully decaying.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundStatement {
    ConstConst,
    ConstDecay,
    DecayDecay,
}

impl BoundStatement {
    pub fn schedule(&self, n: u64, r: f64) -> Result<StepsizeSchedule> {
        match self {
            Self::ConstConst => StepsizeSchedule::const_const(n, r),
            Self::ConstDecay => StepsizeSchedule::const_decay(n),
            Self::DecayDecay => Ok(StepsizeSchedule::DecayDecay),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::ConstConst => "s1",
            Self::ConstDecay => "s2",
            Self::DecayDecay => "s3",
        }
    }
}

/// Right-hand side of the finite-time bound on `E f(x~)` for the
/// tail-averaged iterate under the chosen stepsize regime.
pub fn theorem_bound(
    statement: BoundStatement,
    consts: &RateConstants,
    n: u64,
    r: f64,
) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("r = {r} must lie in (0, 1)")));
    }
    let min_n = match statement {
        BoundStatement::ConstConst => 3,
        BoundStatement::ConstDecay => 1,
        BoundStatement::DecayDecay => 2,
    };
    if n < min_n {
        return Err(Error::InvalidArgument(format!(
            "statement {} needs n >= {min_n}, got {n}",
            statement.label()
        )));
    }
    let nf = n as f64;
    let k = consts.k;
    let d2 = consts.d_x * consts.d_x;
    let a2 = consts.a_bar * consts.a_bar;
    let cd = consts.c_n * consts.delta;
    let frac_honest = (consts.n_workers - consts.budget) as f64 / consts.n_workers as f64;
    Ok(match statement {
        BoundStatement::ConstConst => {
            let lead = 2.0 * k * d2 / (1.0 - r)
                + a2 / 2.0
                + 40.0 * r * frac_honest * consts.e0_y / (1.0 - r);
            lead / nf.sqrt() + (cd / (2.0 * r).sqrt()) * (nf.ln() / nf).sqrt()
        }
        BoundStatement::ConstDecay => {
            let lead = 2.0 * k * d2 / (1.0 - r)
                + a2 / 2.0
                + cd * (1.0 / r.sqrt() + 2.0 * (1.0 - r.sqrt())) / (1.0 - r);
            lead / nf.sqrt()
        }
        BoundStatement::DecayDecay => {
            (4.0 * k * d2 + (2.0 * a2 + 4.0 * cd) * (2.0 / r).ln()) / ((1.0 - r) * nf.sqrt())
        }
    })
}

/// Bound on the mean-square error of one honest measurement-mean
/// coordinate after `betas.len()` updates:
/// `E0^2 prod (1-b_l)^2 + c D^2 sum b_t^2 prod_{l>t} (1-b_l)^2`, where
/// the report-variance factor `c` is the worker count under
/// asynchronous single-worker updates and 1 under synchronous ones.
pub fn y_recursion_bound(
    e0_y: f64,
    delta: f64,
    betas: &[f64],
    mode: Mode,
    n_workers: usize,
) -> f64 {
    let c = match mode {
        Mode::Async => n_workers as f64,
        Mode::Sync => 1.0,
    };
    let mut prod = 1.0;
    let mut sum = 0.0;
    for &b in betas {
        let decay = (1.0 - b) * (1.0 - b);
        sum = sum * decay + b * b;
        prod *= decay;
    }
    e0_y * e0_y * prod + c * delta * delta * sum
}

/// State of one trajectory.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub x: Array1<f64>,
    pub y: Array1<f64>,
    pub t: u64,
    tail_k: u64,
    tail_weight: f64,
    tail_sum: Array1<f64>,
}

impl EstimatorState {
    /// Start at the box center with zero measurement-mean estimates.
    pub fn init(problem: &SensingProblem, bounds: &BoxProjection, tail_start: u64) -> Result<Self> {
        if bounds.dim() != problem.dim() {
            return Err(Error::DimensionMismatch(
                "projection box and problem dimension disagree".into(),
            ));
        }
        Ok(Self::at(
            bounds.center(),
            Array1::zeros(problem.n_workers()),
            tail_start,
        ))
    }

    /// Explicit start state (diagnostics and tests).
    pub fn at(x0: Array1<f64>, y0: Array1<f64>, tail_start: u64) -> Self {
        let d = x0.len();
        Self {
            x: x0,
            y: y0,
            t: 0,
            tail_k: tail_start,
            tail_weight: 0.0,
            tail_sum: Array1::zeros(d),
        }
    }

    fn absorb_tail(&mut self, alpha: f64) {
        if self.t >= self.tail_k {
            self.tail_weight += alpha;
            self.tail_sum = &self.tail_sum + &(&self.x * alpha);
        }
    }

    /// Weighted tail average accumulated so far.
    pub fn tail_average(&self) -> Option<Array1<f64>> {
        (self.tail_weight > 0.0).then(|| &self.tail_sum / self.tail_weight)
    }
}

/// `x + alpha * a_i * sign(y_i - a_i'x)`: the pre-projection move of
/// the asynchronous x-update.
pub fn async_x_target(
    x: &Array1<f64>,
    a_i: &ArrayView1<f64>,
    y_i: f64,
    alpha: f64,
) -> Array1<f64> {
    let s = sign(y_i - a_i.dot(x)) as f64;
    x + &(&a_i.to_owned() * (alpha * s))
}

/// Asynchronous y-update: every coordinate decays, only the selected
/// one receives the worker-count-scaled report.
pub fn async_y_update(y: &mut Array1<f64>, selected: usize, report: f64, beta: f64) {
    let n = y.len() as f64;
    for (j, v) in y.iter_mut().enumerate() {
        let drive = if j == selected { n * report } else { 0.0 };
        *v += beta * (drive - *v);
    }
}

/// `x + alpha * sum_j a_j * sign(y_j - a_j'x)`: the pre-projection move
/// of the synchronous x-update.
pub fn sync_x_target(
    a: &ndarray::Array2<f64>,
    x: &Array1<f64>,
    y: &Array1<f64>,
    alpha: f64,
) -> Array1<f64> {
    let mut step = Array1::<f64>::zeros(x.len());
    for (j, row) in a.rows().into_iter().enumerate() {
        let s = sign(y[j] - row.dot(x)) as f64;
        if s != 0.0 {
            step = &step + &(&row.to_owned() * s);
        }
    }
    x + &(&step * alpha)
}

/// Synchronous y-update: plain averaging toward each fresh report.
pub fn sync_y_update(y: &mut Array1<f64>, reports: &Array1<f64>, beta: f64) {
    for (v, r) in y.iter_mut().zip(reports.iter()) {
        *v += beta * (r - *v);
    }
}

/// Honest gradient-style snapshot `a_j (a_j'x - y_j)` over honest
/// workers; what the omniscient attack gets to read on the measurement
/// channel.
fn honest_snapshot(problem: &SensingProblem, x: &Array1<f64>, y: &Array1<f64>) -> Vec<Array1<f64>> {
    problem
        .honest_workers()
        .map(|j| {
            let row = problem.row(j);
            &row.to_owned() * (row.dot(x) - y[j])
        })
        .collect()
}

fn measurement_for(
    problem: &SensingProblem,
    attack: Option<&AttackSpec>,
    worker: usize,
    x: &Array1<f64>,
    y: &Array1<f64>,
    streams: &mut TrialStreams,
) -> Result<f64> {
    if problem.is_adversarial(worker) {
        let spec = attack.ok_or_else(|| {
            Error::InvalidArgument(
                "problem has adversarial workers but no attack model was supplied".into(),
            )
        })?;
        let snapshot = honest_snapshot(problem, x, y);
        let ctx = AttackContext {
            x,
            honest_momenta: &snapshot,
            worker,
            problem,
        };
        attack_measurement(spec, &ctx, &mut streams.workers[worker])
    } else {
        sample_measurement(problem, worker, &mut streams.workers[worker])
    }
}

/// One asynchronous iteration: sample a worker uniformly, move `x`
/// along that worker's signed row against the current `y`, then fold
/// the worker's fresh report into `y`.
pub fn async_step(
    state: &mut EstimatorState,
    problem: &SensingProblem,
    sched: &StepsizeSchedule,
    bounds: &BoxProjection,
    attack: Option<&AttackSpec>,
    streams: &mut TrialStreams,
) -> Result<()> {
    let (alpha, beta) = sched.stepsizes_at(state.t);
    let n = problem.n_workers();
    let i = streams.server.random_range(0..n);

    let x_pre = state.x.clone();
    let target = async_x_target(&state.x, &problem.row(i), state.y[i], alpha);
    state.x = project_box(&target, bounds)?;

    let report = measurement_for(problem, attack, i, &x_pre, &state.y, streams)?;
    async_y_update(&mut state.y, i, report, beta);
    state.t += 1;
    Ok(())
}

/// One synchronous iteration: move `x` along the full signed-row sum
/// against the current `y`, then fold every worker's fresh report into
/// `y`.
pub fn sync_step(
    state: &mut EstimatorState,
    problem: &SensingProblem,
    sched: &StepsizeSchedule,
    bounds: &BoxProjection,
    attack: Option<&AttackSpec>,
    streams: &mut TrialStreams,
) -> Result<()> {
    let (alpha, beta) = sched.stepsizes_at(state.t);
    let n = problem.n_workers();

    let x_pre = state.x.clone();
    let target = sync_x_target(problem.matrix(), &state.x, &state.y, alpha);
    state.x = project_box(&target, bounds)?;

    let mut reports = Array1::zeros(n);
    for j in 0..n {
        reports[j] = measurement_for(problem, attack, j, &x_pre, &state.y, streams)?;
    }
    sync_y_update(&mut state.y, &reports, beta);
    state.t += 1;
    Ok(())
}

/// Everything recorded along one run: per-iteration objective, errors,
/// the iterates themselves, and the final tail average.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub f_x: Vec<f64>,
    pub err_x: Vec<f64>,
    pub max_honest_y_err: Vec<f64>,
    pub xs: Vec<Array1<f64>>,
    pub alphas: Vec<f64>,
    pub tail_x: Array1<f64>,
    pub f_tail: f64,
    pub tail_start: u64,
}

impl Trajectory {
    /// Tail average as if the run had stopped at horizon `t`, using the
    /// recorded stepsizes as weights over `ceil(r t) ..= t`.
    pub fn tail_average_at(&self, t: u64, r: f64) -> Array1<f64> {
        let t = (t as usize).min(self.xs.len() - 1);
        let k = ((r * t as f64).ceil() as usize).min(t);
        let mut w = 0.0;
        let mut acc = Array1::zeros(self.xs[0].len());
        for i in k..=t {
            w += self.alphas[i];
            acc = &acc + &(&self.xs[i] * self.alphas[i]);
        }
        acc / w
    }
}

/// Run the estimator for `n + 1` iterations (t = 0..=n), accumulating
/// the tail average over `ceil(r n) ..= n`.
#[allow(clippy::too_many_arguments)]
pub fn run(
    problem: &SensingProblem,
    mode: Mode,
    sched: &StepsizeSchedule,
    bounds: &BoxProjection,
    attack: Option<&AttackSpec>,
    n: u64,
    r: f64,
    source: &RandomSource,
    trial: u64,
) -> Result<Trajectory> {
    if n < 1 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("r = {r} must lie in (0, 1)")));
    }
    let k = (r * n as f64).ceil() as u64;
    let mut streams = TrialStreams::open(source, problem.n_workers(), trial);
    let mut state = EstimatorState::init(problem, bounds, k)?;
    run_from(
        &mut state, problem, mode, sched, bounds, attack, n, r, &mut streams,
    )
}

/// As [`run`], from an explicit state and explicit streams.
#[allow(clippy::too_many_arguments)]
pub fn run_from(
    state: &mut EstimatorState,
    problem: &SensingProblem,
    mode: Mode,
    sched: &StepsizeSchedule,
    bounds: &BoxProjection,
    attack: Option<&AttackSpec>,
    n: u64,
    r: f64,
    streams: &mut TrialStreams,
) -> Result<Trajectory> {
    let expected_y = problem.expected_y();
    let mu = problem.mu_true();
    let a = problem.matrix();
    let len = (n + 1) as usize;
    let mut traj = Trajectory {
        f_x: Vec::with_capacity(len),
        err_x: Vec::with_capacity(len),
        max_honest_y_err: Vec::with_capacity(len),
        xs: Vec::with_capacity(len),
        alphas: Vec::with_capacity(len),
        tail_x: Array1::zeros(problem.dim()),
        f_tail: f64::NAN,
        tail_start: (r * n as f64).ceil() as u64,
    };
    for t in 0..=n {
        let (alpha, _) = sched.stepsizes_at(t);
        traj.f_x.push(objective_f(a, &expected_y, &state.x)?);
        traj.err_x.push(l2_norm(&(&state.x - mu)));
        traj.max_honest_y_err.push(
            problem
                .honest_workers()
                .map(|j| (state.y[j] - expected_y[j]).abs())
                .fold(0.0, f64::max),
        );
        traj.xs.push(state.x.clone());
        traj.alphas.push(alpha);
        state.absorb_tail(alpha);
        match mode {
            Mode::Async => async_step(state, problem, sched, bounds, attack, streams)?,
            Mode::Sync => sync_step(state, problem, sched, bounds, attack, streams)?,
        }
    }
    traj.tail_x = state
        .tail_average()
        .expect("tail window is nonempty for r < 1");
    traj.f_tail = objective_f(a, &expected_y, &traj.tail_x)?;
    Ok(traj)
}

/// The diagnostic split of the asynchronous drive term: `g` is the true
/// negative subgradient direction, `g'` its corruption through the
/// adversarial estimates, `eps` the honest estimation error, and the
/// remainder (per selected worker) is a martingale difference.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub g: Array1<f64>,
    pub g_prime: Array1<f64>,
    pub eps: Array1<f64>,
}

pub fn decomposition(
    x: &Array1<f64>,
    y: &Array1<f64>,
    problem: &SensingProblem,
) -> Decomposition {
    let n = problem.n_workers();
    let ey = problem.expected_y();
    let d = problem.dim();
    let mut g = Array1::zeros(d);
    let mut g_prime = Array1::zeros(d);
    let mut eps = Array1::zeros(d);
    for j in 0..n {
        let row = problem.row(j).to_owned();
        let ax = problem.row(j).dot(x);
        let s_true = sign(ey[j] - ax) as f64;
        let s_est = sign(y[j] - ax) as f64;
        g = &g + &(&row * s_true);
        if problem.is_adversarial(j) {
            g_prime = &g_prime + &(&row * s_est);
        } else {
            g_prime = &g_prime + &(&row * s_true);
            eps = &eps + &(&row * (s_est - s_true));
        }
    }
    let nf = n as f64;
    Decomposition {
        g: g / nf,
        g_prime: g_prime / nf,
        eps: eps / nf,
    }
}

/// `M = a_i sign(y_i - a_i'x) - g' - eps` for a selected worker `i`;
/// zero-mean over the uniform selection.
pub fn martingale_term(
    i: usize,
    x: &Array1<f64>,
    y: &Array1<f64>,
    problem: &SensingProblem,
    dec: &Decomposition,
) -> Array1<f64> {
    let row = problem.row(i);
    let s = sign(y[i] - row.dot(x)) as f64;
    &(&row.to_owned() * s) - &dec.g_prime - &dec.eps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AttackKind;
    use crate::recover::compute_eta_exact;
    use ndarray::{array, Array2};
    use rand_distr::{Distribution, StandardNormal};

    fn demo_problem(sigma: f64, adversaries: &[usize], m: usize) -> SensingProblem {
        SensingProblem::new(
            crate::data::demo_sensing_matrix(),
            crate::data::demo_mean(),
            sigma,
            adversaries.iter().copied().collect(),
            m,
        )
        .unwrap()
    }

    #[test]
    fn objective_values() {
        let a = Array2::eye(2);
        let ey = array![1.0, 2.0];
        assert_eq!(objective_f(&a, &ey, &array![1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(objective_f(&a, &ey, &array![0.0, 0.0]).unwrap(), 1.5);

        // unit move along e1 on the demo matrix: first column is all 2s
        let p = demo_problem(0.0, &[], 0);
        let x = p.mu_true() + &array![1.0, 0.0, 0.0, 0.0];
        let f = objective_f(p.matrix(), &p.expected_y(), &x).unwrap();
        assert!((f - 2.0).abs() < 1e-12);
    }

    #[test]
    fn objective_rejects_mismatch() {
        let a = Array2::eye(2);
        assert!(objective_f(&a, &array![1.0], &array![1.0, 2.0]).is_err());
    }

    #[test]
    fn async_x_move_follows_signed_row() {
        // scalar case: a = 2, y = 3, x = 0, alpha = 0.1 moves to 0.2
        let x = array![0.0];
        let a_i = array![2.0];
        let moved = async_x_target(&x, &a_i.view(), 3.0, 0.1);
        assert!((moved[0] - 0.2).abs() < 1e-15);
        // zero residual leaves x alone
        let still = async_x_target(&array![1.5], &a_i.view(), 3.0, 0.1);
        assert_eq!(still[0], 1.5);
    }

    #[test]
    fn async_y_update_scales_selected_coordinate() {
        let mut y = Array1::from_elem(7, 5.0);
        async_y_update(&mut y, 2, 9.0, 0.5);
        assert_eq!(y[2], 34.0); // 5 + 0.5 (63 - 5)
        for j in (0..7).filter(|j| *j != 2) {
            assert_eq!(y[j], 2.5); // 5 + 0.5 (0 - 5)
        }
    }

    #[test]
    fn sync_x_move_sums_rows() {
        let a = array![[1.0, 0.0], [0.0, 1.0]];
        let x = array![0.0, 0.0];
        let y = array![1.0, -1.0]; // signs (+, -)
        let moved = sync_x_target(&a, &x, &y, 0.1);
        assert!((moved[0] - 0.1).abs() < 1e-15);
        assert!((moved[1] + 0.1).abs() < 1e-15);
        // all residuals zero: x unchanged
        let still = sync_x_target(&a, &x, &array![0.0, 0.0], 0.1);
        assert_eq!(still, x);
    }

    #[test]
    fn sync_y_full_replacement_at_beta_one() {
        let mut y = array![5.0, -2.0];
        sync_y_update(&mut y, &array![1.0, 9.0], 1.0);
        assert_eq!(y, array![1.0, 9.0]);
    }

    #[test]
    fn truth_is_a_fixed_point() {
        // With x at the mean, y at the measurement means, and no noise,
        // the synchronous recursion never moves: reports equal the
        // means, signs are exactly zero.
        let p = demo_problem(0.0, &[], 0);
        let bounds = BoxProjection::cube(0.0, 30.0, 4).unwrap();
        let sched = StepsizeSchedule::DecayDecay;
        let mut streams = TrialStreams::open(&RandomSource::new(1), 7, 0);
        let mut state = EstimatorState::at(p.mu_true().clone(), p.expected_y(), 0);
        for _ in 0..50 {
            sync_step(&mut state, &p, &sched, &bounds, None, &mut streams).unwrap();
            let f = objective_f(p.matrix(), &p.expected_y(), &state.x).unwrap();
            assert_eq!(f, 0.0);
        }
        // The asynchronous y-recursion rescales single-worker reports,
        // so y itself oscillates; the x-update still holds still while
        // the signs are zero.
        let mut state = EstimatorState::at(p.mu_true().clone(), p.expected_y(), 0);
        async_step(&mut state, &p, &sched, &bounds, None, &mut streams).unwrap();
        assert_eq!(state.x, *p.mu_true());
    }

    #[test]
    fn noiseless_run_converges_in_trend() {
        let p = demo_problem(0.0, &[], 0);
        let bounds = BoxProjection::cube(0.0, 30.0, 4).unwrap();
        let traj = run(
            &p,
            Mode::Sync,
            &StepsizeSchedule::DecayDecay,
            &bounds,
            None,
            2000,
            0.5,
            &RandomSource::new(7),
            0,
        )
        .unwrap();
        let early = objective_f(
            p.matrix(),
            &p.expected_y(),
            &traj.tail_average_at(200, 0.5),
        )
        .unwrap();
        assert!(traj.f_tail < early, "{} !< {early}", traj.f_tail);
        assert!(bounds.contains(&traj.tail_x));
    }

    #[test]
    fn honest_y_coordinates_ignore_the_adversary() {
        // bitwise comparison against an adversary-free run at matched
        // seeds, honest coordinates only
        let with = demo_problem(1.0, &[6], 1);
        let without = demo_problem(1.0, &[], 1);
        let attack = AttackSpec::on_all_adversaries(AttackKind::Constant(1e6), &with);
        let bounds = BoxProjection::cube(0.0, 30.0, 4).unwrap();
        let sched = StepsizeSchedule::DecayDecay;
        let source = RandomSource::new(42);

        for mode in [Mode::Async, Mode::Sync] {
            let mut sa = EstimatorState::init(&with, &bounds, 0).unwrap();
            let mut sb = EstimatorState::init(&without, &bounds, 0).unwrap();
            let mut ta = TrialStreams::open(&source, 7, 3);
            let mut tb = TrialStreams::open(&source, 7, 3);
            for _ in 0..500 {
                match mode {
                    Mode::Async => {
                        async_step(&mut sa, &with, &sched, &bounds, Some(&attack), &mut ta)
                            .unwrap();
                        async_step(&mut sb, &without, &sched, &bounds, None, &mut tb).unwrap();
                    }
                    Mode::Sync => {
                        sync_step(&mut sa, &with, &sched, &bounds, Some(&attack), &mut ta)
                            .unwrap();
                        sync_step(&mut sb, &without, &sched, &bounds, None, &mut tb).unwrap();
                    }
                }
                for j in 0..6 {
                    assert_eq!(sa.y[j], sb.y[j], "honest coordinate {j} diverged");
                }
            }
        }
    }

    #[test]
    fn decomposition_identities() {
        let p = demo_problem(1.0, &[6], 1);
        let ey = p.expected_y();
        // y agrees with EY on honest coordinates: eps = 0
        let mut y = ey.clone();
        y[6] = -100.0;
        let x = array![1.0, 2.0, 3.0, 4.0];
        let dec = decomposition(&x, &y, &p);
        assert!(dec.eps.iter().all(|v| *v == 0.0));

        // no adversaries and y = EY: g' = g, eps = 0
        let p0 = demo_problem(1.0, &[], 0);
        let dec0 = decomposition(&x, &ey, &p0);
        assert_eq!(dec0.g, dec0.g_prime);
        assert!(dec0.eps.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn martingale_terms_average_to_zero() {
        // algebraic identity: the uniform average of the drive over the
        // selected worker equals g' + eps exactly
        let p = demo_problem(1.0, &[6], 1);
        let mut rng = RandomSource::new(9).stream(0);
        for _ in 0..20 {
            let x = Array1::from_iter((0..4).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                15.0 + 5.0 * z
            }));
            let y = Array1::from_iter((0..7).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                30.0 * z
            }));
            let dec = decomposition(&x, &y, &p);
            let mut mean = Array1::zeros(4);
            for i in 0..7 {
                mean = &mean + &martingale_term(i, &x, &y, &p, &dec);
            }
            mean /= 7.0;
            assert!(mean.iter().all(|v| v.abs() < 1e-12), "mean {mean:?}");
        }
    }

    #[test]
    fn key_inequalities_hold_on_random_states() {
        // the two inner-product bounds that drive the rate proof,
        // checked directly on 1000 random (x, y, adversarial value)
        // triples against exact constants
        let p = demo_problem(1.0, &[6], 1);
        let rep = compute_eta_exact(p.matrix(), 1).unwrap();
        let k = rep.k;
        let ey = p.expected_y();
        let mu = p.mu_true();
        let mut rng = RandomSource::new(11).stream(0);
        for _ in 0..1000 {
            let x = Array1::from_iter((0..4).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                15.0 + 10.0 * z
            }));
            let y = Array1::from_iter((0..7).map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                ey[j] + 20.0 * z
            }));
            let dec = decomposition(&x, &y, &p);
            let diff = &x - mu;
            let lhs_g = diff.dot(&dec.g_prime);
            let rhs_g = diff.dot(&dec.g) / k;
            assert!(lhs_g <= rhs_g + 1e-12, "{lhs_g} > {rhs_g}");
            let lhs_e = diff.dot(&dec.eps);
            let rhs_e: f64 =
                2.0 / 7.0 * p.honest_workers().map(|j| (y[j] - ey[j]).abs()).sum::<f64>();
            assert!(lhs_e <= rhs_e + 1e-12, "{lhs_e} > {rhs_e}");
        }
    }

    #[test]
    fn subset_mass_inequality_on_certified_matrix() {
        // (K-1) sum_off |a_j'x| >= (K+1) sum_on |a_j'x| for every
        // budget-sized subset, a consequence of the certified margin
        let p = demo_problem(1.0, &[6], 1);
        let k = compute_eta_exact(p.matrix(), 1).unwrap().k;
        let mut rng = RandomSource::new(13).stream(0);
        for _ in 0..500 {
            let x = Array1::from_iter((0..4).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                10.0 * z
            }));
            let mags: Vec<f64> = p
                .matrix()
                .rows()
                .into_iter()
                .map(|r| r.dot(&x).abs())
                .collect();
            let total: f64 = mags.iter().sum();
            for (s, &on) in mags.iter().enumerate() {
                let off = total - on;
                assert!(
                    (k - 1.0) * off >= (k + 1.0) * on - 1e-9,
                    "subset {{{s}}} violates the mass inequality"
                );
            }
        }
    }

    #[test]
    fn objective_is_convex_with_valid_subgradient() {
        let p = demo_problem(1.0, &[], 0);
        let a = p.matrix();
        let ey = p.expected_y();
        let mut rng = RandomSource::new(15).stream(0);
        let rand_x = |rng: &mut crate::rng::StreamRng| {
            Array1::from_iter((0..4).map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                15.0 + 20.0 * z
            }))
        };
        for _ in 0..500 {
            let x = rand_x(&mut rng);
            let z = rand_x(&mut rng);
            let lam: f64 = rng.random();
            let mix = &(&x * lam) + &(&z * (1.0 - lam));
            let fmix = objective_f(a, &ey, &mix).unwrap();
            let fx = objective_f(a, &ey, &x).unwrap();
            let fz = objective_f(a, &ey, &z).unwrap();
            assert!(fmix <= lam * fx + (1.0 - lam) * fz + 1e-12);

            // -g is a subgradient of f at x
            let dec = decomposition(&x, &ey, &p);
            let lin = fx + (-&dec.g).dot(&(&z - &x));
            assert!(fz >= lin - 1e-12);
        }
    }

    #[test]
    fn bound_evaluators_match_formulas() {
        let zero = RateConstants {
            k: 1.0,
            d_x: 0.0,
            a_bar: 0.0,
            c_n: 0.0,
            delta: 0.0,
            e0_y: 0.0,
            eta: 1.0,
            mode: Mode::Async,
            n_workers: 7,
            budget: 1,
        };
        for st in [
            BoundStatement::ConstConst,
            BoundStatement::ConstDecay,
            BoundStatement::DecayDecay,
        ] {
            assert_eq!(theorem_bound(st, &zero, 100, 0.5).unwrap(), 0.0);
        }

        // decaying-statement spot value: all unit constants, r = 1/2,
        // n = 10^4 evaluates to (4 + 6 ln 4) / 50
        let unit = RateConstants {
            k: 1.0,
            d_x: 1.0,
            a_bar: 1.0,
            c_n: 1.0,
            delta: 1.0,
            e0_y: 0.0,
            eta: 1.0,
            mode: Mode::Async,
            n_workers: 7,
            budget: 1,
        };
        let v = theorem_bound(BoundStatement::DecayDecay, &unit, 10_000, 0.5).unwrap();
        let expect = (4.0 + 6.0 * 4f64.ln()) / 50.0;
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.246355).abs() < 1e-6);
    }

    #[test]
    fn bounds_decrease_in_horizon() {
        let consts = RateConstants {
            k: 2.0,
            d_x: 30.0,
            a_bar: 7f64.sqrt(),
            c_n: 4.5,
            delta: 70.0,
            e0_y: 36.0,
            eta: 0.08,
            mode: Mode::Async,
            n_workers: 7,
            budget: 1,
        };
        for st in [
            BoundStatement::ConstConst,
            BoundStatement::ConstDecay,
            BoundStatement::DecayDecay,
        ] {
            let mut prev = f64::INFINITY;
            for exp in 1..8 {
                let n = 10u64.pow(exp);
                let b = theorem_bound(st, &consts, n, 0.5).unwrap();
                assert!(b < prev, "{} not decreasing at n = {n}", st.label());
                prev = b;
            }
        }
    }

    #[test]
    fn bound_statement_minimums_enforced() {
        let consts = RateConstants {
            k: 1.0,
            d_x: 1.0,
            a_bar: 1.0,
            c_n: 1.0,
            delta: 1.0,
            e0_y: 0.0,
            eta: 1.0,
            mode: Mode::Sync,
            n_workers: 2,
            budget: 0,
        };
        assert!(theorem_bound(BoundStatement::ConstConst, &consts, 2, 0.5).is_err());
        assert!(theorem_bound(BoundStatement::DecayDecay, &consts, 1, 0.5).is_err());
        assert!(theorem_bound(BoundStatement::ConstDecay, &consts, 1, 0.5).is_ok());
    }

    #[test]
    fn y_bound_degenerate_cases() {
        // all beta = 1: products vanish, only the last variance term
        // survives
        let b = y_recursion_bound(3.0, 2.0, &[1.0; 5], Mode::Async, 7);
        assert_eq!(b, 7.0 * 4.0);
        let b = y_recursion_bound(3.0, 2.0, &[1.0; 5], Mode::Sync, 7);
        assert_eq!(b, 4.0);

        // no noise: pure geometric decay of the initial error
        let betas = [0.5, 0.25, 0.125];
        let b = y_recursion_bound(3.0, 0.0, &betas, Mode::Sync, 7);
        let prod: f64 = betas.iter().map(|b| (1.0 - b) * (1.0 - b)).product();
        assert!((b - 9.0 * prod).abs() < 1e-15);
    }

    #[test]
    fn y_bound_matches_direct_summation_oracle() {
        // beta_t = 1/(t+1), E0 = 0, sync: closed form Delta^2 / n
        let n = 500;
        let betas: Vec<f64> = (0..n).map(|t| 1.0 / (t as f64 + 1.0)).collect();
        let fast = y_recursion_bound(0.0, 3.0, &betas, Mode::Sync, 7);
        // direct O(n^2) summation
        let mut slow = 0.0;
        for t in 0..n {
            let mut prod = 1.0;
            for &b in &betas[t + 1..n] {
                prod *= (1.0 - b) * (1.0 - b);
            }
            slow += betas[t] * betas[t] * prod;
        }
        slow *= 9.0;
        assert!((fast - slow).abs() < 1e-12);
        assert!((fast - 9.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn rate_constants_from_demo_problem() {
        let p = demo_problem(1.0, &[6], 1);
        let bounds = BoxProjection::cube(0.0, 30.0, 4).unwrap();
        let x0 = bounds.center();
        let eta = crate::data::DEMO_ETA_M1;
        let c = RateConstants::derive(&p, &bounds, &x0, eta, Mode::Async).unwrap();
        assert!((c.a_bar - 7f64.sqrt()).abs() < 1e-12);
        assert!((c.d_x - 30.0).abs() < 1e-12);
        assert!((c.c_n - 2.0 * 6.0 / 7f64.sqrt()).abs() < 1e-12);
        let mu_bar: f64 = 13.58;
        let delta = (4.0 * 7.0 * (1.0 + mu_bar * mu_bar)).sqrt();
        assert!((c.delta - delta).abs() < 1e-9);
        // E0 is the largest honest measurement mean (worker 5 row)
        assert!((c.e0_y - 36.03).abs() < 1e-9);
        let sync = RateConstants::derive(&p, &bounds, &x0, eta, Mode::Sync).unwrap();
        assert!((sync.delta - (4.0f64 * 7.0).sqrt()).abs() < 1e-9);
        assert!((sync.c_n - 12.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn adversarial_problem_without_attack_errors() {
        let p = demo_problem(1.0, &[6], 1);
        let bounds = BoxProjection::cube(0.0, 30.0, 4).unwrap();
        let err = run(
            &p,
            Mode::Async,
            &StepsizeSchedule::DecayDecay,
            &bounds,
            None,
            200,
            0.5,
            &RandomSource::new(1),
            0,
        );
        assert!(err.is_err());
    }
}
