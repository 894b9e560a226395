//! Attack models for corrupt workers.
//!
//! Attacks act on two channels: the measurement channel of the
//! two-timescale algorithm (a scalar report per selection) and the
//! momentum channel of the aggregation baselines. The shipped headline
//! attack places the corrupt worker's update collinear with its own
//! sensing row, scaled to sit near mean-plus-one-standard-deviation of
//! the honest updates so distance-based filters cannot separate it. The
//! adversary is granted a read-only snapshot of the honest updates; its
//! values never touch honest workers' streams.

use crate::error::{Error, Result};
use crate::problem::SensingProblem;
use crate::rng::StreamRng;
use ndarray::{Array1, ArrayView1};
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq)]
pub enum AttackKind {
    /// Collinear-with-own-row attack: scale chosen by least squares
    /// against mean + std of the honest updates.
    Baruch,
    /// Always report the given value.
    Constant(f64),
    /// Report the negation of an honest-style sample.
    SignFlip,
    /// Report `scale * z`, `z` standard Gaussian.
    RandomLarge(f64),
}

#[derive(Debug, Clone)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Workers mounting the attack; must lie inside the problem's
    /// adversary set.
    pub targets: BTreeSet<usize>,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, targets: BTreeSet<usize>, problem: &SensingProblem) -> Result<Self> {
        if !targets.is_subset(problem.adversary_set()) {
            return Err(Error::InvalidArgument(
                "attack targets must be adversarial workers".into(),
            ));
        }
        Ok(Self { kind, targets })
    }

    /// The given kind on every adversarial worker of the problem.
    pub fn on_all_adversaries(kind: AttackKind, problem: &SensingProblem) -> Self {
        Self {
            kind,
            targets: problem.adversary_set().clone(),
        }
    }

    pub fn applies_to(&self, worker: usize) -> bool {
        self.targets.contains(&worker)
    }

    pub fn descriptor(&self) -> String {
        match &self.kind {
            AttackKind::Baruch => "baruch-y".to_string(),
            AttackKind::Constant(v) => format!("constant({v})"),
            AttackKind::SignFlip => "sign_flip".to_string(),
            AttackKind::RandomLarge(s) => format!("random_large({s})"),
        }
    }
}

/// Least-squares scale `c = a_w'(mu_hat + sigma_hat) / ||a_w||^2`,
/// where `mu_hat` and `sigma_hat` are the coordinate-wise mean and
/// population standard deviation of the honest updates.
pub fn baruch_scale(a_w: &ArrayView1<f64>, honest_momenta: &[Array1<f64>]) -> Result<f64> {
    let norm_sq = a_w.dot(a_w);
    if norm_sq == 0.0 {
        return Err(Error::InvalidArgument(
            "attack target has a zero sensing row".into(),
        ));
    }
    if honest_momenta.is_empty() {
        return Err(Error::InvalidArgument("no honest updates to imitate".into()));
    }
    let d = a_w.len();
    let count = honest_momenta.len() as f64;
    let mut mean = Array1::<f64>::zeros(d);
    for v in honest_momenta {
        mean = &mean + v;
    }
    mean /= count;
    let mut var = Array1::<f64>::zeros(d);
    for v in honest_momenta {
        let diff = v - &mean;
        var = &var + &(&diff * &diff);
    }
    var /= count;
    let target = &mean + &var.mapv(f64::sqrt);
    Ok(a_w.dot(&target) / norm_sq)
}

/// Snapshot the attack may read when producing one value.
pub struct AttackContext<'a> {
    pub x: &'a Array1<f64>,
    /// Honest updates visible to the adversary: actual momenta in the
    /// baseline pipeline, gradient-style terms `a_j (a_j'x - y_j)` for
    /// the measurement channel.
    pub honest_momenta: &'a [Array1<f64>],
    pub worker: usize,
    pub problem: &'a SensingProblem,
}

/// Measurement-channel value reported by an attacking worker: the
/// collinear attack returns `Y = a_w'x - c`, which turns the gradient
/// form `a_w (a_w'x - Y)` into `c a_w`.
pub fn attack_measurement(
    spec: &AttackSpec,
    ctx: &AttackContext<'_>,
    rng: &mut StreamRng,
) -> Result<f64> {
    if !spec.applies_to(ctx.worker) {
        return Err(Error::InvalidArgument(format!(
            "worker {} is not an attack target",
            ctx.worker
        )));
    }
    let a_w = ctx.problem.row(ctx.worker);
    match &spec.kind {
        AttackKind::Baruch => {
            let c = baruch_scale(&a_w, ctx.honest_momenta)?;
            Ok(a_w.dot(ctx.x) - c)
        }
        AttackKind::Constant(v) => Ok(*v),
        AttackKind::SignFlip => {
            let draw = ctx
                .problem
                .noise()
                .sample_x(ctx.problem.mu_true(), ctx.problem.sigma(), rng);
            Ok(-a_w.dot(&draw))
        }
        AttackKind::RandomLarge(scale) => {
            let z: f64 = StandardNormal.sample(rng);
            Ok(scale * z)
        }
    }
}

/// Extra state the baseline channel exposes: the attack controls only
/// the scalar report, which reaches the momentum through the y-update
/// `y_new = (1 - beta) y + beta * y_scale * Y` and then the gradient.
pub struct BaselineAttackContext<'a> {
    pub base: AttackContext<'a>,
    pub gamma: f64,
    pub beta: f64,
    /// Multiplier on the report inside the y-update (worker count when
    /// the async server rescales single-worker reports, 1 otherwise).
    pub y_scale: f64,
    /// Current `y(w)` before the update.
    pub y_current: f64,
    /// Worker w's momentum from the previous iteration.
    pub m_prev: &'a Array1<f64>,
}

pub struct BaselineAttack {
    pub y_value: f64,
    /// Set when the attack pins the momentum exactly (collinear attack
    /// with no momentum mixing); the pipeline installs it verbatim.
    pub momentum_override: Option<Array1<f64>>,
}

pub fn attack_baseline(
    spec: &AttackSpec,
    ctx: &BaselineAttackContext<'_>,
    rng: &mut StreamRng,
) -> Result<BaselineAttack> {
    let worker = ctx.base.worker;
    if !spec.applies_to(worker) {
        return Err(Error::InvalidArgument(format!(
            "worker {worker} is not an attack target"
        )));
    }
    let a_w = ctx.base.problem.row(worker);
    match &spec.kind {
        AttackKind::Baruch => {
            let c = baruch_scale(&a_w, ctx.base.honest_momenta)?;
            let ax = a_w.dot(ctx.base.x);
            if ctx.gamma == 0.0 {
                // Gradient equals the momentum: pick Y so the updated
                // y(w) makes it exactly c * a_w.
                let y_new = ax - c;
                let y_value = (y_new - (1.0 - ctx.beta) * ctx.y_current) / (ctx.beta * ctx.y_scale);
                Ok(BaselineAttack {
                    y_value,
                    momentum_override: Some(&a_w.to_owned() * c),
                })
            } else {
                // One scalar degree of freedom: least-squares closest
                // momentum to c * a_w along the achievable line.
                let u = &(ctx.m_prev * ctx.gamma)
                    + &(&a_w.to_owned() * ((1.0 - ctx.gamma) * (ax - (1.0 - ctx.beta) * ctx.y_current)));
                let v = &a_w.to_owned() * (-(1.0 - ctx.gamma) * ctx.beta * ctx.y_scale);
                let vv = v.dot(&v);
                let y_value = if vv > 1e-18 {
                    let target = &(&a_w.to_owned() * c) - &u;
                    v.dot(&target) / vv
                } else {
                    ax - c
                };
                Ok(BaselineAttack {
                    y_value,
                    momentum_override: None,
                })
            }
        }
        AttackKind::Constant(v) => Ok(BaselineAttack {
            y_value: *v,
            momentum_override: None,
        }),
        AttackKind::SignFlip => {
            let draw = ctx
                .base
                .problem
                .noise()
                .sample_x(ctx.base.problem.mu_true(), ctx.base.problem.sigma(), rng);
            Ok(BaselineAttack {
                y_value: -a_w.dot(&draw),
                momentum_override: None,
            })
        }
        AttackKind::RandomLarge(scale) => {
            let z: f64 = StandardNormal.sample(rng);
            Ok(BaselineAttack {
                y_value: scale * z,
                momentum_override: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;
    use ndarray::array;

    fn demo_problem() -> SensingProblem {
        SensingProblem::new(
            crate::data::demo_sensing_matrix(),
            crate::data::demo_mean(),
            1.0,
            [6].into_iter().collect(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn scale_fits_exactly_when_target_is_own_row() {
        // one honest update equal to a_w: mean = a_w, std = 0, c = 1
        let a_w = array![2.0, 1.0, 1.0, 1.0];
        let c = baruch_scale(&a_w.view(), std::slice::from_ref(&a_w)).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scale_is_zero_for_orthogonal_target() {
        let a_w = array![1.0, 0.0];
        let c = baruch_scale(&a_w.view(), &[array![0.0, 5.0]]).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn scale_closed_form() {
        // mean + std = (7, 0, 0, 0) against a_w = (2, 1, 1, 1)
        let a_w = array![2.0, 1.0, 1.0, 1.0];
        let c = baruch_scale(&a_w.view(), &[array![7.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!((c - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scale_is_inverse_equivariant() {
        let a_w = array![2.0, 1.0, 1.0, 1.0];
        let momenta = vec![array![1.0, 2.0, 3.0, 4.0], array![0.0, 1.0, -1.0, 2.0]];
        let c = baruch_scale(&a_w.view(), &momenta).unwrap();
        for lambda in [2.0, -3.0, 0.25] {
            let scaled = &a_w * lambda;
            let cl = baruch_scale(&scaled.view(), &momenta).unwrap();
            assert!((cl - c / lambda).abs() < 1e-12, "lambda = {lambda}");
        }
    }

    #[test]
    fn zero_row_rejected() {
        let z = array![0.0, 0.0];
        assert!(baruch_scale(&z.view(), &[array![1.0, 1.0]]).is_err());
    }

    #[test]
    fn measurement_attack_turns_gradient_collinear() {
        // c = 2 against x = 0 gives Y = -2
        let problem = demo_problem();
        let spec = AttackSpec::on_all_adversaries(AttackKind::Baruch, &problem);
        let x = Array1::zeros(4);
        // honest snapshot engineered so mu_hat + sigma_hat = (7,0,0,0)
        let momenta = vec![array![7.0, 0.0, 0.0, 0.0]];
        let ctx = AttackContext {
            x: &x,
            honest_momenta: &momenta,
            worker: 6,
            problem: &problem,
        };
        let mut rng = RandomSource::new(0).stream(6);
        let y = attack_measurement(&spec, &ctx, &mut rng).unwrap();
        assert!((y + 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_attack_reports_constant() {
        let problem = demo_problem();
        let spec = AttackSpec::on_all_adversaries(AttackKind::Constant(0.0), &problem);
        let x = Array1::zeros(4);
        let ctx = AttackContext {
            x: &x,
            honest_momenta: &[],
            worker: 6,
            problem: &problem,
        };
        let mut rng = RandomSource::new(0).stream(6);
        for _ in 0..3 {
            assert_eq!(attack_measurement(&spec, &ctx, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn baseline_attack_with_no_mixing_is_exactly_collinear() {
        let problem = demo_problem();
        let spec = AttackSpec::on_all_adversaries(AttackKind::Baruch, &problem);
        let x = array![1.0, 2.0, 3.0, 4.0];
        let momenta = vec![array![3.0, 1.0, 0.0, 2.0], array![-1.0, 0.5, 2.0, 0.0]];
        let m_prev = Array1::zeros(4);
        let ctx = BaselineAttackContext {
            base: AttackContext {
                x: &x,
                honest_momenta: &momenta,
                worker: 6,
                problem: &problem,
            },
            gamma: 0.0,
            beta: 0.25,
            y_scale: 7.0,
            y_current: 5.0,
            m_prev: &m_prev,
        };
        let mut rng = RandomSource::new(0).stream(6);
        let out = attack_baseline(&spec, &ctx, &mut rng).unwrap();
        let c = baruch_scale(&problem.row(6), &momenta).unwrap();
        let over = out.momentum_override.expect("gamma 0 pins the momentum");
        let expect = &problem.row(6).to_owned() * c;
        assert_eq!(over, expect);
        // the reported value reproduces the same momentum through the
        // y-update and gradient
        let y_new = (1.0 - 0.25) * 5.0 + 0.25 * 7.0 * out.y_value;
        let grad = &problem.row(6).to_owned() * (problem.row(6).dot(&x) - y_new);
        for (g, e) in grad.iter().zip(expect.iter()) {
            assert!((g - e).abs() < 1e-9);
        }
    }

    #[test]
    fn baseline_attack_with_mixing_takes_least_squares_report() {
        let problem = demo_problem();
        let spec = AttackSpec::on_all_adversaries(AttackKind::Baruch, &problem);
        let x = array![1.0, 2.0, 3.0, 4.0];
        let momenta = vec![array![3.0, 1.0, 0.0, 2.0]];
        let m_prev = array![0.5, -0.5, 1.0, 0.0];
        let gamma = 0.4;
        let beta = 0.25;
        let ctx = BaselineAttackContext {
            base: AttackContext {
                x: &x,
                honest_momenta: &momenta,
                worker: 6,
                problem: &problem,
            },
            gamma,
            beta,
            y_scale: 1.0,
            y_current: 5.0,
            m_prev: &m_prev,
        };
        let mut rng = RandomSource::new(0).stream(6);
        let out = attack_baseline(&spec, &ctx, &mut rng).unwrap();
        assert!(out.momentum_override.is_none());
        // verify first-order optimality of Y by probing neighbors
        let c = baruch_scale(&problem.row(6), &momenta).unwrap();
        let target = &problem.row(6).to_owned() * c;
        let mom_of = |yv: f64| {
            let y_new = (1.0 - beta) * 5.0 + beta * yv;
            let grad = &problem.row(6).to_owned() * (problem.row(6).dot(&x) - y_new);
            &(&m_prev * gamma) + &(&grad * (1.0 - gamma))
        };
        let dist = |yv: f64| {
            let diff = &mom_of(yv) - &target;
            diff.dot(&diff)
        };
        let at = dist(out.y_value);
        assert!(at <= dist(out.y_value + 1e-3) + 1e-12);
        assert!(at <= dist(out.y_value - 1e-3) + 1e-12);
    }

    #[test]
    fn targets_must_be_adversarial() {
        let problem = demo_problem();
        assert!(AttackSpec::new(
            AttackKind::Baruch,
            [0].into_iter().collect(),
            &problem
        )
        .is_err());
    }
}
