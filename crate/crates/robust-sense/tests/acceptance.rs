//! Acceptance suite: one test per exit criterion, each printing a
//! PASS line (visible with `cargo test -- --nocapture`). Every
//! tolerance is pinned here.

use ndarray::{array, Array1, Array2};
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use robust_sense::adversary::{AttackKind, AttackSpec};
use robust_sense::aggregators::{
    aggregate, bucketing_aggregate, geometric_median, run_baseline, AggregationRule,
    AggregatorSpec, BaselineXSchedule, Wrapper,
};
use robust_sense::data;
use robust_sense::estimator::{
    async_step, decomposition, objective_f, run, sync_step, theorem_bound, y_recursion_bound,
    BoundStatement, EstimatorState, Mode, RateConstants,
};
use robust_sense::harness::{self, fit_rate, parse_config, rate_grid};
use robust_sense::linalg::l2_norm;
use robust_sense::problem::{project_box, BoxProjection, SensingProblem};
use robust_sense::recover::{
    check_a2_prime, compute_eta_exact, l1_fit, PartialStructure,
};
use robust_sense::rng::{RandomSource, TrialStreams};
use robust_sense::schedule::StepsizeSchedule;
use std::collections::BTreeSet;

fn demo_problem(sigma: f64) -> SensingProblem {
    SensingProblem::new(
        data::demo_sensing_matrix(),
        data::demo_mean(),
        sigma,
        [6].into_iter().collect(),
        1,
    )
    .unwrap()
}

fn demo_box() -> BoxProjection {
    BoxProjection::cube(0.0, 30.0, 4).unwrap()
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

const STATEMENTS: [BoundStatement; 3] = [
    BoundStatement::ConstConst,
    BoundStatement::ConstDecay,
    BoundStatement::DecayDecay,
];

/// Criterion 1: on the bundled problem (sigma scaled to 1), the mean
/// tail objective over 50 seeded trials stays below the evaluated rate
/// bound at n in {1e2, 1e3, 1e4}, for all three statements and both
/// modes, with 3 SE Monte-Carlo slack.
#[test]
fn criterion_1_theorem_bound_soundness() {
    let problem = demo_problem(1.0);
    let bounds = demo_box();
    let attack = AttackSpec::on_all_adversaries(AttackKind::Baruch, &problem);
    let eta = compute_eta_exact(problem.matrix(), 1).unwrap().eta;
    let source = RandomSource::new(1);
    let trials = 50u64;
    let r = 0.5;

    for mode in [Mode::Sync, Mode::Async] {
        let consts =
            RateConstants::derive(&problem, &bounds, &bounds.center(), eta, mode).unwrap();
        for st in STATEMENTS {
            for n in [100u64, 1000, 10_000] {
                let sched = st.schedule(n, r).unwrap();
                let finals: Vec<f64> = (0..trials)
                    .map(|trial| {
                        run(
                            &problem,
                            mode,
                            &sched,
                            &bounds,
                            Some(&attack),
                            n,
                            r,
                            &source,
                            trial,
                        )
                        .unwrap()
                        .f_tail
                    })
                    .collect();
                let (mean, se) = mean_se(&finals);
                let bound = theorem_bound(st, &consts, n, r).unwrap();
                assert!(
                    mean <= bound + 3.0 * se,
                    "{} {} n={n}: mean {mean} exceeds bound {bound} (+3se {})",
                    mode.label(),
                    st.label(),
                    3.0 * se
                );
            }
        }
    }
    println!("criterion 1 (theorem-bound soundness, 3 statements x 2 modes x 3 horizons): PASS");
}

/// Criterion 2: fitted log-log slope of the mean tail objective over
/// the geometric grid lies in [-0.65, -0.35] for statements 2 and 3 and
/// in [-0.70, -0.30] for statement 1 (synchronous runs, 50 trials).
#[test]
fn criterion_2_rate_order() {
    let problem = demo_problem(1.0);
    let bounds = demo_box();
    let attack = AttackSpec::on_all_adversaries(AttackKind::Baruch, &problem);
    let source = RandomSource::new(1);
    let trials = 50u64;
    let grid = rate_grid(10_000);
    assert_eq!(grid.len(), 5);

    for st in STATEMENTS {
        let mut pts = Vec::new();
        for &n in &grid {
            let sched = st.schedule(n, 0.5).unwrap();
            let mean: f64 = (0..trials)
                .map(|trial| {
                    run(
                        &problem,
                        Mode::Sync,
                        &sched,
                        &bounds,
                        Some(&attack),
                        n,
                        0.5,
                        &source,
                        trial,
                    )
                    .unwrap()
                    .f_tail
                })
                .sum::<f64>()
                / trials as f64;
            pts.push((n as f64, mean));
        }
        let fit = fit_rate(&pts).unwrap();
        let (lo, hi) = match st {
            BoundStatement::ConstConst => (-0.70, -0.30),
            _ => (-0.65, -0.35),
        };
        assert!(
            fit.slope >= lo && fit.slope <= hi,
            "{}: slope {} outside [{lo}, {hi}]",
            st.label(),
            fit.slope
        );
    }
    println!("criterion 2 (rate order on the geometric grid): PASS");
}

/// Criterion 3: both inner-product inequalities of the key lemma hold
/// on 1e4 randomized (x, y, adversarial-value) triples for each of
/// three certified matrices, with zero violations beyond 1e-12.
#[test]
fn criterion_3_lemma_inequalities() {
    let start = std::time::Instant::now();
    let matrices: Vec<(Array2<f64>, Array1<f64>)> = vec![
        (data::demo_sensing_matrix(), data::demo_mean()),
        (&data::demo_sensing_matrix() * 0.5, data::demo_mean()),
        (
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0], [2.0, 1.0]],
            array![3.0, -2.0],
        ),
    ];
    let mut rng = RandomSource::new(5).stream(0);
    for (a, mu) in matrices {
        let n = a.nrows();
        let d = a.ncols();
        let adversary = n - 1;
        let rep = compute_eta_exact(&a, 1).unwrap();
        assert!(rep.holds_a2, "lemma matrix must be certified");
        let k = rep.k;
        let problem = SensingProblem::new(
            a.clone(),
            mu.clone(),
            1.0,
            [adversary].into_iter().collect(),
            1,
        )
        .unwrap();
        let ey = problem.expected_y();
        for _ in 0..10_000 {
            let x = Array1::from_iter((0..d).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                20.0 * z
            }));
            let mut y = Array1::from_iter((0..n).map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                ey[j] + 15.0 * z
            }));
            // arbitrary adversarial value, occasionally enormous
            let z: f64 = StandardNormal.sample(&mut rng);
            y[adversary] = 1e4 * z;
            let dec = decomposition(&x, &y, &problem);
            let diff = &x - &mu;
            let lhs_g = diff.dot(&dec.g_prime);
            let rhs_g = diff.dot(&dec.g) / k;
            assert!(lhs_g <= rhs_g + 1e-12, "corruption bound: {lhs_g} > {rhs_g}");
            let lhs_e = diff.dot(&dec.eps);
            let rhs_e = 2.0 / n as f64
                * problem
                    .honest_workers()
                    .map(|j| (y[j] - ey[j]).abs())
                    .sum::<f64>();
            assert!(lhs_e <= rhs_e + 1e-12, "estimation bound: {lhs_e} > {rhs_e}");
        }
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 10.0, "lemma suite took {secs:.1}s");
    println!("criterion 3 (lemma inequalities, 3e4 triples): PASS in {secs:.2}s");
}

/// Criterion 4: Monte-Carlo mean-square honest-coordinate error of the
/// measurement-mean recursion stays below its bound at n in
/// {1e2, 1e3, 1e4}, for constant and 1/(t+1) beta schedules and both
/// modes, 200 trials, no violation beyond 3 SE.
#[test]
fn criterion_4_y_recursion_bound() {
    let problem = demo_problem(1.0);
    let bounds = demo_box();
    let attack = AttackSpec::on_all_adversaries(AttackKind::Baruch, &problem);
    let source = RandomSource::new(9);
    let trials = 200u64;
    let ey = problem.expected_y();
    let honest: Vec<usize> = problem.honest_workers().collect();

    for mode in [Mode::Sync, Mode::Async] {
        let consts = RateConstants::derive(
            &problem,
            &bounds,
            &bounds.center(),
            data::DEMO_ETA_M1,
            mode,
        )
        .unwrap();
        for constant_beta in [true, false] {
            for n in [100u64, 1000, 10_000] {
                let sched = if constant_beta {
                    StepsizeSchedule::const_const(n, 0.5).unwrap()
                } else {
                    StepsizeSchedule::DecayDecay
                };
                let betas: Vec<f64> = (0..n).map(|t| sched.beta_at(t)).collect();
                let bound = y_recursion_bound(
                    consts.e0_y,
                    consts.delta,
                    &betas,
                    mode,
                    problem.n_workers(),
                );
                // per-coordinate squared errors over trials
                let mut sq: Vec<Vec<f64>> = vec![Vec::with_capacity(trials as usize); honest.len()];
                for trial in 0..trials {
                    let mut streams = TrialStreams::open(&source, problem.n_workers(), trial);
                    let mut state = EstimatorState::init(&problem, &bounds, 0).unwrap();
                    for _ in 0..n {
                        match mode {
                            Mode::Async => async_step(
                                &mut state,
                                &problem,
                                &sched,
                                &bounds,
                                Some(&attack),
                                &mut streams,
                            )
                            .unwrap(),
                            Mode::Sync => sync_step(
                                &mut state,
                                &problem,
                                &sched,
                                &bounds,
                                Some(&attack),
                                &mut streams,
                            )
                            .unwrap(),
                        }
                    }
                    for (ix, &j) in honest.iter().enumerate() {
                        let e = state.y[j] - ey[j];
                        sq[ix].push(e * e);
                    }
                }
                for (ix, &j) in honest.iter().enumerate() {
                    let (mean, se) = mean_se(&sq[ix]);
                    assert!(
                        mean <= bound + 3.0 * se,
                        "{} beta-{} n={n} worker {j}: {mean} > bound {bound} (+3se {})",
                        mode.label(),
                        if constant_beta { "const" } else { "decay" },
                        3.0 * se
                    );
                }
            }
        }
    }
    println!("criterion 4 (measurement-mean recursion bound, 2 modes x 2 schedules x 3 horizons): PASS");
}

/// Criterion 5: on the bundled 5x2 instance with q = 1, the fitted
/// component equals the truth to 1e-8 for all 5 supports x 20 random
/// magnitudes x 10 random truths, and a 2-sparse counterexample moves
/// the component.
#[test]
fn criterion_5_partial_recovery_exactness() {
    let start = std::time::Instant::now();
    let a = data::partial_recovery_matrix();
    let u = data::partial_recovery_u();
    let v = data::partial_recovery_v();
    let mut rng = RandomSource::new(17).stream(0);

    for support in 0..5 {
        for _ in 0..20 {
            let magnitude: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                10.0 * z
            };
            for _ in 0..10 {
                let alpha_true: f64 = {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    5.0 * z
                };
                let beta_true: f64 = {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    5.0 * z
                };
                let mu = Array1::from_iter(
                    (&u * alpha_true + &v * beta_true).iter().copied(),
                );
                let mut y = a.dot(&mu);
                y[support] += magnitude;
                let fit = l1_fit(&a, &u, &v, &y).unwrap();
                assert!(
                    (fit.alpha[0] - alpha_true).abs() <= 1e-8,
                    "support {support}: recovered {} vs true {alpha_true}",
                    fit.alpha[0]
                );
            }
        }
    }

    // beyond the budget: 2-sparse corruption, true component 0
    let y = array![1.0, 0.0, 0.0, 2.0, 0.0];
    let fit = l1_fit(&a, &u, &v, &y).unwrap();
    assert!(
        fit.alpha[0].abs() > 1e-6,
        "expected a counterexample, recovered {}",
        fit.alpha[0]
    );
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 5.0, "partial recovery suite took {secs:.1}s");
    println!("criterion 5 (partial recovery exactness, 1000 fits + counterexample): PASS in {secs:.2}s");
}

/// Criterion 6: exact margins match the dense grid oracle on the 2x2
/// identity; the bundled matrix certifies at budget 1; the 5x2 instance
/// fails the full condition but passes the partial one.
#[test]
fn criterion_6_recoverability_certification() {
    // dense grid oracle over the unit circle
    let grid_eta = |a: &Array2<f64>, m: usize| -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..100_000 {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / 1e5;
            let x = array![theta.cos(), theta.sin()];
            let mut mags: Vec<f64> =
                a.rows().into_iter().map(|row| row.dot(&x).abs()).collect();
            let total: f64 = mags.iter().sum();
            mags.sort_by(|p, q| q.partial_cmp(p).unwrap());
            let top: f64 = mags.iter().take(m).sum();
            best = best.min(total - 2.0 * top);
        }
        best / a.nrows() as f64
    };

    let eye = Array2::eye(2);
    let r0 = compute_eta_exact(&eye, 0).unwrap();
    assert!((r0.eta - 0.5).abs() < 1e-9);
    assert!((r0.eta - grid_eta(&eye, 0)).abs() < 1e-6);
    let r1 = compute_eta_exact(&eye, 1).unwrap();
    assert!((r1.eta + 0.5).abs() < 1e-9);
    assert!((r1.eta - grid_eta(&eye, 1)).abs() < 1e-6);
    assert!(!r1.holds_a2);

    let demo = compute_eta_exact(&data::demo_sensing_matrix(), 1).unwrap();
    assert!(demo.holds_a2);
    assert!((demo.eta - data::DEMO_ETA_M1).abs() < 1e-9);

    let partial = data::partial_recovery_matrix();
    let full = compute_eta_exact(&partial, 1).unwrap();
    assert!(!full.holds_a2, "5x2 instance must fail the full condition");
    let st = PartialStructure::new(data::partial_recovery_u(), data::partial_recovery_v(), 1)
        .unwrap();
    let rep = check_a2_prime(&partial, &st).unwrap();
    assert!(rep.holds && rep.certified, "5x2 instance must pass at q = 1");
    println!("criterion 6 (recoverability certification incl. grid oracle): PASS");
}

/// Criterion 7: the composed path-times-structure matrix equals the
/// bundled one entry-exactly and the demo's component error decreases
/// in trend, ending below 10% of the initial error at n = 1e4, sigma 1.
#[test]
fn criterion_7_tomography_pipeline() {
    let composed = robust_sense::recover::compose_tomography(
        &data::demo_path_matrix(),
        &data::demo_structure_matrix(),
    )
    .unwrap();
    assert_eq!(composed, data::demo_sensing_matrix());

    let report = harness::tomography_demo(10_000, 10, 1, 1.0).unwrap();
    assert!(report.eta.holds_a2);
    let pts: Vec<(f64, f64)> = report
        .checkpoints
        .iter()
        .map(|(g, e)| (*g as f64, *e))
        .collect();
    let fit = fit_rate(&pts).unwrap();
    assert!(fit.slope < 0.0, "error trend not decreasing: {}", fit.slope);
    assert!(
        report.final_initial_ratio < 0.10,
        "final/initial = {}",
        report.final_initial_ratio
    );
    println!(
        "criterion 7 (tomography pipeline, final/initial = {:.3}): PASS",
        report.final_initial_ratio
    );
}

/// Criterion 8: under the asynchronous high-heterogeneity configuration
/// with the collinear attack, the estimator's final mean error over 10
/// trials is strictly lower than every implemented baseline's.
#[test]
fn criterion_8_method_comparison() {
    let start = std::time::Instant::now();
    let a = &data::demo_sensing_matrix() * 10.0;
    let problem =
        SensingProblem::new(a, data::demo_mean(), 100.0, [6].into_iter().collect(), 1).unwrap();
    let bounds = BoxProjection::cube(0.0, 300.0, 4).unwrap();
    let attack = AttackSpec::on_all_adversaries(AttackKind::Baruch, &problem);
    let source = RandomSource::new(1);
    let (n, trials) = (10_000u64, 10u64);

    let estimator_err: f64 = (0..trials)
        .map(|trial| {
            *run(
                &problem,
                Mode::Async,
                &StepsizeSchedule::DecayDecay,
                &bounds,
                Some(&attack),
                n,
                0.5,
                &source,
                trial,
            )
            .unwrap()
            .err_x
            .last()
            .unwrap()
        })
        .sum::<f64>()
        / trials as f64;

    for rule in [
        AggregationRule::Krum,
        AggregationRule::CoordinateMedian,
        AggregationRule::TrimmedMean,
        AggregationRule::GeometricMedian,
        AggregationRule::RageApprox,
    ] {
        let spec = AggregatorSpec::experiment_defaults(
            rule,
            Wrapper::Buffered { s: 3 },
            problem.budget(),
            Mode::Async,
        )
        .unwrap();
        let baseline_err: f64 = (0..trials)
            .map(|trial| {
                *run_baseline(
                    &problem,
                    &spec,
                    Mode::Async,
                    BaselineXSchedule::Sqrt,
                    &bounds,
                    Some(&attack),
                    n,
                    0.5,
                    &source,
                    trial,
                )
                .unwrap()
                .err_x
                .last()
                .unwrap()
            })
            .sum::<f64>()
            / trials as f64;
        assert!(
            estimator_err < baseline_err,
            "estimator {estimator_err} not strictly below {} {baseline_err}",
            rule.label()
        );
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 600.0, "comparison took {secs:.0}s");
    println!(
        "criterion 8 (estimator beats every baseline under attack, {:.1}s): PASS",
        secs
    );
}

/// Criterion 9: the cross-module property suite (projection,
/// convexity, aggregator invariances, bucketing degeneracy,
/// determinism).
#[test]
fn criterion_9_property_suites() {
    let mut rng = RandomSource::new(23).stream(0);

    // projection non-expansiveness over 1000 pairs
    let bounds = BoxProjection::new(array![-2.0, 0.0, 1.0], array![5.0, 0.5, 9.0]).unwrap();
    for _ in 0..1000 {
        let x = Array1::from_iter((0..3).map(|_| rng.random_range(-30.0..30.0)));
        let y = Array1::from_iter((0..3).map(|_| rng.random_range(-30.0..30.0)));
        let px = project_box(&x, &bounds).unwrap();
        let py = project_box(&y, &bounds).unwrap();
        assert!(l2_norm(&(&px - &py)) <= l2_norm(&(&x - &y)) + 1e-15);
    }

    // objective convexity and subgradient validity
    let problem = demo_problem(1.0);
    let a = problem.matrix();
    let ey = problem.expected_y();
    let clean = SensingProblem::new(
        data::demo_sensing_matrix(),
        data::demo_mean(),
        1.0,
        BTreeSet::new(),
        0,
    )
    .unwrap();
    for _ in 0..1000 {
        let x = Array1::from_iter((0..4).map(|_| rng.random_range(-40.0..40.0)));
        let z = Array1::from_iter((0..4).map(|_| rng.random_range(-40.0..40.0)));
        let lam: f64 = rng.random();
        let mix = &(&x * lam) + &(&z * (1.0 - lam));
        let fx = objective_f(a, &ey, &x).unwrap();
        let fz = objective_f(a, &ey, &z).unwrap();
        let fmix = objective_f(a, &ey, &mix).unwrap();
        assert!(fmix <= lam * fx + (1.0 - lam) * fz + 1e-12, "convexity");
        let dec = decomposition(&x, &ey, &clean);
        assert!(
            fz >= fx + (-&dec.g).dot(&(&z - &x)) - 1e-12,
            "subgradient validity"
        );
    }

    // aggregator permutation/translation invariance
    let base: Vec<Array1<f64>> = (0..7)
        .map(|_| Array1::from_iter((0..3).map(|_| rng.random_range(-5.0..5.0))))
        .collect();
    let mut permuted = base.clone();
    permuted.reverse();
    permuted.swap(2, 5);
    let shift = array![4.0, -1.0, 0.5];
    for rule in [
        AggregationRule::CoordinateMedian,
        AggregationRule::TrimmedMean,
        AggregationRule::GeometricMedian,
    ] {
        let out = aggregate(rule, &base, 1).unwrap();
        let out_p = aggregate(rule, &permuted, 1).unwrap();
        let shifted: Vec<Array1<f64>> = base.iter().map(|v| v + &shift).collect();
        let out_s = aggregate(rule, &shifted, 1).unwrap();
        for k in 0..3 {
            assert!((out[k] - out_p[k]).abs() < 1e-9, "permutation invariance");
            assert!(
                (out_s[k] - (out[k] + shift[k])).abs() < 1e-9,
                "translation equivariance"
            );
        }
    }
    let krum_out = aggregate(AggregationRule::Krum, &base, 1).unwrap();
    let krum_p = aggregate(AggregationRule::Krum, &permuted, 1).unwrap();
    assert_eq!(krum_out, krum_p, "krum permutation invariance up to ties");

    // Weiszfeld objective is non-increasing
    let (_, trace) = geometric_median(&base);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "weiszfeld monotonicity");
    }

    // whole-population bucket reduces to the plain mean for every rule
    let mut server = RandomSource::new(31).stream(1);
    let mut mean = Array1::<f64>::zeros(3);
    for v in &base {
        mean = &mean + v;
    }
    mean /= base.len() as f64;
    for rule in [
        AggregationRule::Krum,
        AggregationRule::CoordinateMedian,
        AggregationRule::TrimmedMean,
        AggregationRule::GeometricMedian,
        AggregationRule::RageApprox,
    ] {
        let out = bucketing_aggregate(rule, &base, base.len(), 1, &mut server).unwrap();
        for k in 0..3 {
            assert!((out[k] - mean[k]).abs() < 1e-12, "s = N bucketing");
        }
    }

    // experiment determinism: identical configs, identical bytes
    let tmp = tempfile::tempdir().unwrap();
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let text = format!(
        "problem.a = {0}/demo_A.txt\nproblem.mu = {0}/demo_mu.txt\nproblem.sigma = 1\nproblem.m = 1\nproblem.adversaries = 6\nattack.kind = baruch\nrun.mode = async\nrun.method = estimator\nrun.n = 400\nrun.trials = 4\nrun.seed = 3\nbox.lo = 0,0,0,0\nbox.hi = 30,30,30,30\n",
        dir.display()
    );
    let mut cfg = parse_config(&text, "inline", tmp.path()).unwrap();
    let out_a = tmp.path().join("a.csv");
    let out_b = tmp.path().join("b.csv");
    cfg.output = Some(out_a.clone());
    harness::run_experiment(&cfg).unwrap();
    cfg.output = Some(out_b.clone());
    harness::run_experiment(&cfg).unwrap();
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap(),
        "experiment determinism"
    );

    println!("criterion 9 (property suites): PASS");
}
