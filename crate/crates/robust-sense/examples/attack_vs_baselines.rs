//! Compact method comparison in the asynchronous high-heterogeneity
//! setting: the two-timescale estimator against every buffered
//! robust-aggregation baseline, all facing the collinear attack.
//!
//!     cargo run --release --example attack_vs_baselines

use robust_sense::adversary::{AttackKind, AttackSpec};
use robust_sense::aggregators::{
    run_baseline, AggregationRule, AggregatorSpec, BaselineXSchedule, Wrapper,
};
use robust_sense::data;
use robust_sense::estimator::{run, Mode};
use robust_sense::problem::{BoxProjection, SensingProblem};
use robust_sense::rng::RandomSource;
use robust_sense::schedule::StepsizeSchedule;

fn main() {
    // sensing rows scaled by 10: high heterogeneity, wide box
    let a = &data::demo_sensing_matrix() * 10.0;
    let problem =
        SensingProblem::new(a, data::demo_mean(), 100.0, [6].into_iter().collect(), 1).unwrap();
    let bounds = BoxProjection::cube(0.0, 300.0, 4).unwrap();
    let attack = AttackSpec::on_all_adversaries(AttackKind::Baruch, &problem);
    let source = RandomSource::new(1);
    let (n, trials) = (10_000u64, 10u64);

    let mut table: Vec<(String, f64)> = Vec::new();

    let mut est = 0.0;
    for trial in 0..trials {
        est += run(
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
        .unwrap();
    }
    table.push(("two-timescale estimator".into(), est / trials as f64));

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
        let mut err = 0.0;
        for trial in 0..trials {
            err += run_baseline(
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
            .unwrap();
        }
        table.push((format!("{} (buffered, s=3)", rule.label()), err / trials as f64));
    }

    table.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    println!("async, rows x10, sigma = 100, collinear attack, n = {n}, {trials} trials");
    println!("{:-^58}", "");
    for (i, (label, err)) in table.iter().enumerate() {
        println!("{:>2}. {label:<34} final error {err:8.3}", i + 1);
    }
}
