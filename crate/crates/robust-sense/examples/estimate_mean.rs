//! Run the two-timescale estimator on the bundled problem, with worker
//! 6 mounting the collinear attack, in both communication modes.
//!
//!     cargo run --release --example estimate_mean

use robust_sense::adversary::{AttackKind, AttackSpec};
use robust_sense::data;
use robust_sense::estimator::{run, Mode};
use robust_sense::problem::{BoxProjection, SensingProblem};
use robust_sense::rng::RandomSource;
use robust_sense::schedule::StepsizeSchedule;

fn main() {
    let problem = SensingProblem::new(
        data::demo_sensing_matrix(),
        data::demo_mean(),
        1.0,
        [6].into_iter().collect(),
        1,
    )
    .unwrap();
    let bounds = BoxProjection::cube(0.0, 30.0, 4).unwrap();
    let attack = AttackSpec::on_all_adversaries(AttackKind::Baruch, &problem);
    let source = RandomSource::new(2024);
    let n = 10_000;

    println!("hidden mean = {:?}", problem.mu_true().to_vec());
    for mode in [Mode::Sync, Mode::Async] {
        let traj = run(
            &problem,
            mode,
            &StepsizeSchedule::DecayDecay,
            &bounds,
            Some(&attack),
            n,
            0.5,
            &source,
            0,
        )
        .unwrap();
        println!("\n{} run, n = {n}, attack = {}", mode.label(), attack.descriptor());
        for t in [0u64, 100, 1000, n] {
            println!(
                "  t = {t:6}: f(x) = {:9.4}  ||x - mean|| = {:8.4}",
                traj.f_x[t as usize], traj.err_x[t as usize]
            );
        }
        println!("  tail average = {:.4?}", traj.tail_x.to_vec());
        println!("  f(tail) = {:.4}", traj.f_tail);
    }
}
