//! Evaluate the finite-time rate bounds for all three stepsize regimes
//! and both modes, and compare them against the measured tail objective
//! of seeded runs.
//!
//!     cargo run --release --example theorem_bounds

use robust_sense::adversary::{AttackKind, AttackSpec};
use robust_sense::data;
use robust_sense::estimator::{
    run, theorem_bound, BoundStatement, Mode, RateConstants,
};
use robust_sense::problem::{BoxProjection, SensingProblem};
use robust_sense::recover::compute_eta_exact;
use robust_sense::rng::RandomSource;

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
    let eta = compute_eta_exact(problem.matrix(), 1).unwrap().eta;
    let source = RandomSource::new(11);
    let trials = 20;

    for mode in [Mode::Sync, Mode::Async] {
        let consts =
            RateConstants::derive(&problem, &bounds, &bounds.center(), eta, mode).unwrap();
        println!(
            "{} constants: K = {:.4}, D = {:.1}, A_bar = {:.4}, C_N = {:.4}, Delta = {:.2}, E0 = {:.2}",
            mode.label(),
            consts.k,
            consts.d_x,
            consts.a_bar,
            consts.c_n,
            consts.delta,
            consts.e0_y
        );
        for st in [
            BoundStatement::ConstConst,
            BoundStatement::ConstDecay,
            BoundStatement::DecayDecay,
        ] {
            for n in [100u64, 1000, 10_000] {
                let sched = st.schedule(n, 0.5).unwrap();
                let mut mean = 0.0;
                for trial in 0..trials {
                    mean += run(
                        &problem,
                        mode,
                        &sched,
                        &bounds,
                        Some(&attack),
                        n,
                        0.5,
                        &source,
                        trial,
                    )
                    .unwrap()
                    .f_tail;
                }
                mean /= trials as f64;
                let bound = theorem_bound(st, &consts, n, 0.5).unwrap();
                println!(
                    "  {} n = {n:6}: measured E f(tail) = {mean:9.4}   bound = {bound:10.2}",
                    st.label()
                );
            }
        }
        println!();
    }
}
