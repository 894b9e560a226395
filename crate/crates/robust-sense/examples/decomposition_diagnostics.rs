//! Diagnostics behind the rate analysis: split the asynchronous drive
//! into the true subgradient direction, its adversarial corruption, the
//! honest estimation error, and the sampling martingale term, and
//! measure the two inner-product inequalities that make convergence
//! survive the adversary.
//!
//!     cargo run --release --example decomposition_diagnostics

use ndarray::Array1;
use rand_distr::{Distribution, StandardNormal};
use robust_sense::data;
use robust_sense::estimator::{decomposition, martingale_term};
use robust_sense::problem::SensingProblem;
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
    let k = compute_eta_exact(problem.matrix(), 1).unwrap().k;
    let ey = problem.expected_y();
    let mu = problem.mu_true().clone();
    let mut rng = RandomSource::new(3).stream(0);

    let mut worst_g: f64 = f64::NEG_INFINITY;
    let mut worst_e: f64 = f64::NEG_INFINITY;
    let trials = 100_000;
    for _ in 0..trials {
        let x = Array1::from_iter((0..4).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            15.0 + 10.0 * z
        }));
        let y = Array1::from_iter((0..7).map(|j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            ey[j] + 25.0 * z
        }));
        let dec = decomposition(&x, &y, &problem);
        let diff = &x - &mu;
        worst_g = worst_g.max(diff.dot(&dec.g_prime) - diff.dot(&dec.g) / k);
        let honest_l1: f64 = problem
            .honest_workers()
            .map(|j| (y[j] - ey[j]).abs())
            .sum();
        worst_e = worst_e.max(diff.dot(&dec.eps) - 2.0 / 7.0 * honest_l1);
    }
    println!("{trials} random (x, y, adversarial-value) states, K = {k:.4}");
    println!("corruption bound slack:  max [(x-m)'g' - (x-m)'g / K] = {worst_g:.3e}  (must be <= 0)");
    println!("estimation bound slack:  max [(x-m)'e - (2/N)||y-EY||_1,honest] = {worst_e:.3e}  (must be <= 0)");

    // the remaining drive term averages to zero over the worker draw
    let x = Array1::from_elem(4, 12.0);
    let y = ey.clone();
    let dec = decomposition(&x, &y, &problem);
    let mut mean = Array1::<f64>::zeros(4);
    for i in 0..7 {
        mean = &mean + &martingale_term(i, &x, &y, &problem, &dec);
    }
    mean /= 7.0;
    let cells: Vec<String> = mean.iter().map(|v| format!("{v:.2e}")).collect();
    println!("martingale term mean over the uniform draw: [{}]", cells.join(", "));
}
