//! When full recovery fails, a projected component can still be exactly
//! recoverable: check the relaxed condition on the bundled 5x2
//! instance, fit through 1-sparse corruption, and show what breaks
//! beyond the budget.
//!
//!     cargo run --release --example partial_recovery

use ndarray::{array, Array1};
use robust_sense::data;
use robust_sense::recover::{check_a2_prime, compute_eta_exact, l1_fit, PartialStructure};

fn main() {
    let a = data::partial_recovery_matrix();
    let u = data::partial_recovery_u();
    let v = data::partial_recovery_v();

    let full = compute_eta_exact(&a, 1).unwrap();
    println!("full condition at m = 1: eta = {} -> holds = {}", full.eta, full.holds_a2);

    let st = PartialStructure::new(u.clone(), v.clone(), 1).unwrap();
    let partial = check_a2_prime(&a, &st).unwrap();
    println!(
        "partial condition at q = 1: margin = {} -> holds = {} (certified = {})",
        partial.margin, partial.holds, partial.certified
    );

    // ground truth and a 1-sparse corruption
    let (alpha_true, beta_true) = (3.0, 2.0);
    let mu = Array1::from_iter((&u * alpha_true + &v * beta_true).iter().copied());
    let mut y = a.dot(&mu);
    y[1] += 4.0;
    let fit = l1_fit(&a, &u, &v, &y).unwrap();
    println!("\n1-sparse corruption of size 4 on measurement 1:");
    println!("  alpha_hat = {:.12} (true {alpha_true})", fit.alpha[0]);
    println!("  beta_hat  = {:.12} (true {beta_true}; no exactness promised)", fit.beta[0]);
    println!("  residual  = {:.12}", fit.residual);

    // two corruptions exceed the certified budget
    let y2 = array![1.0, 0.0, 0.0, 2.0, 0.0]; // truth alpha = 0, 2-sparse corruption
    let fit2 = l1_fit(&a, &u, &v, &y2).unwrap();
    println!("\n2-sparse corruption (budget exceeded), true alpha = 0:");
    println!("  alpha_hat = {:.12} -- the fit is still the l1 optimum,", fit2.alpha[0]);
    println!("  but exact recovery of the component no longer holds");
}
