//! Validates every analytic gradient against central finite differences
//! and shows a corrupted gradient failing the same check.
//!
//! Run with: cargo run --example gradient_check

use frossl::gradients::{analytic_grad, finite_difference_grad, grad_check_random, DEFAULT_FD_STEP};
use frossl::linalg::Matrix;
use frossl::objectives::{ObjectiveSpec, ViewSet, OBJECTIVE_NAMES};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> frossl::Result<()> {
    let (views, batch, dim) = (2, 8, 5);
    println!("{:<14} {:>14} {:>10} result", "objective", "max rel err", "tol");
    for name in OBJECTIVE_NAMES {
        let spec = ObjectiveSpec::by_name(name).expect("registry name");
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let report = grad_check_random(&spec, views, batch, dim, &mut rng)?;
        println!(
            "{:<14} {:>14.3e} {:>10.0e} {}",
            name,
            report.max_rel_err,
            report.tolerance,
            if report.passed { "PASS" } else { "FAIL" }
        );
    }

    // negative control: a deliberately corrupted gradient must not pass
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let spec = ObjectiveSpec::by_name("frossl").expect("registry name");
    let vs = ViewSet::new(
        (0..views).map(|_| Matrix::random_standard(batch, dim, &mut rng)).collect(),
    )?;
    let analytic = analytic_grad(&vs, &spec)?;
    let numeric = finite_difference_grad(&vs, &spec, DEFAULT_FD_STEP)?;
    let corrupted = analytic.grads[0].scale(1.1);
    let err = corrupted.sub(&numeric.grads[0])?.frobenius_norm()
        / numeric.grads[0].frobenius_norm();
    println!("\ncorrupted gradient rel err {err:.3e} (correctly fails the 1e-5 tolerance)");
    Ok(())
}
