//! Demonstrates batch whitening: after the transform, the embedding
//! covariance is the identity, and the whitening-based objective reduces to
//! a pure mean-squared alignment between views.
//!
//! Run with: cargo run --example whitening

use frossl::linalg::Matrix;
use frossl::objectives::{evaluate, ObjectiveKind, ObjectiveSpec, ViewSet};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> frossl::Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let (n, d) = (128, 6);
    let z = Matrix::random_standard(n, d, &mut rng);

    let white = z.whiten(1e-6)?;
    let cov = white.center_columns().covariance();
    let mut max_offdiag = 0.0_f64;
    let mut worst_diag = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                worst_diag = worst_diag.max((cov.get(i, i) - 1.0).abs());
            } else {
                max_offdiag = max_offdiag.max(cov.get(i, j).abs());
            }
        }
    }
    println!("whitened covariance: |diag - 1| <= {worst_diag:.3e}, |offdiag| <= {max_offdiag:.3e}");

    // two slightly different views through the whitening objective
    let noise = Matrix::random_standard(n, d, &mut rng).scale(0.05);
    let vs = ViewSet::new(vec![z.clone(), z.add(&noise)?])?;
    let spec = ObjectiveSpec::new(ObjectiveKind::Wmse);
    let r = evaluate(&vs, &spec)?;
    println!(
        "whiten-then-align objective: total {:.6}, invariance {:.6}, variance {:.6}",
        r.total, r.invariance_part, r.variance_part
    );
    Ok(())
}
