//! Evaluates every registered objective on one shared set of augmented
//! views and prints the invariance/variance decomposition side by side.
//!
//! Run with: cargo run --example objectives_tour

use frossl::linalg::Matrix;
use frossl::objectives::{evaluate, ObjectiveSpec, ViewSet, OBJECTIVE_NAMES};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() -> frossl::Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let (n, d, v) = (64, 16, 2);

    // two noisy views of the same underlying batch
    let base = Matrix::random_standard(n, d, &mut rng);
    let views = (0..v)
        .map(|_| {
            let noise = Matrix::random_standard(n, d, &mut rng).scale(0.1);
            base.add(&noise)
        })
        .collect::<frossl::Result<Vec<_>>>()?;
    let vs = ViewSet::new(views)?;

    println!("{:<14} {:>7} {:>14} {:>14} {:>14}", "objective", "gamma", "total", "invariance", "variance");
    for name in OBJECTIVE_NAMES {
        let spec = ObjectiveSpec::by_name(name).expect("registry name");
        let spec = ObjectiveSpec::for_views(spec.kind, v);
        let r = evaluate(&vs, &spec)?;
        println!(
            "{:<14} {:>7.2} {:>14.6} {:>14.6} {:>14.6}",
            name, spec.gamma, r.total, r.invariance_part, r.variance_part
        );
    }

    // identical views: every invariance term collapses to zero
    let same = ViewSet::new(vec![base.clone(), base.clone()])?;
    println!("\nwith identical views (invariance must vanish):");
    for name in OBJECTIVE_NAMES {
        let spec = ObjectiveSpec::by_name(name).expect("registry name");
        let r = evaluate(&same, &spec)?;
        println!("{:<14} invariance = {:.3e}", name, r.invariance_part);
    }
    Ok(())
}
