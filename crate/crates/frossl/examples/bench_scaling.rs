//! Measures how the per-view variance terms scale with embedding dimension,
//! and how full-objective cost scales with the number of views.
//!
//! The Frobenius-norm variance term needs only a Gram matrix, so its cost
//! grows roughly quadratically in D (for N >= D), while the entropy-style
//! term needs a full eigendecomposition and grows faster. The view sweep
//! shows the Frobenius objective's cost is linear in V.
//!
//! Run with: cargo run --release --example bench_scaling

use frossl::bench::{d_sweep_report, views_scaling};
use frossl::objectives::{ObjectiveKind, ObjectiveSpec};

fn main() -> frossl::Result<()> {
    // tiny grids are noise-dominated; this takes a couple of minutes
    let n = 2048;
    let d_grid = [256, 512, 1024, 2048];
    let reps = 5;
    let warmup = 1;

    for kind in [ObjectiveKind::FroSsl, ObjectiveKind::Ivne] {
        let report = d_sweep_report(kind, n, &d_grid, reps, warmup)?;
        println!(
            "{:8}  D-sweep slope {:.3}  (r2 {:.4}, pinned {})",
            report.objective, report.slope, report.r2, report.pinned
        );
        for (d, (m, mad)) in report.grid.iter().zip(report.medians.iter().zip(&report.mads)) {
            println!("          D={d:5}  median {:.3e}s  mad {:.1e}s", m, mad);
        }
        println!("{}", serde_json::to_string(&report).expect("serializable"));
    }

    let spec = ObjectiveSpec::for_views(ObjectiveKind::FroSsl, 2);
    let views = views_scaling(&spec, 512, 64, &[2, 4, 8, 16], reps, warmup)?;
    println!(
        "{:8}  V-sweep slope {:.3e}s/view  intercept {:.3e}s  r2 {:.4}",
        views.objective, views.slope, views.intercept, views.r2
    );
    Ok(())
}
