//! Trains a linear encoder on Gaussian-mixture data with two objectives and
//! compares how quickly the tracked covariance spectrum saturates, then
//! writes the trajectory CSV and an SVG plot of the eigenvalue curves.
//!
//! Run with: cargo run --release --example eigenvalue_trajectories

use frossl::cli::render_trajectory_svg;
use frossl::objectives::{ObjectiveKind, ObjectiveSpec};
use frossl::trainer::{
    condition_number, reference_config, reference_dataset, saturation_step, train_run,
    REFERENCE_RISE_FRAC,
};

fn main() -> frossl::Result<()> {
    let seed = 1;
    let data = reference_dataset(seed);

    for kind in [ObjectiveKind::FroSsl, ObjectiveKind::BarlowTwins] {
        let spec = ObjectiveSpec::for_views(kind, 2);
        let config = reference_config(spec, 2, seed);
        let outcome = train_run(&config, &data)?;
        let sat = saturation_step(&outcome.trajectory, REFERENCE_RISE_FRAC);
        let last = outcome.trajectory.points.last().unwrap().step;
        let cond = condition_number(&outcome.trajectory, last)?;
        println!(
            "{:<10} saturation step {:?}, final condition number {:.2}",
            spec.name(),
            sat,
            cond
        );

        let csv = outcome.trajectory.to_csv();
        let csv_path = format!("trajectory_{}.csv", spec.name());
        let svg_path = format!("trajectory_{}.svg", spec.name());
        std::fs::write(&csv_path, &csv)?;
        std::fs::write(&svg_path, render_trajectory_svg(&csv, false)?)?;
        println!("           wrote {csv_path} and {svg_path}");
    }
    Ok(())
}
