//! Drives a training run through the same config-resolution path the
//! binary uses, writing the manifest, trajectory CSV, and checkpoint, then
//! re-runs from the manifest to demonstrate bit-identical reproduction.
//!
//! Run with: cargo run --release --example train_cli_config

use frossl::cli::{resolve_config, run_training, RunManifest};

fn main() -> frossl::Result<()> {
    let overrides: Vec<String> = [
        "objective.name=frossl",
        "train.steps=200",
        "train.seed=5",
        "augment.noise_std=0.5",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let map = resolve_config(None, &overrides)?;

    let dir = std::env::temp_dir().join("frossl_train_example");
    let run1 = dir.join("run1");
    let run2 = dir.join("run2");
    run_training(&map, &run1)?;
    println!("first run artifacts in {}", run1.display());

    // re-resolve from the written manifest, exactly as `train --from-manifest`
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(run1.join("manifest.json"))?)
            .expect("manifest we just wrote parses");
    run_training(&manifest.config, &run2)?;

    let a = std::fs::read(run1.join("trajectory.csv"))?;
    let b = std::fs::read(run2.join("trajectory.csv"))?;
    assert_eq!(a, b, "trajectories must be byte-identical");
    let a = std::fs::read(run1.join("checkpoint.bin"))?;
    let b = std::fs::read(run2.join("checkpoint.bin"))?;
    assert_eq!(a, b, "checkpoints must be byte-identical");
    println!("manifest re-run reproduced both artifacts byte-identically");
    Ok(())
}
