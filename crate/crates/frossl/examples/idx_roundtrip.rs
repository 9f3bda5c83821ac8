//! Generates a synthetic dataset, stores it in the MNIST-style IDX binary
//! container, reloads it, and verifies the round trip.
//!
//! Run with: cargo run --example idx_roundtrip

use frossl::datasets::{load_idx, save_idx, synth_gaussian_mixture};
use frossl::linalg::Matrix;

fn main() -> frossl::Result<()> {
    let ds = synth_gaussian_mixture(4, 9, 25, 5.0, 42)?;

    // IDX stores bytes, so map features into [0,1] first
    let slice = ds.features.as_slice();
    let (lo, hi) = slice
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scaled: Vec<f64> = slice.iter().map(|&v| (v - lo) / (hi - lo)).collect();
    let mut stored = ds.clone();
    stored.features = Matrix::new(ds.features.rows(), ds.features.cols(), scaled)?;

    let dir = std::env::temp_dir().join("frossl_idx_roundtrip");
    std::fs::create_dir_all(&dir)?;
    let images = dir.join("images.idx");
    let labels = dir.join("labels.idx");
    save_idx(&stored, &images, &labels)?;

    let loaded = load_idx(&images, &labels)?;
    assert_eq!(loaded.len(), stored.len());
    assert_eq!(loaded.dim(), stored.dim());
    assert_eq!(loaded.labels, stored.labels);

    // quantization to bytes bounds the per-pixel error at half a byte step
    let max_err = stored
        .features
        .as_slice()
        .iter()
        .zip(loaded.features.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    println!("{} samples x {} features round-tripped", loaded.len(), loaded.dim());
    println!("max quantization error {max_err:.6} (bound {:.6})", 0.5 / 255.0);
    assert!(max_err <= 0.5 / 255.0 + 1e-12);
    println!("files in {}", dir.display());
    Ok(())
}
