//! Numerical laboratory for dimension-contrastive self-supervised learning
//! objectives built around covariance Frobenius norms.
//!
//! The crate is organized as a library with a thin `frossl` binary on top:
//!
//! - [`linalg`] — dense matrix kernels: centering, covariance/Gram products,
//!   norms, symmetric eigendecomposition, whitening, log-determinant.
//! - [`objectives`] — the SSL loss zoo (FroSSL, VICReg, Barlow Twins,
//!   CorInfoMax, I-VNE, W-MSE, MMCR) expressed through a shared
//!   invariance/variance decomposition, plus matrix entropies and the
//!   contrastive/non-contrastive criteria.
//! - [`gradients`] — analytic gradients of every objective with respect to
//!   each view's embedding matrix, a central-difference oracle, and a checker.
//! - [`datasets`] — seeded Gaussian-mixture synthesis and an IDX binary parser.
//! - [`trainer`] — desk-scale SGD training with eigenvalue-trajectory
//!   recording and an online linear probe.
//! - [`bench`] — microbenchmark harness with log-log scaling-exponent fits.
//! - [`cli`] — the subcommand surface used by the `frossl` binary.
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod bench;
pub mod cli;
pub mod datasets;
pub mod gradients;
pub mod linalg;
pub mod objectives;
pub mod trainer;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shape or dimension mismatch.
    #[error("dimension error: {0}")]
    Dim(String),
    /// A matrix entry was NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// An argument was outside its documented range.
    #[error("parameter error: {0}")]
    Param(String),
    /// A normalization statistic vanished (collapsed input).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Triangular factorization hit a non-positive pivot.
    #[error("matrix not positive definite: pivot {pivot} failed")]
    NotPositiveDefinite { pivot: usize },
    /// Whitening requested with batch size not exceeding dimension.
    #[error("ill-posed whitening: batch size {n} must exceed dimension {d}")]
    IllPosedWhitening { n: usize, d: usize },
    /// Malformed binary or text input.
    #[error("format error: {0}")]
    Format(String),
    /// Paired files disagree with each other.
    #[error("consistency error: {0}")]
    Inconsistent(String),
    /// A loss or gradient went non-finite during training.
    #[error("numerical failure at step {step}: {term} is non-finite")]
    Numerical { step: usize, term: String },
    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
