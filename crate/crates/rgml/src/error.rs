use std::path::PathBuf;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A positivity-requiring operation met a non-positive eigenvalue, or a
    /// retraction step left the SPD cone. Carries the offending eigenvalue.
    #[error("matrix is not positive definite (eigenvalue {eigenvalue:.6e})")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("symmetric eigendecomposition did not converge")]
    EigenFailed,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("failed to read {path}: {source}")]
    DatasetIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset error in {path}: {message}")]
    DatasetFormat { path: PathBuf, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
