//! Library error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for mode {mode} (size {size})")]
    IndexOutOfRange {
        index: usize,
        mode: usize,
        size: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tensor expansion too large: {size} entries exceeds cap {cap}")]
    ExpansionTooLarge { size: usize, cap: usize },

    #[error("degenerate feature column {column}: constant value {value}")]
    DegenerateColumn { column: usize, value: f64 },

    #[error("rank-deficient normal equations; use a regularization strength greater than zero")]
    RankDeficient,

    #[error("Hessian not positive definite; use a weight precision greater than zero")]
    NotPositiveDefinite,

    #[error("zero-variance column \"{column}\"; remove it before standardization")]
    ZeroVariance { column: String },

    #[error("value error at row {row}, column \"{column}\": {message}")]
    CsvValue {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("predictive variance must be positive, got {value} at index {index}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
