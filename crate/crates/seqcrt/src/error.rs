//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model validation, fitting, resampling, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its valid domain (e.g. a threshold not in (0,1)).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Matrix/vector shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A covariance matrix is not symmetric positive definite.
    #[error("covariance matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Conditioning on an event of probability zero (discrete models).
    #[error("zero-probability conditioning event at position {position}")]
    ZeroProbability { position: usize },

    /// An iterative fit exhausted its iteration budget.
    #[error("failed to converge: {0}")]
    NonConvergence(String),

    /// A statistic evaluation failed for one variable.
    #[error("statistic for variable {variable} failed: {source}")]
    Statistic {
        /// 0-based index of the variable being scored.
        variable: usize,
        source: Box<Error>,
    },

    /// An adversarial construction is not realizable at the given parameters.
    #[error("construction infeasible: {0}")]
    Infeasible(String),

    /// Malformed tabular input.
    #[error("CSV parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
