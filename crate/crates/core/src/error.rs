use thiserror::Error;

/// Errors raised by mesh construction, assembly, solving and reporting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("factorization failed: block {block} is not positive definite")]
    Factorization { block: usize },

    #[error("power iteration did not converge after {iterations} steps (best estimate {estimate})")]
    PowerIteration { iterations: usize, estimate: f64 },

    #[error("singular transform")]
    SingularTransform,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_parameter(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
