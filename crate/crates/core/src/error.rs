use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular (|det| = {det:e}, scale {scale:e})")]
    Singular { det: f64, scale: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid matrix law: {0}")]
    InvalidLaw(String),

    #[error("unsupported dimension {dim}: {what}")]
    UnsupportedDimension { dim: usize, what: &'static str },

    #[error("power iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("non-positive asymptotic variance gamma_2 = {0:e}")]
    DegenerateVariance(f64),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("enumeration needs {required} words, budget is {limit}")]
    BudgetExceeded { required: u128, limit: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
