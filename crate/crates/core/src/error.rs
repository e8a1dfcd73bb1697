use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("coefficient field is not elliptic: {0}")]
    NotElliptic(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("integrand is not adapted: piece starting at step {piece_start} read increment {step}")]
    NotAdapted { piece_start: usize, step: usize },

    #[error("fixed-point iteration is not contracting (increment ratio {ratio:.4} at iteration {iteration})")]
    NonContraction { ratio: f64, iteration: usize },

    #[error("fixed-point iteration did not converge within {max_iter} iterations (last relative increment {last:.3e})")]
    MaxIterations { max_iter: usize, last: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> LabError {
    LabError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
