use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum CrispError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vector is not unit norm (deviation {deviation:e})")]
    NotUnitNorm { deviation: f64 },

    #[error("dataset is invalid: {0}")]
    InvalidDataset(String),

    #[error("disc is not nested inside the outer disc (overshoot {overshoot:e} rad)")]
    NotNested { overshoot: f64 },

    #[error("numerical routine failed: {0}")]
    Numerical(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = CrispError> = std::result::Result<T, E>;

impl CrispError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CrispError::InvalidArgument(msg.into())
    }
}
