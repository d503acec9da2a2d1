use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("system size L={l} exceeds the bound {max} for {what}")]
    SizeBound { what: &'static str, l: usize, max: usize },

    #[error("spectrum bounds violated during propagation: {0}")]
    BoundsViolation(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("record error: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
