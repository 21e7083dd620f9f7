use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {stage}")]
    NonFinite { stage: String },

    #[error("degenerate sample {index}: reference field has zero norm")]
    DegenerateSample { index: usize },

    #[error("stability bound violated: {0}")]
    Stability(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("diverged at {0}")]
    Diverged(String),

    #[error("format error at byte offset {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::ShapeMismatch(msg.into())
}
