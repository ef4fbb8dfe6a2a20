use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("degenerate direction: contraction norm {norm:e} below threshold")]
    DegenerateDirection { norm: f64 },

    #[error("extraction failed for component {component}: every restart was degenerate")]
    ExtractionFailure { component: usize },

    #[error("sample stream exhausted after {consumed} samples")]
    StreamExhausted { consumed: u64 },

    #[error("dimension {dim} exceeds the dense-tensor guard of {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("trace unavailable: run was executed without tracing")]
    TraceUnavailable,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
