use thiserror::Error;

/// Errors raised by the library. Inequality failures are never errors; they
/// are reported as report content.
#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} leaf values for dim {dim} and depth {depth}, got {got}")]
    LengthMismatch {
        dim: usize,
        depth: u32,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },
    #[error("cube at level {level} is deeper than the grid depth {depth}")]
    TooDeep { level: u32, depth: u32 },
    #[error("the root cube has no dyadic parent")]
    NoParent,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid metric space: {0}")]
    InvalidSpace(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
