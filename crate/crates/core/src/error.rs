use alloc::string::String;

/// Errors raised by the mapping core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("histogram holds no mass")]
    EmptyHistogram,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("position ({x}, {y}) lies outside the grid bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error("grid of {requested} cells exceeds the limit of {limit}")]
    CapacityExceeded { requested: u128, limit: u128 },
    #[error("ownership protocol violation: {0}")]
    Protocol(String),
    #[error("the compared fields share no populated cell")]
    EmptyOverlap,
    #[error("result undefined: {0}")]
    UndefinedResult(String),
    #[error("no path from {from} to {to}")]
    NoPath { from: u64, to: u64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
