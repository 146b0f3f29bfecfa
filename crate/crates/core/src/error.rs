use thiserror::Error;

/// Errors produced by the gasket toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level {level} exceeds the configured maximum level {max}")]
    LevelTooDeep { level: usize, max: usize },

    #[error("level mismatch: expected {expected}, found {found}")]
    LevelMismatch { expected: usize, found: usize },

    #[error("scalar mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("{what} = {value} is outside the valid range {range}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("insufficient depth: {0}")]
    InsufficientDepth(String),

    #[error("missing sample: {0}")]
    MissingSample(String),

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("invalid address: {0}")]
    InvalidAddress(String),

    #[error("internal solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
