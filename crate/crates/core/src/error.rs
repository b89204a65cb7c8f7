use thiserror::Error;

/// Errors produced by the graph construction and layout stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error(
        "non-finite coordinate at point {point}, component {component} after {samples} samples"
    )]
    NonFinite {
        point: usize,
        component: usize,
        samples: u64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
