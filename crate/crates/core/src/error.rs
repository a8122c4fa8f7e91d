use alloc::string::String;

use thiserror::Error;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: u32 },

    #[error("referential integrity violation: {0}")]
    Integrity(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("candidate pools exhausted")]
    PoolExhausted,

    #[error("feedback does not correspond to the action taken")]
    FeedbackMismatch,

    #[error("metrics: {0}")]
    Metrics(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
