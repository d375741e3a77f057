use thiserror::Error;

use crate::diagnostics::Trace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("step-size schedule diverges: alpha*R = {product} must lie in (0, 1)")]
    ScheduleDivergence { product: f64 },

    /// Iterate blew up. Carries the trace recorded up to the failing step.
    #[error("iteration diverged at k = {k}: {reason}")]
    Diverged {
        k: usize,
        reason: String,
        partial: Box<Trace>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("trace parse error: {0}")]
    Parse(String),

    /// A trace that a verification needs is absent or unreadable.
    #[error("trace {path}: {reason}")]
    TraceUnavailable { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
