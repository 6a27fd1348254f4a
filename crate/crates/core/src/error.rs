use thiserror::Error;

/// Errors raised by grid construction, transforms and experiment drivers.
#[derive(Debug, Error)]
pub enum KflError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Nyquist violation: {parameter} = {value} exceeds resolvable limit {limit}")]
    Nyquist {
        parameter: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("time cutoff already applied to trajectory")]
    CutoffAlreadyApplied,

    #[error("time cutoff required before this operation")]
    CutoffRequired,

    #[error("step rejected at t = {t}: norm grew from {from:e} to {to:e} in one step")]
    StepRejected { t: f64, from: f64, to: f64 },

    #[error("non-finite value in experiment `{experiment}`: {detail}")]
    NonFinite { experiment: String, detail: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KflError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> KflError {
    KflError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
