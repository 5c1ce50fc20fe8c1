use thiserror::Error;

/// Errors surfaced by toolkit operations.
///
/// `Precondition` marks inputs that violate a documented hypothesis (e.g. a
/// non-tripotent passed where a tripotent is required). `Internal` marks a
/// failed cross-check between routes that are supposed to agree exactly; it
/// always indicates a bug or a numerically hostile input, never a legitimate
/// "no" answer.
#[derive(Debug, Error)]
pub enum OatError {
    #[error("dimension mismatch: {0}")]
    Dim(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("budget exhausted: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, OatError>;

impl OatError {
    pub fn dim(msg: impl Into<String>) -> Self {
        OatError::Dim(msg.into())
    }
    pub fn invalid(msg: impl Into<String>) -> Self {
        OatError::Invalid(msg.into())
    }
    pub fn precondition(msg: impl Into<String>) -> Self {
        OatError::Precondition(msg.into())
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        OatError::Internal(msg.into())
    }
}
