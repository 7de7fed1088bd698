use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent problem setup (spacing, operator form, schema).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a structural precondition (e.g. non-symmetric matrix).
    #[error("validation error: {0}")]
    Validation(String),

    /// The requested object does not exist (empty sub-level set, slope constraint fails).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An operation was called outside its domain.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
