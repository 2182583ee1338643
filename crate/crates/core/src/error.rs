use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Labels, dimensions or factor orders that do not fit together.
    #[error("composition error: {0}")]
    Composition(String),

    /// An operator that violates the precondition of an operation
    /// (non-Hermitian input, invalid state, non-unitary gate, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate scenario: {0}")]
    DegenerateScenario(String),

    #[error("protocol file error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn composition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Composition(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
