use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    /// A construction whose existence is a theorem failed to materialize.
    /// Seeing this means either a bug or a counterexample; never swallow it.
    #[error("construction failed: {0}")]
    ConstructionFailure(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
