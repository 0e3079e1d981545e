use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model, weight scheme or scenario configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty configuration")]
    EmptyConfiguration,
    #[error("empty sample")]
    EmptySample,
    #[error("unsupported test function: {0}")]
    UnsupportedTestFunction(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
