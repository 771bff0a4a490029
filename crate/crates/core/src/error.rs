use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its valid domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data is malformed or non-finite.
    #[error("invalid data: {0}")]
    Data(String),

    #[error("bandwidth too small: {0}")]
    BandwidthTooSmall(String),

    /// The requested quantity does not exist for this input (e.g. ground
    /// truth for a series read from disk, or a run without history).
    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// True for errors caused by the input data rather than by arguments.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Data(_) | Error::Format(_) | Error::Io(_) | Error::GridMismatch(_) | Error::Unavailable(_)
        )
    }
}
