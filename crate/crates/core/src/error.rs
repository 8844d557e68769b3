//! Error types shared across the crate.

use std::fmt;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// A caller-supplied value is out of range or malformed.
    InvalidArgument {
        /// Name of the offending parameter.
        name: &'static str,
        /// What went wrong.
        message: String,
    },
    /// Not enough samples to perform the requested operation. Never padded
    /// over; `required` names the minimum.
    InsufficientData {
        required: usize,
        actual: usize,
        message: String,
    },
    /// Run or file configuration is inconsistent.
    Config(String),
    /// Input data could not be loaded or parsed.
    Data(String),
    /// Internal shape or state inconsistency; indicates a bug.
    Internal(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument { name, message } => {
                write!(f, "invalid argument `{name}`: {message}")
            }
            Error::InsufficientData {
                required,
                actual,
                message,
            } => write!(
                f,
                "insufficient data: {message} (required {required}, got {actual})"
            ),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            message: message.into(),
        }
    }
}
