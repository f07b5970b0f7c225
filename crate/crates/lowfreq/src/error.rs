//! Crate-wide error type.

use std::fmt;
use std::io;

/// Errors produced by any operation in this crate.
#[derive(Debug)]
pub enum Error {
    /// An argument is out of its documented range (bad enum string, zero
    /// stride, even kernel width, ...).
    Argument(String),
    /// Operand shapes are inconsistent with each other or with the operation.
    Dimension(String),
    /// A model description violates a structural rule (missing pooling stage,
    /// stray strided convolution, ...).
    Structure(String),
    /// A file could not be parsed; `offset` is the byte position at which the
    /// problem was detected, when known.
    Format { offset: Option<u64>, message: String },
    /// Underlying I/O failure.
    Io(io::Error),
    /// Training aborted because the loss became non-finite.
    NanLoss { epoch: usize, batch: usize },
}

impl Error {
    pub fn argument(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }

    pub fn dimension(message: impl Into<String>) -> Self {
        Error::Dimension(message.into())
    }

    pub fn structure(message: impl Into<String>) -> Self {
        Error::Structure(message.into())
    }

    pub fn format(message: impl Into<String>) -> Self {
        Error::Format { offset: None, message: message.into() }
    }

    pub fn format_at(offset: u64, message: impl Into<String>) -> Self {
        Error::Format { offset: Some(offset), message: message.into() }
    }

    /// Stable short code, used as the one-line prefix on the CLI's
    /// diagnostic stream.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Argument(_) => "E_ARG",
            Error::Dimension(_) => "E_DIM",
            Error::Structure(_) => "E_STRUCT",
            Error::Format { .. } => "E_FMT",
            Error::Io(_) => "E_IO",
            Error::NanLoss { .. } => "E_NAN",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Argument(m) => write!(f, "invalid argument: {m}"),
            Error::Dimension(m) => write!(f, "dimension mismatch: {m}"),
            Error::Structure(m) => write!(f, "invalid model structure: {m}"),
            Error::Format { offset: Some(o), message } => {
                write!(f, "format error at byte {o}: {message}")
            }
            Error::Format { offset: None, message } => write!(f, "format error: {message}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::NanLoss { epoch, batch } => {
                write!(f, "loss became non-finite at epoch {epoch}, batch {batch}")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
