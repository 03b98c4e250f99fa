//! Crate-wide error type.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Precondition violated by the caller (bad sizes, NaN data, bad options).
    InvalidArgument(String),
    /// Desk-scale cap exceeded (oracle and exhaustive search refuse).
    SizeCap(String),
    /// I/O or parse failure while persisting/loading artifacts.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SizeCap(msg) => write!(f, "size cap exceeded: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
