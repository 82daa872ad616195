use std::io;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
///
/// Variants are grouped by who is at fault: `Invalid`, `Shape` and `Parse`
/// mean the caller handed us bad data or files, `Io` is the operating
/// system, and `Internal` means a library invariant broke and the process
/// state can no longer be trusted.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input failed validation (out-of-range value, empty set, bad config field).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Array or matrix dimensions disagree with what the operation requires.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Filesystem failure while touching `path`.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A file existed but its contents did not match the expected schema.
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    /// A bug: an internal invariant was violated.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }
}
