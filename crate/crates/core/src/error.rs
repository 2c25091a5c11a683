use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the fingerprinting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied data violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A file could not be decoded.
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A file was written by an incompatible format version.
    #[error("{path}: format version {found} is not supported (expected {expected}); re-export the file with a matching release")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    /// Missing credentials or an inconsistent model/run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A remote probe failed after exhausting its retries.
    #[error("probe failed: {0}")]
    Probe(String),

    /// A numerical routine could not produce a result.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
