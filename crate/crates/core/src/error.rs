use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row or record that could not be decoded. `line` is 1-based and
    /// counts the header row for tabular files.
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: u64,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("insufficient price coverage: {0}")]
    Coverage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn parse(origin: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Line number of a csv error, falling back to `fallback` when the reader
/// could not attach a position.
pub(crate) fn csv_line(err: &csv::Error, fallback: u64) -> u64 {
    err.position().map(|p| p.line()).unwrap_or(fallback)
}
