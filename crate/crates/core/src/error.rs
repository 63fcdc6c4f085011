//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while loading data, building graphs,
/// training, or serializing models.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Underlying I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content; `line` is 1-based and refers to the file as
    /// written, so error messages point at the offending row.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Inputs that are structurally valid but violate a documented
    /// precondition (negative weights, unlabeled test rows, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Two pieces of data that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A linear system that must be positive definite is not, typically
    /// because a graph component contains no labeled input.
    #[error("singular system: {0}")]
    Singular(String),

    /// Training produced a non-finite value and was aborted.
    #[error("training aborted at iteration {iteration}: {message}")]
    Training { iteration: usize, message: String },

    /// Model file is corrupt or from an unsupported format version.
    #[error("model file error: {0}")]
    Model(String),
}

impl Error {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Builds a parse error for `path` at 1-based `line`.
    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
