//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Filesystem failure, annotated with the path involved.
    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed CSV content.
    #[error("csv error on `{path}`: {message}")]
    Csv { path: String, message: String },

    /// Declared schema does not match the data (unknown columns, duplicate
    /// kinds, missing label, ...).
    #[error("schema error: {0}")]
    Schema(String),

    /// Invalid dataset content or shape at runtime.
    #[error("data error: {0}")]
    Data(String),

    /// Matrix/vector dimensions disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Model training failed.
    #[error("training error: {0}")]
    Train(String),

    /// Explanation computation failed.
    #[error("explanation error: {0}")]
    Explain(String),

    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Persisted artifact is missing, corrupt, or of the wrong version.
    #[error("artifact error: {0}")]
    Artifact(String),

    /// A pipeline stage failed; wraps the underlying error with the stage
    /// name so run failures are attributable.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps any error as a failure of the named pipeline stage.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// Builds an i/o error annotated with the offending path.
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for errors that indicate bad user input rather than a failure
    /// while executing a pipeline stage (used for CLI exit codes).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Stage { .. })
    }
}
