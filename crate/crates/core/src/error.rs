use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("capacity exceeded: {what} has {size} nodes, limit is {limit}")]
    Capacity {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("malformed {file}: {message}")]
    Format { file: String, message: String },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Training { epoch: usize, loss: f64 },

    #[error("layer {layer} is not a graph convolution layer")]
    UnsupportedLayer { layer: usize },

    #[error("concept {0} has no members")]
    EmptyConcept(usize),

    #[error("every concept was skipped; nothing to report")]
    EmptyReport,

    #[error("artifact version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("hash mismatch for {file}: manifest has {expected}, contents hash to {actual}")]
    HashMismatch {
        file: String,
        expected: String,
        actual: String,
    },

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("not found: {0}")]
    NotFound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn format(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            message: message.into(),
        }
    }

    /// Stable short code, used for process exit codes and HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Capacity { .. } => "capacity",
            Error::Format { .. } => "format",
            Error::Training { .. } => "training",
            Error::UnsupportedLayer { .. } => "unsupported_layer",
            Error::EmptyConcept(_) => "empty_concept",
            Error::EmptyReport => "empty_report",
            Error::Version { .. } => "version",
            Error::HashMismatch { .. } => "hash_mismatch",
            Error::MissingFile(_) => "missing_file",
            Error::NotFound(_) => "not_found",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
