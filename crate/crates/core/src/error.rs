use std::path::PathBuf;

/// Errors produced by the demosaicing toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("band count mismatch: expected {expected}, found {found}")]
    BandMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid SFA pattern: {0}")]
    Pattern(String),

    #[error("invalid transform: {0}")]
    Transform(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("non-finite loss at step {step} (cube {cube}, mosaic {mosaic})")]
    NonFiniteLoss { step: usize, cube: f64, mosaic: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }
}
