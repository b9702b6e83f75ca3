use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed image format: {0}")]
    Format(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("palette error: {0}")]
    Palette(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate histogram: image has a single distinct intensity")]
    DegenerateHistogram,

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("empty comparison: no pixels or samples to compare")]
    EmptyComparison,

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
