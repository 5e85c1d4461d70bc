use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A geometric precondition failed (off-circle point, degenerate chord, ...).
    #[error("geometry: {0}")]
    Geometry(String),

    /// A parameter or configuration value is out of its admissible range.
    #[error("validation: {0}")]
    Validation(String),

    /// A file does not conform to its declared binary or JSON format.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    /// Provenance recorded in a sidecar does not match the current inputs.
    #[error("provenance mismatch for {path}: {msg}")]
    Provenance { path: PathBuf, msg: String },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// The configured work budget for the series model would be exceeded.
    #[error("budget exceeded: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
