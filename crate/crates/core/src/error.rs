use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PurpleError>;

#[derive(Debug, Error)]
pub enum PurpleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    #[error("group `{group}`: {source}")]
    GroupFit {
        group: String,
        #[source]
        source: Box<PurpleError>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PurpleError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        PurpleError::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PurpleError::Io {
            path: path.into(),
            source,
        }
    }
}
