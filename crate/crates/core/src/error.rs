use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("documents outside all time bins: {}", .0.join(", "))]
    OutOfRange(Vec<String>),

    #[error("no snippets found for target `{0}`")]
    NoSnippets(String),

    #[error("missing predictions for gold lemmas: {}", .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error("degenerate model state: {0}")]
    Degenerate(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for failures caused by the numerical state of a model rather than
    /// by malformed input or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Degenerate(_))
    }
}
