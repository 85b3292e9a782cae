use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("expected 5 votes, got {0}")]
    VoteCount(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class `{0}` has no records")]
    EmptyClass(String),

    #[error("duplicate category `{0}`")]
    DuplicateCategory(String),

    #[error("category `{0}` has no entries")]
    EmptyCategory(String),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("embedding row for `{token}` has {found} components, expected {expected}")]
    DimensionMismatch {
        token: String,
        expected: usize,
        found: usize,
    },

    #[error("truncated embedding stream: {0}")]
    Truncated(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training set must contain both labels")]
    OneClass,

    #[error("{0}")]
    Format(String),
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
}
