use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("feature name sets differ: expected [{expected}], found [{found}]")]
    FeatureMismatch { expected: String, found: String },

    #[error("feature `{name}` has non-finite value {value}")]
    NonFinite { name: String, value: f64 },

    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),

    #[error("reference streams have ragged line counts: {counts:?}")]
    RaggedReferences { counts: Vec<usize> },

    #[error("reference stream {stream}, line {line}: empty reference")]
    EmptyReference { stream: usize, line: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("sequences are misaligned: expected {expected} items, found {found}")]
    Misaligned { expected: usize, found: usize },

    #[error("correlation undefined: zero variance")]
    ZeroVariance,

    #[error("distribution categories differ")]
    CategoryMismatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::InvalidConfig(message.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
