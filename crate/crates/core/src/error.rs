use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("parameter `{0}` has no gradient")]
    MissingGrad(String),

    #[error("log of non-positive value {0}")]
    NonPositiveLog(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sentence of {len} positions exceeds maximum length {max}")]
    TooLong { len: usize, max: usize },

    #[error("sentence {sentence} has {count} triples but the decoder emits only {m}")]
    TooManyTriples {
        sentence: String,
        count: usize,
        m: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the file system rather than of the data or model.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
