use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty document")]
    EmptyDocument,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate document id \"{0}\"")]
    DuplicateId(String),

    #[error("document \"{0}\" has no label")]
    Unlabeled(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("both classes required")]
    SingleClass,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing fitted component: {0}")]
    MissingComponent(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("degenerate affinities")]
    DegenerateAffinities,

    #[error("empty search space")]
    EmptySearchSpace,

    #[error("bad model file: {0}")]
    BadModelFile(String),

    #[error("embedding checksum mismatch: model expects {expected}, found {found}")]
    EmbeddingMismatch { expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerical trouble rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::Divergence { .. } | Error::DegenerateAffinities
        )
    }
}
