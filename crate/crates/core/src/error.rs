use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("document `{0}` has no tokens after stop-word removal")]
    EmptyDocument(String),

    #[error("document `{0}` has no group key but grouping by group was requested")]
    MissingGroupKey(String),

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("layout of cloud `{doc_id}` diverged after {restarts} frame restarts")]
    LayoutDiverged { doc_id: String, restarts: usize },

    #[error("optimizer stalled: {overlaps} overlapping word pairs remain at lambda = {lambda:e}")]
    OptimizerStalled { lambda: f64, overlaps: usize },

    #[error("raster dimensions differ: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("corpus is not labelled: document `{0}` has no label")]
    Unlabeled(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
