use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("io error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),

    #[error("duplicate concept id `{0}`")]
    DuplicateConcept(String),

    #[error("unknown document `{0}`")]
    UnknownDocument(String),

    #[error("collection statistics requested on an empty index")]
    EmptyIndex,

    #[error("cannot build a query model from an empty term list")]
    EmptyQuery,

    #[error("invalid language model: {0}")]
    InvalidModel(String),

    #[error("document posted at {doc_time} is not earlier than query time {query_time}")]
    FutureEvidence { doc_time: f64, query_time: f64 },

    #[error("pseudo-relevance document set is empty")]
    EmptyFeedbackSet,

    #[error("term `{0}` has zero probability under both mixture components")]
    ZeroMixtureProbability(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error("concept store required for variant `{0}`")]
    MissingConceptStore(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
