use std::path::PathBuf;

use crate::kg::{EntityId, RelationId};
use crate::query::QueryType;
use crate::tree::DifficultyClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown entity id {0}")]
    UnknownEntity(EntityId),

    #[error("unknown relation id {0}")]
    UnknownRelation(RelationId),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("malformed query: {0}")]
    Structure(String),

    #[error("invalid atom list: {0}")]
    AtomList(String),

    #[error("could not sample a {query_type} query after {retries} retries")]
    SamplingExhausted { query_type: QueryType, retries: usize },

    #[error("smaller graph is not a subset of the larger graph")]
    NotSubset,

    #[error("step references unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("query has no answers on the reference graph")]
    EmptyAnswer,

    #[error("hard answer set is empty")]
    EmptyHardSet,

    #[error(
        "{class} pool exhausted: requested {requested}, only {available} available (short by {})",
        .requested - .available
    )]
    PoolExhausted {
        class: DifficultyClass,
        requested: usize,
        available: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure came from the filesystem rather than from the
    /// content being processed.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
