use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid node payload: {0}")]
    InvalidPayload(String),
    #[error("{kind} expects {expected} parent(s), got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("value must be finite, got {0}")]
    NonFinite(f64),
    #[error("normalization state has no observations")]
    EmptyNormalization,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no valid candidate node")]
    NoCandidate,
    #[error("node {0} has not been evaluated")]
    Unevaluated(NodeId),
    #[error("missing prompt placeholder `{0}`")]
    MissingPlaceholder(String),
    #[error("malformed template: {0}")]
    Template(String),
    #[error("response has no fenced code block")]
    ParseFailure,
    #[error("chat client error: {0}")]
    Client(String),
    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),
    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
