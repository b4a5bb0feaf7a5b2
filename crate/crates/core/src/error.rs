use thiserror::Error;

use crate::graph::NodeId;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop requested at node {0}")]
    SelfLoop(NodeId),
    #[error("node {node} out of range for a universe of {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("universe mismatch: {left} nodes vs {right} nodes")]
    UniverseMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("model degeneracy: {0}")]
    Degenerate(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
