use std::time::Duration;

use thiserror::Error;

/// Errors produced anywhere in the extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero-mass region: the constraint has no probability mass under the mixture")]
    ZeroMass,

    #[error("degenerate conditioning: {0}")]
    DegenerateConditioning(String),

    #[error("node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("oracle session failed: {message}{}", stderr_suffix(.stderr))]
    Session { message: String, stderr: String },

    #[error("oracle did not answer within {0:?}")]
    Timeout(Duration),

    #[error("oracle is not deterministic: {0}")]
    Nondeterministic(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn stderr_suffix(stderr: &str) -> String {
    let trimmed = stderr.trim();
    if trimmed.is_empty() {
        String::new()
    } else {
        format!("\n--- oracle stderr ---\n{trimmed}")
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_node(node: usize, err: Error) -> Self {
        Error::AtNode {
            node,
            source: Box::new(err),
        }
    }

    /// Strips node context, returning the innermost error.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::AtNode { source, .. } => source.root_cause(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
