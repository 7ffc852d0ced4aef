use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid unlearn request: {0}")]
    Request(String),

    #[error("graph invariant violated: {0}")]
    Invariant(String),

    #[error("class {0} has no training nodes")]
    EmptyClass(usize),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("node {0} has no label")]
    Unlabeled(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
