use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid scenario field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("scenario `{scenario}` requires metric `{expected}`, found `{found}`")]
    WrongMetric {
        scenario: String,
        expected: String,
        found: String,
    },
    #[error("scenario `{scenario}`: {source}")]
    Module {
        scenario: String,
        #[source]
        source: lightray_core::Error,
    },
    #[error("coverage manifest mismatch: {0}")]
    Coverage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
