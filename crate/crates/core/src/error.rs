use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown value name {0:?}")]
    UnknownValue(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty profile: total value mentions is zero")]
    EmptyProfile,
    #[error("undefined {metric}: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },
    #[error("empty group after filtering")]
    EmptyGroup,
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("training diverged at epoch {epoch} (loss {loss}); try a smaller learning rate than {lr}")]
    Diverged { epoch: usize, loss: f64, lr: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
