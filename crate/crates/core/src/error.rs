use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("rank-deficient system: {cols} columns but numerical rank {rank}")]
    RankDeficient { cols: usize, rank: usize },

    #[error("{context} violates consistency: residual {residual:e}")]
    Inconsistent { context: &'static str, residual: f64 },

    #[error("solver diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("solver stagnated after {iterations} iterations with relative residual {residual:e}")]
    Stagnated { iterations: usize, residual: f64 },

    #[error("training produced a non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("{context} failed at trial {trial}: {source}")]
    Trial {
        context: &'static str,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
