use std::path::{Path, PathBuf};

use randmesh::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("missing input: {}", .0.display())]
    Missing(PathBuf),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error(transparent)]
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Missing(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Core(_) => 1,
        }
    }

    pub fn from_io(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Missing(path.to_path_buf())
        } else {
            CliError::Core(Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { path, source } => CliError::from_io(&path, source),
            Error::RankDeficient { .. }
            | Error::Diverged { .. }
            | Error::Stagnated { .. }
            | Error::NonFiniteLoss { .. }
            | Error::Inconsistent { .. } => CliError::Numerical(e),
            Error::Trial { ref source, .. } if matches!(CliError::from_ref(source), Some(4)) => CliError::Numerical(e),
            Error::InvalidArgument(msg) => CliError::Config {
                field: "arguments".into(),
                message: msg,
            },
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    fn from_ref(e: &Error) -> Option<i32> {
        matches!(
            e,
            Error::RankDeficient { .. }
                | Error::Diverged { .. }
                | Error::Stagnated { .. }
                | Error::NonFiniteLoss { .. }
                | Error::Inconsistent { .. }
        )
        .then_some(4)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}
