use std::path::PathBuf;

use tailcross::TailError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Tail(#[from] TailError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 estimation failure, 2 usage or input error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::Tail(e) => match e {
                TailError::Domain(_)
                | TailError::InvalidConfig(_)
                | TailError::InsufficientSamples { .. } => 2,
                _ => 1,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
