use std::path::{Path, PathBuf};

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] narmsr::Error),
    #[error("serialising {what}: {source}")]
    Json {
        what: String,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// 0 ok, 1 usage/config, 2 I/O, 3 numerical.
    pub fn exit_code(&self) -> u8 {
        use narmsr::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Json { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidInput(_) | E::Config(_) | E::Unsupported(_) => 1,
                E::Io(_) | E::Codec(_) => 2,
                E::IllConditioned(_) | E::Numerical(_) => 3,
            },
        }
    }
}

pub trait IoContext<T> {
    fn at(self, path: &Path) -> CliResult<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &Path) -> CliResult<T> {
        self.map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
