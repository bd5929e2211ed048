use std::path::{Path, PathBuf};

use pdx_itr_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", path.display())]
    Input { path: PathBuf, line: u64, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn input(path: &Path, line: u64, message: impl Into<String>) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for bad inputs or settings, 2 for failures while computing.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input { .. } | CliError::Config(_) => 1,
            CliError::Core(e) => match e {
                CoreError::InvalidInput(_)
                | CoreError::Validation(_)
                | CoreError::DuplicateRecord { .. }
                | CoreError::NotEnoughGenes { .. }
                | CoreError::OutOfRange { .. }
                | CoreError::EmptyFeatureSet
                | CoreError::TooFewTreatments { .. } => 1,
                _ => 2,
            },
            CliError::Io { .. } | CliError::Runtime(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
