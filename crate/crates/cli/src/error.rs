use std::path::PathBuf;

use hardy_lab::LabError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Lab(#[from] LabError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn unwritable(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Unwritable { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Unwritable { .. } => EXIT_UNWRITABLE,
            // malformed inputs that only the library can recognise
            Self::Lab(LabError::Parse(_)) => EXIT_USAGE,
            Self::Lab(_) => EXIT_ERROR,
        }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_UNWRITABLE: i32 = 73;

pub type Result<T> = std::result::Result<T, CliError>;
