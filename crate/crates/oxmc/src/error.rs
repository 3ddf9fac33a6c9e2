use std::path::PathBuf;

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum WorkbenchError {
    #[error(transparent)]
    Core(#[from] oxmc_core::Error),
    #[error("{path}: line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: line {line}: missing field `{field}`")]
    MissingField {
        path: String,
        line: usize,
        field: &'static str,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl WorkbenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Core(oxmc_core::Error::InvalidConfig(_))
            | Self::Core(oxmc_core::Error::InvalidRatios(_)) => 1,
            Self::Core(_) | Self::Parse { .. } | Self::MissingField { .. } => 2,
            Self::Io { .. } | Self::Internal(_) => 3,
        }
    }
}
