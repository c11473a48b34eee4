use std::path::{Path, PathBuf};

/// Pipeline failure carrying the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{0}")]
    NonConvergence(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] portres_core::Error),

    #[error("{0}")]
    Other(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::MissingInput(_) => 2,
            PipelineError::Validation(_) | PipelineError::Core(_) => 3,
            PipelineError::NonConvergence(_) => 4,
            PipelineError::Io { .. } | PipelineError::Other(_) => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            return PipelineError::MissingInput(path.to_path_buf());
        }
        PipelineError::Io {
            context: path.display().to_string(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        PipelineError::Validation(msg.into())
    }
}

impl From<csv::Error> for PipelineError {
    fn from(e: csv::Error) -> Self {
        PipelineError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for PipelineError {
    fn from(e: serde_json::Error) -> Self {
        PipelineError::Validation(e.to_string())
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
