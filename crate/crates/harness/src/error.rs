use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Unreadable or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] schrostrip::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

impl HarnessError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 3 for numerical failures, 2 for everything caused
    /// by the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Solver(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
