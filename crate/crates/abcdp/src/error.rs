use std::path::PathBuf;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Errors surfaced by the harness and the CLI.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Bad configuration or input; `field` is a dotted path into the config.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },

    #[error(transparent)]
    Core(#[from] abcdp_core::Error),
}

impl HarnessError {
    pub fn validation(field: impl Into<String>, message: impl ToString) -> Self {
        HarnessError::Validation { field: field.into(), message: message.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// Process exit status: 2 for validation and usage errors, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation { .. } | HarnessError::Usage(_) => 2,
            _ => 3,
        }
    }
}
