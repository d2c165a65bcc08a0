use lab_core::schema::SchemaError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("manifest {path}: {reason}")]
    Manifest { path: String, reason: String },
    #[error("{experiment} has no output kind `{kind}`; available: {}", available.join(", "))]
    UnsupportedOutput {
        experiment: String,
        kind: String,
        available: Vec<String>,
    },
    #[error("{0}")]
    Encode(String),
    #[error("{experiment} failed: {message}")]
    Experiment { experiment: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn experiment(experiment: &str, err: impl std::fmt::Display) -> Self {
        CliError::Experiment {
            experiment: experiment.into(),
            message: err.to_string(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit status: 2 for invalid input, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::Manifest { .. } | CliError::UnsupportedOutput { .. } => 2,
            _ => 1,
        }
    }

    /// Machine-readable form printed on standard error.
    pub fn to_json(&self) -> Value {
        match self {
            CliError::Schema(e) => {
                let mut v = serde_json::to_value(e).unwrap_or_else(|_| json!({}));
                v["message"] = json!(e.to_string());
                v
            }
            CliError::UnsupportedOutput { kind, .. } => json!({
                "error": "unsupported_output",
                "field": kind,
                "message": self.to_string(),
            }),
            CliError::Manifest { .. } => json!({"error": "manifest", "message": self.to_string()}),
            CliError::Encode(_) => json!({"error": "encode", "message": self.to_string()}),
            CliError::Experiment { .. } => json!({"error": "experiment_failed", "message": self.to_string()}),
            CliError::Io { .. } => json!({"error": "io", "message": self.to_string()}),
            CliError::Threads(_) => json!({"error": "threads", "message": self.to_string()}),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
