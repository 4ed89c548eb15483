use std::path::PathBuf;

use serde_json::json;

/// Failures, split into validation problems (exit 1) and runtime problems (exit 2).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("configuration section `{0}` is required for this command")]
    MissingSection(&'static str),
    #[error(transparent)]
    Model(#[from] drmc::DrError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl CliError {
    pub fn is_validation(&self) -> bool {
        match self {
            CliError::UnknownKeys(_) | CliError::Config(_) | CliError::MissingSection(_) => true,
            CliError::Model(e) => matches!(
                e,
                drmc::DrError::InvalidParameter { .. }
                    | drmc::DrError::DimensionMismatch { .. }
                    | drmc::DrError::Divergent { .. }
            ),
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let kind = if self.is_validation() { "validation" } else { "runtime" };
        let mut v = json!({ "error": kind, "message": self.to_string() });
        if let CliError::UnknownKeys(keys) = self {
            v["keys"] = json!(keys);
        }
        v
    }
}
