use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] rwde_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        LabError::Data {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        use rwde_core::Error as E;
        match self {
            LabError::Config(_) => "config",
            LabError::Core(e) if e.is_configuration() => "config",
            LabError::Core(E::Budget { .. } | E::SizeCap { .. } | E::SiteBudget { .. }) => "budget",
            LabError::Core(_) => "runtime",
            LabError::Io { .. } => "io",
            LabError::Data { .. } => "data",
        }
    }

    /// 2 for configuration errors, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> u8 {
        match self.kind() {
            "config" => 2,
            _ => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        })
    }
}
