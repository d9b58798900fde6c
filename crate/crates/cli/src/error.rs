use serde::Serialize;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Runtime,
}

/// Failure with the config key or stage it belongs to.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{kind:?} error in {context}: {message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub context: String,
    pub message: String,
}

impl CliError {
    pub fn config(context: impl Into<String>, message: impl ToString) -> Self {
        Self {
            kind: ErrorKind::Config,
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn runtime(context: impl Into<String>, message: impl ToString) -> Self {
        Self {
            kind: ErrorKind::Runtime,
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => EXIT_CONFIG,
            ErrorKind::Runtime => EXIT_RUNTIME,
        }
    }

    /// One-line JSON object `{"error": {...}}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}
