use std::fmt;
use std::path::Path;

use serde::Serialize;

/// Failure reported on standard error as `{"error": {"code", "message"}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new("invalid_argument", message)
    }

    pub fn missing(path: &Path) -> Self {
        Self::new("missing_file", format!("{} does not exist", path.display()))
    }

    pub fn write(path: &Path, err: impl fmt::Display) -> Self {
        Self::new("write_error", format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with the file that caused it.
    pub fn at(self, path: &Path) -> Self {
        Self {
            message: format!("{}: {}", path.display(), self.message),
            ..self
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<panoptic3d::Error> for CliError {
    fn from(e: panoptic3d::Error) -> Self {
        Self::new(e.code(), e.to_string())
    }
}
