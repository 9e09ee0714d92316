use serde::{Deserialize, Serialize};

/// Machine-readable error carried in responses and CLI failures.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct EngineError {
    pub code: String,
    pub message: String,
}

impl EngineError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_owned(),
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("INVALID_CONFIG", message)
    }

    pub fn request(message: impl Into<String>) -> Self {
        Self::new("INVALID_REQUEST", message)
    }
}

impl From<sgr::Error> for EngineError {
    fn from(e: sgr::Error) -> Self {
        Self::new(e.code(), e.to_string())
    }
}
