use thiserror::Error;

use crate::graph::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed instance key `{0}` (expected `category.N`)")]
    KeyFormat(String),
    #[error("no embedding for key `{0}`")]
    MissingEmbedding(String),
    #[error("embedding provider unavailable at {endpoint} after {attempts} attempt(s): {message}")]
    ProviderUnavailable {
        endpoint: String,
        attempts: u32,
        message: String,
    },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("invalid vector: {0}")]
    InvalidVector(String),
    #[error("empty input")]
    EmptyInput,
    #[error("empty batch")]
    EmptyBatch,
    #[error("cannot serialize invalid graph ({} violation(s))", .0.len())]
    SerializeInvalidGraph(Vec<Violation>),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("group has {0} sample(s); at least 2 required")]
    GroupTooSmall(usize),
    #[error("log-prob sequences differ in length: {new} vs {old}")]
    LenMismatch { new: usize, old: usize },
    #[error("empty log-prob sequence")]
    EmptySequence,
    #[error("predicate vocabulary has {0} entries; at least 4 required")]
    VocabTooSmall(usize),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("embedding ingestion failed at line {line}: {message}")]
    Ingestion { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::KeyFormat(_) => "KEY_FORMAT",
            Error::MissingEmbedding(_) => "MISSING_EMBEDDING",
            Error::ProviderUnavailable { .. } => "PROVIDER_UNAVAILABLE",
            Error::DimMismatch { .. } => "DIM_MISMATCH",
            Error::InvalidVector(_) => "INVALID_VECTOR",
            Error::EmptyInput => "EMPTY_INPUT",
            Error::EmptyBatch => "EMPTY_BATCH",
            Error::SerializeInvalidGraph(_) => "SERIALIZE_INVALID_GRAPH",
            Error::UnknownPredicate(_) => "UNKNOWN_PREDICATE",
            Error::GroupTooSmall(_) => "GROUP_TOO_SMALL",
            Error::LenMismatch { .. } => "LEN_MISMATCH",
            Error::EmptySequence => "EMPTY_SEQUENCE",
            Error::VocabTooSmall(_) => "VOCAB_TOO_SMALL",
            Error::InvalidProfile(_) => "INVALID_PROFILE",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::Ingestion { .. } => "INGESTION",
            Error::Io(_) => "IO",
            Error::Json(_) => "JSON",
        }
    }
}
