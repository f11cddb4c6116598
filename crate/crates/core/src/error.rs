//! Error type shared by all core modules.

use thiserror::Error;

/// Errors produced by the retrieval, embedding, generation and evaluation
/// modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("record {index}: missing or invalid field `{field}`")]
    MalformedRecord { index: usize, field: &'static str },

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("all embedding providers failed: {}", .causes.join("; "))]
    ChainExhausted { causes: Vec<String> },

    #[error("provider `{provider_id}` failed after being pinned for this run: {cause}")]
    ProviderFailedAfterPin { provider_id: String, cause: String },

    #[error("http request to {url} failed: {cause}")]
    Http { url: String, cause: String },

    #[error("malformed response from {url}: {cause}")]
    MalformedResponse { url: String, cause: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no candidate documents to rank")]
    EmptyCandidates,

    #[error("relevance override has length {got}, expected {expected}")]
    RelevanceOverrideLength { expected: usize, got: usize },

    #[error("embedding cache error: {0}")]
    Cache(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("no records to aggregate")]
    EmptyRecords,
}

pub type Result<T> = std::result::Result<T, Error>;
