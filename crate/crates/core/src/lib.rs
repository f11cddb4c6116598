//! Multi-hop question answering retrieval toolkit.
//!
//! Implements and benchmarks three document-retrieval strategies over
//! HotpotQA-style 10-paragraph candidate pools — cosine top-k, maximal
//! marginal relevance, and hybrid dense+lexical with MMR re-ranking —
//! plus an iterative query-reformulation loop, constrained answer
//! generation against a local model server (or mock), and Exact Match /
//! F1 / supporting-document recall scoring.
//!
//! Modules:
//! - [`dataset`]: HotpotQA distractor-format ingestion and validation.
//! - [`embedding`]: provider chain with fallback, deterministic offline
//!   embedder, persistent embedding cache.
//! - [`retrieval`]: the three ranking strategies.
//! - [`query_pipeline`]: token labeling and multi-hop query reformulation.
//! - [`generation`]: prompt construction, generation clients, answer
//!   canonicalization.
//! - [`evaluation`]: EM / F1 / support-recall metrics and aggregation.

pub mod dataset;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod generation;
pub mod query_pipeline;
pub mod retrieval;
pub mod text;

pub use dataset::{load_hotpotqa, validate_example, Example, Paragraph};
pub use embedding::{
    deterministic_embed, EmbeddingCache, EmbeddingVector, ProviderChain, ProviderSpec,
    RemoteProviderSpec,
};
pub use error::{Error, Result};
pub use evaluation::{
    aggregate, exact_match, f1_score, normalize_answer, support_recall, EvalRecord, Summary,
};
pub use generation::{
    build_prompt, canonicalize, AnswerKind, CanonicalAnswer, GenConfig, Generator, HttpGenerator,
    MockEntry, MockGenerator, MockMode, MockScript,
};
pub use query_pipeline::{
    build_next_query, label_tokens, run_pipeline, HopState, LabeledToken, PipelineConfig,
    PipelineRun, TerminationReason,
};
pub use retrieval::{
    cosine_similarity, hybrid_retrieve, lexical_overlap, mmr_select, rank_cosine, retrieve,
    RetrievalConfig, RetrievalResult, ScoredDoc, Strategy,
};
