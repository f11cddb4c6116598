//! Document and query embeddings.
//!
//! Embeddings come from a prioritized [`ProviderChain`]: typically a remote
//! model server first, with a deterministic offline embedder as the last
//! resort so evaluations and tests run with no model server at all. The
//! chain advances on failure and pins itself to the first provider that
//! succeeds, so one run never mixes vectors from different models.

mod cache;
mod provider;

pub use cache::EmbeddingCache;
pub use provider::{ProviderChain, ProviderSpec, RemoteProviderSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

/// A fixed-dimension embedding tagged with the provider and model that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub dim: usize,
    pub provider_id: String,
    pub model_id: String,
}

impl EmbeddingVector {
    /// Builds a vector, checking that it is non-empty and finite.
    pub fn new(
        values: Vec<f64>,
        provider_id: impl Into<String>,
        model_id: impl Into<String>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("embedding vector is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "embedding vector contains non-finite values".into(),
            ));
        }
        let dim = values.len();
        Ok(Self {
            values,
            dim,
            provider_id: provider_id.into(),
            model_id: model_id.into(),
        })
    }

    /// True when every component is zero. Zero vectors arise from texts with
    /// no tokens and are not normalizable; cosine against them is defined
    /// as 0.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded FNV-1a over the token bytes. A hand-rolled hash keeps bucket
/// assignment stable across platforms and Rust versions.
fn token_bucket(token: &str, seed: u64, dim: usize) -> usize {
    let mut h = FNV_OFFSET ^ seed;
    for byte in token.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(FNV_PRIME);
    }
    (h % dim as u64) as usize
}

/// Deterministic hashed bag-of-words embedder: tokenize, hash each token
/// into one of `dim` buckets, accumulate counts, L2-normalize. A text with
/// no tokens embeds to the zero vector (see [`EmbeddingVector::is_zero`]).
///
/// Pure function of `(text, dim, seed)`; this is the offline provider and
/// the test oracle for everything built on embeddings.
pub fn deterministic_embed(text: &str, dim: usize, seed: u64) -> EmbeddingVector {
    assert!(dim >= 8, "deterministic embedder requires dim >= 8");
    let mut values = vec![0.0_f64; dim];
    for token in tokenize(text) {
        values[token_bucket(&token, seed, dim)] += 1.0;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    EmbeddingVector {
        values,
        dim,
        provider_id: provider::DETERMINISTIC_PROVIDER_ID.to_string(),
        model_id: provider::deterministic_model_id(dim, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_embed_is_deterministic() {
        let a = deterministic_embed("the cat sat", 64, 7);
        let b = deterministic_embed("the cat sat", 64, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn nonzero_result_is_unit_norm() {
        let v = deterministic_embed("alpha beta gamma", 256, 42);
        assert!((v.l2_norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bag_of_words_ignores_order() {
        let a = deterministic_embed("alpha beta", 128, 1);
        let b = deterministic_embed("beta alpha", 128, 1);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn empty_text_embeds_to_flagged_zero_vector() {
        let v = deterministic_embed("", 32, 0);
        assert!(v.is_zero());
        assert_eq!(v.dim, 32);
    }

    #[test]
    fn seed_changes_the_embedding() {
        let a = deterministic_embed("alpha beta gamma delta", 64, 1);
        let b = deterministic_embed("alpha beta gamma delta", 64, 2);
        assert_ne!(a.values, b.values);
    }

    #[test]
    fn vector_constructor_rejects_non_finite() {
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN], "p", "m").is_err());
        assert!(EmbeddingVector::new(vec![], "p", "m").is_err());
    }
}
