//! Iterative query reformulation without generation-model calls.
//!
//! A heuristic labeler marks salient tokens in retrieved passages
//! (entity-like tokens, boosted when they co-occur with question terms) and
//! a filter builds the next hop's query from them. Retrieval repeats up to a
//! hop limit, accumulating documents; the final answer context is the
//! accumulated set re-ranked by the configured strategy. Every hop is
//! recorded in a serializable trace so retrieval chains stay inspectable.
//!
//! The labeler and filter are deliberately small pure functions behind this
//! module's surface; a learned salience model can replace [`label_tokens`]
//! without touching the loop.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{Example, Paragraph};
use crate::embedding::{EmbeddingCache, ProviderChain};
use crate::error::Result;
use crate::retrieval::{retrieve, RetrievalConfig, RetrievalResult};
use crate::text::{default_stopwords, tokenize, tokenize_cased};

/// Weight for entity-like tokens (capitalized in the original text, or
/// numeric).
const ENTITY_WEIGHT: f64 = 0.6;
/// Weight for tokens whose sentence also contains a question term.
const COOCCURRENCE_WEIGHT: f64 = 0.4;
/// At most this many fresh tokens extend the next hop's query.
const MAX_QUERY_TOKENS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_hops: usize,
    pub salience_threshold: f64,
    pub docs_per_hop: usize,
    #[serde(default = "default_stopwords")]
    pub stopwords: BTreeSet<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_hops: 2,
            salience_threshold: 0.5,
            docs_per_hop: 2,
            stopwords: default_stopwords(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_hops < 1 {
            return Err(crate::error::Error::InvalidInput(
                "max_hops must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.salience_threshold) {
            return Err(crate::error::Error::InvalidInput(format!(
                "salience_threshold={} outside [0, 1]",
                self.salience_threshold
            )));
        }
        if self.docs_per_hop < 1 {
            return Err(crate::error::Error::InvalidInput(
                "docs_per_hop must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Why the hop loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    MaxHops,
    NoNewTokens,
    NoNewDocs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledToken {
    pub token: String,
    pub salience: f64,
}

/// One hop of the loop, for the explain trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopState {
    pub hop_index: usize,
    pub current_query: String,
    pub labeled_tokens: Vec<LabeledToken>,
    pub retrieved: RetrievalResult,
    pub accumulated_doc_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminated: Option<TerminationReason>,
}

/// Final selection plus the per-hop trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub final_result: RetrievalResult,
    pub trace: Vec<HopState>,
}

struct TokenEntry {
    original: String,
    first_pos: usize,
    entity_like: bool,
    cooccurs: bool,
}

fn is_entity_like(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
        || token.chars().all(|c| c.is_ascii_digit())
}

/// Labels salient tokens in a passage: unique non-stopword tokens scored
/// `0.6 * entity_like + 0.4 * cooccurs_with_question_term`, keeping those at
/// or above the threshold, sorted by salience then first occurrence. Tokens
/// already present in the question are never labeled — they add nothing to
/// a follow-up query.
pub fn label_tokens(
    question: &str,
    passage: &Paragraph,
    cfg: &PipelineConfig,
) -> Vec<LabeledToken> {
    let question_terms: BTreeSet<String> = tokenize(question)
        .into_iter()
        .filter(|t| !cfg.stopwords.contains(t))
        .collect();
    let mut order: Vec<String> = Vec::new();
    let mut entries: std::collections::HashMap<String, TokenEntry> =
        std::collections::HashMap::new();
    let mut pos = 0;
    for sentence in &passage.sentences {
        let cased = tokenize_cased(sentence);
        let lowered: Vec<String> = cased.iter().map(|t| t.to_lowercase()).collect();
        let sentence_has_question_term = lowered.iter().any(|t| question_terms.contains(t));
        for (original, lower) in cased.iter().zip(&lowered) {
            pos += 1;
            if cfg.stopwords.contains(lower) || question_terms.contains(lower) {
                continue;
            }
            let entry = entries.entry(lower.clone()).or_insert_with(|| {
                order.push(lower.clone());
                TokenEntry {
                    original: (*original).to_string(),
                    first_pos: pos,
                    entity_like: false,
                    cooccurs: false,
                }
            });
            entry.entity_like |= is_entity_like(original);
            entry.cooccurs |= sentence_has_question_term;
        }
    }
    let mut labeled: Vec<(LabeledToken, usize)> = order
        .into_iter()
        .filter_map(|lower| {
            let entry = &entries[&lower];
            let salience = ENTITY_WEIGHT * f64::from(entry.entity_like as u8)
                + COOCCURRENCE_WEIGHT * f64::from(entry.cooccurs as u8);
            (salience >= cfg.salience_threshold).then(|| {
                (
                    LabeledToken {
                        token: entry.original.clone(),
                        salience,
                    },
                    entry.first_pos,
                )
            })
        })
        .collect();
    labeled.sort_by(|a, b| b.0.salience.total_cmp(&a.0.salience).then(a.1.cmp(&b.1)));
    labeled.into_iter().map(|(t, _)| t).collect()
}

/// Builds the next hop's query: the original question followed by the top
/// labeled tokens not already present in the prior query (at most
/// [`MAX_QUERY_TOKENS`]). Returns the prior query unchanged when no new
/// token qualifies, which signals termination upstream.
pub fn build_next_query(
    original_question: &str,
    labeled: &[LabeledToken],
    prior_query: &str,
) -> String {
    let prior_terms: BTreeSet<String> = tokenize(prior_query).into_iter().collect();
    let fresh: Vec<&str> = labeled
        .iter()
        .filter(|t| !prior_terms.contains(&t.token.to_lowercase()))
        .take(MAX_QUERY_TOKENS)
        .map(|t| t.token.as_str())
        .collect();
    if fresh.is_empty() {
        return prior_query.to_string();
    }
    format!("{original_question} {}", fresh.join(" "))
}

/// Merges per-document label lists, keeping each token's first appearance
/// order and its maximum salience, then re-sorting by salience.
fn merge_labels(per_doc: Vec<Vec<LabeledToken>>) -> Vec<LabeledToken> {
    let mut merged: Vec<LabeledToken> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for labels in per_doc {
        for label in labels {
            let key = label.token.to_lowercase();
            match index.get(&key) {
                Some(&i) => {
                    if label.salience > merged[i].salience {
                        merged[i].salience = label.salience;
                    }
                }
                None => {
                    index.insert(key, merged.len());
                    merged.push(label);
                }
            }
        }
    }
    // Stable sort preserves encounter order among equal saliences.
    merged.sort_by(|a, b| b.salience.total_cmp(&a.salience));
    merged
}

/// Runs the hop loop for one example.
///
/// Hop 0 retrieves `docs_per_hop` documents for the raw question; each later
/// hop labels tokens from the newly retrieved documents, reformulates the
/// query and retrieves again, merging new document indices. The loop stops
/// at `max_hops`, when reformulation yields no new tokens, or when a hop
/// adds no new documents. The final result re-ranks the accumulated set
/// with the configured strategy at its own `k`, under the last hop's query.
///
/// The pipeline touches only the embedding chain — never a generation
/// client.
pub fn run_pipeline(
    example: &Example,
    retrieval_cfg: &RetrievalConfig,
    chain: &ProviderChain,
    cache: &EmbeddingCache,
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    cfg.validate()?;
    let pool = &example.paragraphs;
    let pool_texts: Vec<String> = pool.iter().map(Paragraph::full_text).collect();
    let pool_refs: Vec<&str> = pool_texts.iter().map(String::as_str).collect();
    let doc_vecs = cache.get_or_embed_batch(chain, &pool_refs)?;

    let hop_cfg = RetrievalConfig {
        strategy: retrieval_cfg.strategy,
        k: cfg.docs_per_hop.min(pool.len()),
        lambda: retrieval_cfg.lambda,
        stopwords: retrieval_cfg.stopwords.clone(),
    };

    let mut query = example.question.clone();
    let mut accumulated: Vec<usize> = Vec::new();
    let mut trace: Vec<HopState> = Vec::new();

    for hop_index in 0..cfg.max_hops {
        let query_vec = cache.get_or_embed(chain, &query)?;
        let retrieved = retrieve(&query, &query_vec, pool, &doc_vecs, &hop_cfg)?;
        let new_indices: Vec<usize> = retrieved
            .doc_indices()
            .into_iter()
            .filter(|i| !accumulated.contains(i))
            .collect();
        accumulated.extend(&new_indices);

        let mut state = HopState {
            hop_index,
            current_query: query.clone(),
            labeled_tokens: Vec::new(),
            retrieved,
            accumulated_doc_indices: accumulated.clone(),
            terminated: None,
        };
        if hop_index + 1 == cfg.max_hops {
            state.terminated = Some(TerminationReason::MaxHops);
            trace.push(state);
            break;
        }
        if new_indices.is_empty() {
            state.terminated = Some(TerminationReason::NoNewDocs);
            trace.push(state);
            break;
        }
        let labeled = merge_labels(
            new_indices
                .iter()
                .map(|&i| label_tokens(&example.question, &pool[i], cfg))
                .collect(),
        );
        state.labeled_tokens = labeled.clone();
        let next_query = build_next_query(&example.question, &labeled, &query);
        if next_query == query {
            state.terminated = Some(TerminationReason::NoNewTokens);
            trace.push(state);
            break;
        }
        trace.push(state);
        query = next_query;
    }

    let final_query = trace
        .last()
        .map(|s| s.current_query.clone())
        .unwrap_or_else(|| example.question.clone());
    let final_vec = cache.get_or_embed(chain, &final_query)?;
    let subset_pars: Vec<Paragraph> = accumulated.iter().map(|&i| pool[i].clone()).collect();
    let subset_vecs: Vec<_> = accumulated.iter().map(|&i| doc_vecs[i].clone()).collect();
    let final_cfg = RetrievalConfig {
        strategy: retrieval_cfg.strategy,
        k: retrieval_cfg.k.min(accumulated.len()),
        lambda: retrieval_cfg.lambda,
        stopwords: retrieval_cfg.stopwords.clone(),
    };
    let mut final_result = retrieve(
        &final_query,
        &final_vec,
        &subset_pars,
        &subset_vecs,
        &final_cfg,
    )?;
    for doc in &mut final_result.docs {
        doc.doc_index = accumulated[doc.doc_index];
    }

    Ok(PipelineRun {
        final_result,
        trace,
    })
}
