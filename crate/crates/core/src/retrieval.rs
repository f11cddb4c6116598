//! The three retrieval strategies over a question's candidate pool.
//!
//! - cosine: rank all candidates by query-document cosine, take the top k.
//! - mmr: greedy maximal marginal relevance, trading relevance against
//!   similarity to already-selected documents via `lambda`.
//! - hybrid: per-document `combined_score = embedding_sim + lexical_score`,
//!   MMR selection with the combined score as the relevance term (document
//!   diversity still uses embedding cosine), then a final re-rank of the
//!   selected set by descending MMR marginal.
//!
//! Pools are 10 documents in the canonical setting, so everything is an
//! exhaustive scan. All ties break toward the lower document index, which
//! keeps every strategy deterministic.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::Paragraph;
use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::text::{default_stopwords, tokenize};

/// Which retrieval strategy to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Cosine,
    Mmr,
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Cosine, Strategy::Mmr, Strategy::Hybrid];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Cosine => "cosine",
            Strategy::Mmr => "mmr",
            Strategy::Hybrid => "hybrid",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "cosine" => Ok(Strategy::Cosine),
            "mmr" => Ok(Strategy::Mmr),
            "hybrid" => Ok(Strategy::Hybrid),
            other => Err(Error::InvalidInput(format!(
                "unknown strategy `{other}` (expected cosine, mmr or hybrid)"
            ))),
        }
    }
}

/// One selected document with its score breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_index: usize,
    pub embedding_sim: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexical_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mmr_marginal: Option<f64>,
}

/// Ordered selection produced by one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub strategy: Strategy,
    pub docs: Vec<ScoredDoc>,
}

impl RetrievalResult {
    pub fn doc_indices(&self) -> Vec<usize> {
        self.docs.iter().map(|d| d.doc_index).collect()
    }
}

/// Strategy plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub strategy: Strategy,
    pub k: usize,
    pub lambda: f64,
    #[serde(default = "default_stopwords")]
    pub stopwords: BTreeSet<String>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Hybrid,
            k: 2,
            lambda: 0.5,
            stopwords: default_stopwords(),
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self, candidates: usize) -> Result<()> {
        if self.k < 1 || self.k > candidates {
            return Err(Error::InvalidInput(format!(
                "k={} out of range for {candidates} candidates",
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidInput(format!(
                "lambda={} outside [0, 1]",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Cosine similarity `dot(a, b) / (|a| * |b|)`, clamped to `[-1, 1]`.
/// Zero-norm vectors compare as 0, so degenerate documents rank last
/// instead of poisoning a run.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    Ok(cosine_raw(&a.values, &b.values))
}

fn cosine_raw(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut norm_a = 0.0;
    let mut norm_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    let denom = norm_a.sqrt() * norm_b.sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (dot / denom).clamp(-1.0, 1.0)
}

fn check_pool(doc_vecs: &[EmbeddingVector], query: &EmbeddingVector, k: usize) -> Result<()> {
    if doc_vecs.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if k < 1 || k > doc_vecs.len() {
        return Err(Error::InvalidInput(format!(
            "k={k} out of range for {} candidates",
            doc_vecs.len()
        )));
    }
    for d in doc_vecs {
        if d.dim != query.dim {
            return Err(Error::DimensionMismatch {
                left: query.dim,
                right: d.dim,
            });
        }
    }
    Ok(())
}

/// Top-k candidates by query-document cosine, descending; ties broken by
/// lower document index.
pub fn rank_cosine(
    query_vec: &EmbeddingVector,
    doc_vecs: &[EmbeddingVector],
    k: usize,
) -> Result<RetrievalResult> {
    check_pool(doc_vecs, query_vec, k)?;
    let mut scored: Vec<(usize, f64)> = doc_vecs
        .iter()
        .enumerate()
        .map(|(i, d)| (i, cosine_raw(&query_vec.values, &d.values)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let docs = scored
        .into_iter()
        .take(k)
        .map(|(doc_index, sim)| ScoredDoc {
            doc_index,
            embedding_sim: sim,
            lexical_score: None,
            combined_score: None,
            mmr_marginal: None,
        })
        .collect();
    Ok(RetrievalResult {
        strategy: Strategy::Cosine,
        docs,
    })
}

/// Greedy maximal marginal relevance selection.
///
/// At each step picks the unselected document maximizing
/// `lambda * rel(d) - (1 - lambda) * max_{s in S} cos(d, s)`, where `rel` is
/// the query-document cosine unless `relevance_override` supplies it (the
/// hybrid strategy passes combined scores). The diversity term over an empty
/// selection is 0, so the first pick is the pure relevance argmax. Output
/// order is selection order; each document carries the marginal it was
/// selected with.
pub fn mmr_select(
    query_vec: &EmbeddingVector,
    doc_vecs: &[EmbeddingVector],
    k: usize,
    lambda: f64,
    relevance_override: Option<&[f64]>,
) -> Result<RetrievalResult> {
    check_pool(doc_vecs, query_vec, k)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!("lambda={lambda} outside [0, 1]")));
    }
    if let Some(rel) = relevance_override {
        if rel.len() != doc_vecs.len() {
            return Err(Error::RelevanceOverrideLength {
                expected: doc_vecs.len(),
                got: rel.len(),
            });
        }
    }
    let query_sims: Vec<f64> = doc_vecs
        .iter()
        .map(|d| cosine_raw(&query_vec.values, &d.values))
        .collect();
    let relevance: &[f64] = relevance_override.unwrap_or(&query_sims);

    let n = doc_vecs.len();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut docs = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let diversity = selected
                .iter()
                .map(|&j| cosine_raw(&doc_vecs[i].values, &doc_vecs[j].values))
                .fold(f64::NEG_INFINITY, f64::max);
            let diversity = if selected.is_empty() { 0.0 } else { diversity };
            let marginal = lambda * relevance[i] - (1.0 - lambda) * diversity;
            // Strict comparison keeps the lowest index on ties.
            if best.map_or(true, |(_, m)| marginal > m) {
                best = Some((i, marginal));
            }
        }
        let (idx, marginal) = best.expect("k <= n leaves a candidate");
        taken[idx] = true;
        selected.push(idx);
        docs.push(ScoredDoc {
            doc_index: idx,
            embedding_sim: query_sims[idx],
            lexical_score: None,
            combined_score: None,
            mmr_marginal: Some(marginal),
        });
    }
    Ok(RetrievalResult {
        strategy: Strategy::Mmr,
        docs,
    })
}

/// Fraction of the query's content terms that appear in the document:
/// `|Q ∩ D| / |Q|` over lowercased, stopword-filtered, deduplicated token
/// sets. Returns 0 when the query has no content terms.
pub fn lexical_overlap(query: &str, doc: &str, stopwords: &BTreeSet<String>) -> f64 {
    let query_terms: BTreeSet<String> = tokenize(query)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect();
    if query_terms.is_empty() {
        return 0.0;
    }
    let doc_terms: BTreeSet<String> = tokenize(doc)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect();
    let matched = query_terms.intersection(&doc_terms).count();
    matched as f64 / query_terms.len() as f64
}

/// The five-step hybrid strategy: embedding similarity per document,
/// lexical overlap of the query against title plus body, combined score as
/// their sum, MMR selection using combined scores as relevance (embedding
/// cosine for document-document diversity), and a final re-rank of the
/// selection by descending MMR marginal.
pub fn hybrid_retrieve(
    query: &str,
    query_vec: &EmbeddingVector,
    docs: &[Paragraph],
    doc_vecs: &[EmbeddingVector],
    cfg: &RetrievalConfig,
) -> Result<RetrievalResult> {
    if docs.len() != doc_vecs.len() {
        return Err(Error::InvalidInput(format!(
            "{} paragraphs but {} vectors",
            docs.len(),
            doc_vecs.len()
        )));
    }
    cfg.validate(docs.len())?;
    let lexical: Vec<f64> = docs
        .iter()
        .map(|p| lexical_overlap(query, &p.full_text(), &cfg.stopwords))
        .collect();
    let query_sims: Vec<f64> = doc_vecs
        .iter()
        .map(|d| cosine_raw(&query_vec.values, &d.values))
        .collect();
    let combined: Vec<f64> = query_sims
        .iter()
        .zip(&lexical)
        .map(|(e, l)| e + l)
        .collect();
    let mut result = mmr_select(query_vec, doc_vecs, cfg.k, cfg.lambda, Some(&combined))?;
    for doc in &mut result.docs {
        doc.lexical_score = Some(lexical[doc.doc_index]);
        doc.combined_score = Some(combined[doc.doc_index]);
    }
    result
        .docs
        .sort_by(|a, b| {
            let ma = a.mmr_marginal.expect("mmr_select sets marginals");
            let mb = b.mmr_marginal.expect("mmr_select sets marginals");
            mb.total_cmp(&ma).then(a.doc_index.cmp(&b.doc_index))
        });
    result.strategy = Strategy::Hybrid;
    Ok(result)
}

/// Runs the configured strategy. `query` text is only consulted by the
/// hybrid strategy's lexical stage.
pub fn retrieve(
    query: &str,
    query_vec: &EmbeddingVector,
    docs: &[Paragraph],
    doc_vecs: &[EmbeddingVector],
    cfg: &RetrievalConfig,
) -> Result<RetrievalResult> {
    match cfg.strategy {
        Strategy::Cosine => rank_cosine(query_vec, doc_vecs, cfg.k),
        Strategy::Mmr => mmr_select(query_vec, doc_vecs, cfg.k, cfg.lambda, None),
        Strategy::Hybrid => hybrid_retrieve(query, query_vec, docs, doc_vecs, cfg),
    }
}
