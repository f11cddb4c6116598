//! Property-based invariants for the retrieval, metric and generation
//! primitives, checked against randomized inputs and independent oracles.

use std::collections::BTreeSet;

use proptest::prelude::*;

use hopqa_core::evaluation::{exact_match, f1_score, normalize_answer};
use hopqa_core::generation::canonicalize;
use hopqa_core::retrieval::{
    cosine_similarity, lexical_overlap, mmr_select, rank_cosine,
};
use hopqa_core::text::default_stopwords;
use hopqa_core::EmbeddingVector;

fn vector(values: Vec<f64>) -> EmbeddingVector {
    EmbeddingVector::new(values, "prop", "prop").unwrap()
}

fn arb_values(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0_f64..10.0, dim..=dim)
}

fn arb_pool(dim: usize, max_docs: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(arb_values(dim), 1..=max_docs)
}

// ── Independent MMR oracle ──────────────────────────────────────────────
//
// A from-scratch greedy reimplementation used only as a test oracle. It
// shares the tie rule (lower index wins) and the arithmetic shape of the
// marginal, but none of the implementation's data flow.

fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
    }
    let mut na = 0.0;
    for x in a {
        na += x * x;
    }
    let mut nb = 0.0;
    for y in b {
        nb += y * y;
    }
    let denom = na.sqrt() * nb.sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (dot / denom).clamp(-1.0, 1.0)
}

fn oracle_mmr(
    query: &[f64],
    docs: &[Vec<f64>],
    k: usize,
    lambda: f64,
    relevance_override: Option<&[f64]>,
) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..docs.len()).collect();
    let mut picked: Vec<usize> = Vec::new();
    while picked.len() < k {
        let mut best_idx = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for &candidate in &remaining {
            let relevance = match relevance_override {
                Some(overrides) => overrides[candidate],
                None => oracle_cosine(query, &docs[candidate]),
            };
            let mut worst_redundancy = f64::NEG_INFINITY;
            for &chosen in &picked {
                let sim = oracle_cosine(&docs[candidate], &docs[chosen]);
                if sim > worst_redundancy {
                    worst_redundancy = sim;
                }
            }
            if picked.is_empty() {
                worst_redundancy = 0.0;
            }
            let score = lambda * relevance - (1.0 - lambda) * worst_redundancy;
            if score > best_score || (score == best_score && candidate < best_idx) {
                best_score = score;
                best_idx = candidate;
            }
        }
        picked.push(best_idx);
        remaining.retain(|&i| i != best_idx);
    }
    picked
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cosine_is_symmetric_and_scale_invariant(
        a in arb_values(8),
        b in arb_values(8),
        scale in 0.01_f64..100.0,
    ) {
        let va = vector(a.clone());
        let vb = vector(b.clone());
        let ab = cosine_similarity(&va, &vb).unwrap();
        let ba = cosine_similarity(&vb, &va).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
        let scaled = vector(a.iter().map(|x| x * scale).collect());
        let sab = cosine_similarity(&scaled, &vb).unwrap();
        prop_assert!((ab - sab).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn mmr_lambda_one_matches_rank_cosine_exactly(
        pool in arb_pool(8, 10),
        query in arb_values(8),
    ) {
        let q = vector(query);
        let docs: Vec<EmbeddingVector> = pool.into_iter().map(vector).collect();
        let k = docs.len();
        let mmr = mmr_select(&q, &docs, k, 1.0, None).unwrap();
        let cosine = rank_cosine(&q, &docs, k).unwrap();
        prop_assert_eq!(mmr.doc_indices(), cosine.doc_indices());
    }

    #[test]
    fn mmr_matches_brute_force_oracle(
        pool in arb_pool(8, 10),
        query in arb_values(8),
        k_raw in 1_usize..=3,
        lambda_idx in 0_usize..4,
    ) {
        let lambda = [0.0, 0.25, 0.5, 1.0][lambda_idx];
        let k = k_raw.min(pool.len());
        let q = vector(query.clone());
        let docs: Vec<EmbeddingVector> = pool.iter().cloned().map(vector).collect();
        let got = mmr_select(&q, &docs, k, lambda, None).unwrap();
        let expected = oracle_mmr(&query, &pool, k, lambda, None);
        prop_assert_eq!(got.doc_indices(), expected);
    }

    #[test]
    fn mmr_marginals_match_selection_invariants(
        pool in arb_pool(8, 8),
        query in arb_values(8),
    ) {
        let q = vector(query);
        let docs: Vec<EmbeddingVector> = pool.into_iter().map(vector).collect();
        let k = docs.len().min(3);
        let result = mmr_select(&q, &docs, k, 0.5, None).unwrap();
        let indices = result.doc_indices();
        let unique: BTreeSet<usize> = indices.iter().copied().collect();
        prop_assert_eq!(unique.len(), indices.len());
        for doc in &result.docs {
            prop_assert!(doc.mmr_marginal.is_some());
        }
    }

    #[test]
    fn lexical_overlap_bounded_and_monotone(
        query_terms in prop::collection::vec("[a-z]{3,8}", 1..6),
        doc_terms in prop::collection::vec("[a-z]{3,8}", 0..10),
        extra_pick in 0_usize..5,
    ) {
        let stop = default_stopwords();
        let query = query_terms.join(" ");
        let doc = doc_terms.join(" ");
        let base = lexical_overlap(&query, &doc, &stop);
        prop_assert!((0.0..=1.0).contains(&base));
        // Appending a matching query term never lowers the score.
        let added = &query_terms[extra_pick % query_terms.len()];
        let grown = format!("{doc} {added}");
        let after = lexical_overlap(&query, &grown, &stop);
        prop_assert!(after >= base - 1e-15);
    }

    #[test]
    fn f1_symmetric_and_em_implies_f1(
        a in "[a-zA-Z ,.!]{0,40}",
        b in "[a-zA-Z ,.!]{0,40}",
    ) {
        let f_ab = f1_score(&a, &b);
        let f_ba = f1_score(&b, &a);
        prop_assert!((f_ab - f_ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&f_ab));
        prop_assert_eq!(f1_score(&a, &a), 1.0);
        if exact_match(&a, &b) == 1 {
            prop_assert_eq!(f_ab, 1.0);
        }
    }

    #[test]
    fn normalize_answer_is_idempotent_and_clean(s in "\\PC{0,60}") {
        let once = normalize_answer(&s);
        prop_assert_eq!(normalize_answer(&once), once.clone());
        prop_assert!(!once.contains("  "));
        prop_assert!(!once.chars().any(|c| c.is_ascii_punctuation()));
    }

    #[test]
    fn canonicalize_is_idempotent_and_lowercase(raw in "\\PC{0,60}") {
        let once = canonicalize(&raw);
        let twice = canonicalize(&once.text);
        prop_assert_eq!(&once.text, &twice.text);
        // Lowercasing is a fixpoint (some code points have no lowercase form).
        prop_assert_eq!(once.text.to_lowercase(), once.text.clone());
    }
}
