//! Exact Match, token-level F1 and supporting-document recall.
//!
//! Answers are normalized SQuAD-style (lowercase, strip punctuation, drop
//! the articles a/an/the, collapse whitespace) before comparison; the same
//! normalization backs both metrics so they can never disagree about what
//! an answer "is". F1 uses count-aware multiset token overlap.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::retrieval::RetrievalResult;

/// Lowercase, remove punctuation characters, drop standalone articles,
/// collapse whitespace runs, trim.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    no_punct
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1 iff the normalized prediction equals the normalized gold answer.
pub fn exact_match(pred: &str, gold: &str) -> u8 {
    u8::from(normalize_answer(pred) == normalize_answer(gold))
}

fn token_counts(s: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for token in normalize_answer(s).split_whitespace() {
        *counts.entry(token.to_string()).or_insert(0) += 1;
    }
    counts
}

/// Harmonic mean of precision and recall over multiset token overlap of the
/// normalized answers. Both empty: 1.0; exactly one empty: 0.0.
pub fn f1_score(pred: &str, gold: &str) -> f64 {
    let pred_counts = token_counts(pred);
    let gold_counts = token_counts(gold);
    let pred_total: usize = pred_counts.values().sum();
    let gold_total: usize = gold_counts.values().sum();
    if pred_total == 0 && gold_total == 0 {
        return 1.0;
    }
    if pred_total == 0 || gold_total == 0 {
        return 0.0;
    }
    let overlap: usize = pred_counts
        .iter()
        .map(|(token, count)| count.min(gold_counts.get(token).unwrap_or(&0)))
        .sum();
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred_total as f64;
    let recall = overlap as f64 / gold_total as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Fraction of the example's gold supporting titles present among the
/// retrieved documents. Title-level document identity, not sentence-level
/// supporting facts.
pub fn support_recall(retrieved: &RetrievalResult, example: &Example) -> f64 {
    let total = example.supporting_titles.len();
    if total == 0 {
        log::warn!(
            "example {}: no supporting titles, support recall is vacuously 1",
            example.id
        );
        return 1.0;
    }
    let hit = retrieved
        .docs
        .iter()
        .filter_map(|d| example.paragraphs.get(d.doc_index))
        .filter(|p| example.supporting_titles.contains(&p.title))
        .count();
    hit as f64 / total as f64
}

/// Per-question outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub strategy: String,
    pub prediction: String,
    pub gold: String,
    pub em: u8,
    pub f1: f64,
    pub support_recall: f64,
}

/// Per-strategy aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub strategy: String,
    pub n: usize,
    pub em_mean: f64,
    pub f1_mean: f64,
    pub support_recall_mean: f64,
}

/// Groups records by strategy and reports arithmetic means, ordered by
/// strategy name.
pub fn aggregate(records: &[EvalRecord]) -> Result<Vec<Summary>> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut groups: std::collections::BTreeMap<&str, (usize, f64, f64, f64)> =
        std::collections::BTreeMap::new();
    for record in records {
        let entry = groups.entry(&record.strategy).or_insert((0, 0.0, 0.0, 0.0));
        entry.0 += 1;
        entry.1 += f64::from(record.em);
        entry.2 += record.f1;
        entry.3 += record.support_recall;
    }
    Ok(groups
        .into_iter()
        .map(|(strategy, (n, em, f1, sr))| Summary {
            strategy: strategy.to_string(),
            n,
            em_mean: em / n as f64,
            f1_mean: f1 / n as f64,
            support_recall_mean: sr / n as f64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Paragraph;
    use crate::retrieval::{ScoredDoc, Strategy};
    use std::collections::BTreeSet;

    #[test]
    fn normalize_strips_articles_and_punctuation() {
        assert_eq!(normalize_answer("The Cat!"), "cat");
        assert_eq!(normalize_answer("  yes "), "yes");
        assert_eq!(
            normalize_answer("A Midsummer Night's Dream"),
            "midsummer nights dream"
        );
    }

    #[test]
    fn exact_match_uses_normalization() {
        assert_eq!(exact_match("yes", "Yes"), 1);
        assert_eq!(exact_match("tim burton", "Tim Burton."), 1);
        assert_eq!(exact_match("paris", "paris france"), 0);
    }

    #[test]
    fn f1_partial_overlap() {
        let f1 = f1_score("paris france", "paris");
        assert!((f1 - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn f1_identical_and_disjoint() {
        assert_eq!(f1_score("tim burton", "Tim Burton"), 1.0);
        assert_eq!(f1_score("alpha", "omega"), 0.0);
    }

    #[test]
    fn f1_empty_rules() {
        assert_eq!(f1_score("", ""), 1.0);
        assert_eq!(f1_score("the", "the"), 1.0, "both normalize to empty");
        assert_eq!(f1_score("word", ""), 0.0);
        assert_eq!(f1_score("", "word"), 0.0);
    }

    #[test]
    fn f1_is_count_aware() {
        // pred has "on" once, gold twice: overlap 1, P=1/1? no -- pred has
        // one token, gold has two, so P=1, R=1/2, F1=2/3.
        let f1 = f1_score("on", "on on");
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    fn example_with_titles(supporting: &[&str], pool: &[&str]) -> Example {
        Example {
            id: "e".into(),
            question: "q".into(),
            gold_answer: "g".into(),
            paragraphs: pool
                .iter()
                .map(|t| Paragraph::new(*t, vec!["s".into()]).unwrap())
                .collect(),
            supporting_titles: supporting.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
            qtype: None,
            level: None,
        }
    }

    fn result_with_indices(indices: &[usize]) -> RetrievalResult {
        RetrievalResult {
            strategy: Strategy::Cosine,
            docs: indices
                .iter()
                .map(|&i| ScoredDoc {
                    doc_index: i,
                    embedding_sim: 0.0,
                    lexical_score: None,
                    combined_score: None,
                    mmr_marginal: None,
                })
                .collect(),
        }
    }

    #[test]
    fn support_recall_levels() {
        let example = example_with_titles(&["A", "B"], &["A", "B", "C", "D"]);
        assert_eq!(support_recall(&result_with_indices(&[0, 1]), &example), 1.0);
        assert_eq!(support_recall(&result_with_indices(&[0, 2]), &example), 0.5);
        assert_eq!(support_recall(&result_with_indices(&[2, 3]), &example), 0.0);
    }

    fn record(strategy: &str, em: u8, f1: f64) -> EvalRecord {
        EvalRecord {
            question_id: "q".into(),
            strategy: strategy.into(),
            prediction: "p".into(),
            gold: "g".into(),
            em,
            f1,
            support_recall: 0.5,
        }
    }

    #[test]
    fn aggregate_means() {
        let records = vec![record("cosine", 1, 1.0), record("cosine", 0, 0.5)];
        let summaries = aggregate(&records).unwrap();
        assert_eq!(summaries.len(), 1);
        assert_eq!(summaries[0].n, 2);
        assert_eq!(summaries[0].em_mean, 0.5);
        assert_eq!(summaries[0].f1_mean, 0.75);
    }

    #[test]
    fn aggregate_single_record_and_order_independence() {
        let single = aggregate(&[record("mmr", 1, 0.8)]).unwrap();
        assert_eq!(single[0].em_mean, 1.0);
        assert_eq!(single[0].f1_mean, 0.8);

        let a = vec![record("mmr", 1, 0.8), record("cosine", 0, 0.2)];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(aggregate(&a).unwrap(), aggregate(&b).unwrap());
        // Summaries come out sorted by strategy name.
        let names: Vec<&str> = aggregate(&a)
            .unwrap()
            .iter()
            .map(|s| s.strategy.as_str())
            .map(|s| Box::leak(s.to_string().into_boxed_str()) as &str)
            .collect();
        assert_eq!(names, vec!["cosine", "mmr"]);
    }

    #[test]
    fn aggregate_empty_is_an_error() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyRecords)));
    }
}
