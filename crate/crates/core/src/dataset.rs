//! HotpotQA distractor-setting ingestion.
//!
//! Loads the public HotpotQA JSON layout (array of records with `_id`,
//! `question`, `answer`, `context`, `supporting_facts`) into validated
//! [`Example`]s. The retrieval unit is the whole paragraph: title plus its
//! sentences joined into one body string. Non-canonical examples (not 10
//! paragraphs, not 2 supporting titles) are kept and warned about, so small
//! hand-built fixtures stay usable.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One candidate paragraph: the retrieval unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub title: String,
    /// Sentences with surrounding whitespace trimmed; empty sentences dropped.
    pub sentences: Vec<String>,
    /// The sentences joined in order with single spaces.
    pub doc_text: String,
}

impl Paragraph {
    /// Builds a paragraph, trimming sentences and dropping any that are
    /// empty after trimming. Fails if the title is empty or no sentence
    /// survives.
    pub fn new(title: impl Into<String>, sentences: Vec<String>) -> Option<Self> {
        let title = title.into();
        if title.trim().is_empty() {
            return None;
        }
        let sentences: Vec<String> = sentences
            .into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if sentences.is_empty() {
            return None;
        }
        let doc_text = sentences.join(" ");
        Some(Self {
            title,
            sentences,
            doc_text,
        })
    }

    /// Title and body as one string; this is what gets embedded and
    /// lexically matched, since answers often hinge on title entities.
    pub fn full_text(&self) -> String {
        format!("{} {}", self.title, self.doc_text)
    }
}

/// One question with its 10-paragraph candidate pool and gold annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub question: String,
    pub gold_answer: String,
    pub paragraphs: Vec<Paragraph>,
    pub supporting_titles: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtype: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
}

impl Example {
    /// Titles of the candidate paragraphs, in pool order.
    pub fn titles(&self) -> Vec<&str> {
        self.paragraphs.iter().map(|p| p.title.as_str()).collect()
    }
}

fn str_field(record: &Value, index: usize, field: &'static str) -> Result<String> {
    record
        .get(field)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or(Error::MalformedRecord { index, field })
}

fn parse_context(record: &Value, index: usize) -> Result<Vec<Paragraph>> {
    let err = || Error::MalformedRecord {
        index,
        field: "context",
    };
    let entries = record.get("context").and_then(Value::as_array).ok_or_else(err)?;
    let mut paragraphs = Vec::with_capacity(entries.len());
    for entry in entries {
        let pair = entry.as_array().ok_or_else(err)?;
        let title = pair.first().and_then(Value::as_str).ok_or_else(err)?;
        let raw_sentences = pair.get(1).and_then(Value::as_array).ok_or_else(err)?;
        let mut sentences = Vec::with_capacity(raw_sentences.len());
        for s in raw_sentences {
            sentences.push(s.as_str().ok_or_else(err)?.to_string());
        }
        paragraphs.push(Paragraph::new(title, sentences).ok_or_else(err)?);
    }
    if paragraphs.is_empty() {
        return Err(err());
    }
    Ok(paragraphs)
}

fn parse_supporting_titles(record: &Value, index: usize) -> Result<BTreeSet<String>> {
    let err = || Error::MalformedRecord {
        index,
        field: "supporting_facts",
    };
    let entries = record
        .get("supporting_facts")
        .and_then(Value::as_array)
        .ok_or_else(err)?;
    let mut titles = BTreeSet::new();
    for entry in entries {
        let pair = entry.as_array().ok_or_else(err)?;
        let title = pair.first().and_then(Value::as_str).ok_or_else(err)?;
        titles.insert(title.to_string());
    }
    Ok(titles)
}

fn parse_record(record: &Value, index: usize) -> Result<Example> {
    let example = Example {
        id: str_field(record, index, "_id")?,
        question: str_field(record, index, "question")?,
        gold_answer: str_field(record, index, "answer")?,
        paragraphs: parse_context(record, index)?,
        supporting_titles: parse_supporting_titles(record, index)?,
        qtype: record.get("type").and_then(Value::as_str).map(str::to_string),
        level: record.get("level").and_then(Value::as_str).map(str::to_string),
    };
    Ok(example)
}

/// Loads the first `limit` (or all) records from a HotpotQA distractor JSON
/// file, preserving file order. Non-canonical examples are warned about,
/// not dropped.
pub fn load_hotpotqa(path: &Path, limit: Option<usize>) -> Result<Vec<Example>> {
    let raw = fs::read_to_string(path)?;
    let root: Value = serde_json::from_str(&raw)?;
    let records = root.as_array().ok_or(Error::MalformedRecord {
        index: 0,
        field: "<root array>",
    })?;
    let take = limit.unwrap_or(records.len()).min(records.len());
    let mut examples = Vec::with_capacity(take);
    for (index, record) in records.iter().take(take).enumerate() {
        let example = parse_record(record, index)?;
        for warning in validate_example(&example) {
            log::warn!("{warning}");
        }
        examples.push(example);
    }
    Ok(examples)
}

/// Checks an example against the canonical distractor shape: 10 paragraphs,
/// 2 supporting titles, every supporting title present in the pool. Returns
/// one warning string per violation; an empty list means canonical.
pub fn validate_example(example: &Example) -> Vec<String> {
    let mut warnings = Vec::new();
    if example.paragraphs.len() != 10 {
        warnings.push(format!(
            "example {}: {} paragraphs (canonical distractor setting has 10)",
            example.id,
            example.paragraphs.len()
        ));
    }
    if example.supporting_titles.len() != 2 {
        warnings.push(format!(
            "example {}: {} supporting titles (canonical setting has 2)",
            example.id,
            example.supporting_titles.len()
        ));
    }
    let pool: BTreeSet<&str> = example.paragraphs.iter().map(|p| p.title.as_str()).collect();
    for title in &example.supporting_titles {
        if !pool.contains(title.as_str()) {
            warnings.push(format!(
                "example {}: supporting title \"{title}\" not among paragraph titles",
                example.id
            ));
        }
    }
    warnings
}

/// Serializes an example back into the HotpotQA record layout. Sentence
/// indices of supporting facts are not tracked, so they re-serialize as 0.
pub fn to_hotpot_value(example: &Example) -> Value {
    let context: Vec<Value> = example
        .paragraphs
        .iter()
        .map(|p| serde_json::json!([p.title, p.sentences]))
        .collect();
    let supporting: Vec<Value> = example
        .supporting_titles
        .iter()
        .map(|t| serde_json::json!([t, 0]))
        .collect();
    let mut record = serde_json::json!({
        "_id": example.id,
        "question": example.question,
        "answer": example.gold_answer,
        "context": context,
        "supporting_facts": supporting,
    });
    if let Some(qtype) = &example.qtype {
        record["type"] = Value::String(qtype.clone());
    }
    if let Some(level) = &example.level {
        record["level"] = Value::String(level.clone());
    }
    record
}
