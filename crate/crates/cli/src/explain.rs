//! The `retrieve` command: per-candidate score breakdown for one question,
//! plus the hop trace when the pipeline is enabled.

use std::fmt::Write as _;

use anyhow::Context;

use hopqa_core::{
    cosine_similarity, lexical_overlap, retrieve, run_pipeline, EmbeddingCache, Paragraph,
    PipelineConfig, ProviderChain, RetrievalConfig,
};

use crate::config::RunConfig;
use crate::runner::load_slice;

fn truncate(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        text.to_string()
    } else {
        let cut: String = text.chars().take(max.saturating_sub(1)).collect();
        format!("{cut}…")
    }
}

/// Renders the explain output for one question id.
pub fn cmd_retrieve(question_id: &str, config: &RunConfig) -> anyhow::Result<String> {
    config.validate()?;
    let examples = load_slice(config)?;
    let example = examples
        .iter()
        .find(|e| e.id == question_id)
        .with_context(|| format!("question id `{question_id}` not found in dataset slice"))?;

    let chain = ProviderChain::new(config.providers.clone())?;
    let cache = EmbeddingCache::in_memory();
    let pool_texts: Vec<String> = example.paragraphs.iter().map(Paragraph::full_text).collect();
    let pool_refs: Vec<&str> = pool_texts.iter().map(String::as_str).collect();
    let doc_vecs = cache.get_or_embed_batch(&chain, &pool_refs)?;
    let query_vec = cache.get_or_embed(&chain, &example.question)?;

    let mut out = String::new();
    let _ = writeln!(out, "question {}: {}", example.id, example.question);
    let _ = writeln!(
        out,
        "gold answer: {} | supporting: {:?}",
        example.gold_answer,
        example.supporting_titles.iter().collect::<Vec<_>>()
    );

    let stopwords = RetrievalConfig::default().stopwords;
    for strategy in &config.strategies {
        let retrieval_cfg = RetrievalConfig {
            strategy: *strategy,
            k: config.k.min(example.paragraphs.len()),
            lambda: config.lambda,
            stopwords: stopwords.clone(),
        };
        let result = retrieve(
            &example.question,
            &query_vec,
            &example.paragraphs,
            &doc_vecs,
            &retrieval_cfg,
        )?;
        let _ = writeln!(out, "\nstrategy {strategy} (k={}, lambda={}):", retrieval_cfg.k, config.lambda);
        let _ = writeln!(
            out,
            "  {:<4} {:<34} {:>10} {:>10} {:>10}  {}",
            "idx", "title", "embedding", "lexical", "combined", "selected"
        );
        for (i, paragraph) in example.paragraphs.iter().enumerate() {
            let embedding = cosine_similarity(&query_vec, &doc_vecs[i])?;
            let lexical = lexical_overlap(&example.question, &paragraph.full_text(), &stopwords);
            let combined = embedding + lexical;
            let selected = result
                .docs
                .iter()
                .position(|d| d.doc_index == i)
                .map(|rank| {
                    let marginal = result.docs[rank]
                        .mmr_marginal
                        .map(|m| format!(" marginal={m:+.4}"))
                        .unwrap_or_default();
                    format!("#{}{marginal}", rank + 1)
                })
                .unwrap_or_default();
            let gold_mark = if example.supporting_titles.contains(&paragraph.title) {
                "*"
            } else {
                " "
            };
            let _ = writeln!(
                out,
                "  {i:<4} {gold_mark}{:<33} {embedding:>+10.4} {lexical:>10.4} {combined:>+10.4}  {selected}",
                truncate(&paragraph.title, 33)
            );
        }

        if config.pipeline.enabled {
            let pipeline_cfg = PipelineConfig {
                max_hops: config.pipeline.max_hops,
                salience_threshold: config.pipeline.salience_threshold,
                docs_per_hop: config.pipeline.docs_per_hop,
                ..PipelineConfig::default()
            };
            let run = run_pipeline(example, &retrieval_cfg, &chain, &cache, &pipeline_cfg)?;
            let _ = writeln!(
                out,
                "  pipeline trace ({} hops, final {:?}):",
                run.trace.len(),
                run.final_result.doc_indices()
            );
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&run.trace)?);
        }
    }
    Ok(out)
}
