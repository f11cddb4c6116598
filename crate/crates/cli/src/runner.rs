//! The `eval` command: run every configured strategy over a dataset slice,
//! generate answers, score them, and write records, summaries and charts.
//!
//! Determinism contract: with a fixed config, seed, mock script and the
//! deterministic embedder, `records.jsonl`, `summary.json`, `summary.md`
//! and both SVG charts are byte-identical across runs. Timings and other
//! wall-clock artifacts go only into `run_report.json`.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use anyhow::Context;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use hopqa_core::{
    aggregate, build_prompt, canonicalize, exact_match, f1_score, load_hotpotqa, retrieve,
    run_pipeline, support_recall, EmbeddingCache, EvalRecord, Example, GenConfig, Generator,
    HttpGenerator, MockGenerator, MockScript, Paragraph, PipelineConfig, ProviderChain,
    RetrievalConfig, Strategy,
};

use crate::config::{GeneratorSpec, RunConfig, RunReport, StageTimings};
use crate::report;

/// Per-stage accumulated microseconds, shared across worker threads.
#[derive(Default)]
struct StageClock {
    embed_us: AtomicU64,
    retrieve_us: AtomicU64,
    generate_us: AtomicU64,
    score_us: AtomicU64,
}

impl StageClock {
    fn add(&self, counter: &AtomicU64, started: Instant) {
        counter.fetch_add(started.elapsed().as_micros() as u64, Ordering::Relaxed);
    }
}

struct StageFailure {
    stage: &'static str,
    question_id: String,
    source: hopqa_core::Error,
}

impl StageFailure {
    fn new<'a>(
        stage: &'static str,
        question_id: &'a str,
    ) -> impl FnOnce(hopqa_core::Error) -> Self + 'a {
        move |source| Self {
            stage,
            question_id: question_id.to_string(),
            source,
        }
    }

    fn into_anyhow(self) -> anyhow::Error {
        anyhow::anyhow!(
            "stage={} question={}: {}",
            self.stage,
            self.question_id,
            self.source
        )
    }
}

/// Builds the generation client named by the config.
pub fn build_generator(spec: &GeneratorSpec) -> anyhow::Result<(Box<dyn Generator>, GenConfig)> {
    match spec {
        GeneratorSpec::Http {
            endpoint,
            model,
            temperature,
            max_tokens,
            timeout_ms,
            stop,
            max_retries,
        } => {
            let cfg = GenConfig {
                endpoint: endpoint.clone(),
                model_id: model.clone(),
                temperature: *temperature,
                max_tokens: *max_tokens,
                timeout_ms: *timeout_ms,
                stop: stop.clone(),
                max_retries: *max_retries,
            };
            Ok((Box::new(HttpGenerator::new()?), cfg))
        }
        GeneratorSpec::Mock { script } => {
            let script = match script {
                Some(path) => {
                    let raw = std::fs::read_to_string(path)
                        .with_context(|| format!("reading mock script {}", path.display()))?;
                    serde_json::from_str::<MockScript>(&raw)
                        .with_context(|| format!("parsing mock script {}", path.display()))?
                }
                None => MockScript::default(),
            };
            Ok((Box::new(MockGenerator::new(script)), GenConfig::default()))
        }
    }
}

fn open_cache(config: &RunConfig) -> EmbeddingCache {
    match &config.cache_path {
        Some(path) => match EmbeddingCache::open(path) {
            Ok(cache) => cache,
            Err(e) => {
                log::warn!("cache unusable ({e}); continuing without persistence");
                EmbeddingCache::in_memory()
            }
        },
        None => EmbeddingCache::in_memory(),
    }
}

fn eval_question(
    example: &Example,
    strategy: Strategy,
    config: &RunConfig,
    chain: &ProviderChain,
    cache: &EmbeddingCache,
    generator: &dyn Generator,
    gen_cfg: &GenConfig,
    clock: &StageClock,
) -> Result<EvalRecord, StageFailure> {
    let retrieval_cfg = RetrievalConfig {
        strategy,
        k: config.k.min(example.paragraphs.len()),
        lambda: config.lambda,
        ..RetrievalConfig::default()
    };

    let result = if config.pipeline.enabled {
        let pipeline_cfg = PipelineConfig {
            max_hops: config.pipeline.max_hops,
            salience_threshold: config.pipeline.salience_threshold,
            docs_per_hop: config.pipeline.docs_per_hop,
            ..PipelineConfig::default()
        };
        let started = Instant::now();
        let run = run_pipeline(example, &retrieval_cfg, chain, cache, &pipeline_cfg)
            .map_err(StageFailure::new("pipeline", &example.id))?;
        clock.add(&clock.retrieve_us, started);
        run.final_result
    } else {
        let started = Instant::now();
        let pool_texts: Vec<String> = example.paragraphs.iter().map(Paragraph::full_text).collect();
        let pool_refs: Vec<&str> = pool_texts.iter().map(String::as_str).collect();
        let doc_vecs = cache
            .get_or_embed_batch(chain, &pool_refs)
            .map_err(StageFailure::new("embedding", &example.id))?;
        let query_vec = cache
            .get_or_embed(chain, &example.question)
            .map_err(StageFailure::new("embedding", &example.id))?;
        clock.add(&clock.embed_us, started);

        let started = Instant::now();
        let result = retrieve(
            &example.question,
            &query_vec,
            &example.paragraphs,
            &doc_vecs,
            &retrieval_cfg,
        )
        .map_err(StageFailure::new("retrieval", &example.id))?;
        clock.add(&clock.retrieve_us, started);
        result
    };

    let docs: Vec<&Paragraph> = result
        .docs
        .iter()
        .map(|d| &example.paragraphs[d.doc_index])
        .collect();
    let prompt = build_prompt(&example.question, &docs);

    let started = Instant::now();
    let raw = generator
        .generate(&example.id, &prompt, gen_cfg)
        .map_err(StageFailure::new("generation", &example.id))?;
    clock.add(&clock.generate_us, started);

    let started = Instant::now();
    let prediction = canonicalize(&raw).text;
    let record = EvalRecord {
        question_id: example.id.clone(),
        strategy: strategy.to_string(),
        em: exact_match(&prediction, &example.gold_answer),
        f1: f1_score(&prediction, &example.gold_answer),
        support_recall: support_recall(&result, example),
        prediction,
        gold: example.gold_answer.clone(),
    };
    clock.add(&clock.score_us, started);
    Ok(record)
}

/// Runs the full evaluation described by `config` and writes
/// `records.jsonl`, `summary.json`, `summary.md`, `em.svg`, `f1.svg` and
/// `run_report.json` into the output directory.
pub fn cmd_eval(config: &RunConfig) -> anyhow::Result<RunReport> {
    config.validate()?;
    let total_started = Instant::now();
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating output dir {}", config.output_dir.display()))?;

    let mut examples = load_hotpotqa(&config.dataset_path, Some(config.limit))
        .with_context(|| format!("loading dataset {}", config.dataset_path.display()))?;
    if config.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        examples.shuffle(&mut rng);
    }
    if examples.is_empty() {
        anyhow::bail!("dataset slice is empty");
    }

    let chain = ProviderChain::new(config.providers.clone())?;
    let cache = open_cache(config);
    let (generator, gen_cfg) = build_generator(&config.generator)?;
    let clock = StageClock::default();

    let mut strategies: Vec<Strategy> = Vec::new();
    for s in &config.strategies {
        if !strategies.contains(s) {
            strategies.push(*s);
        }
    }

    let records_path = config.output_dir.join("records.jsonl");
    let mut writer = std::io::BufWriter::new(
        std::fs::File::create(&records_path)
            .with_context(|| format!("creating {}", records_path.display()))?,
    );
    let mut records: Vec<EvalRecord> = Vec::with_capacity(strategies.len() * examples.len());
    for strategy in &strategies {
        let outcomes: Vec<Result<EvalRecord, StageFailure>> = examples
            .par_iter()
            .map(|example| {
                eval_question(
                    example, *strategy, config, &chain, &cache, generator.as_ref(), &gen_cfg,
                    &clock,
                )
            })
            .collect();
        for outcome in outcomes {
            match outcome {
                Ok(record) => {
                    serde_json::to_writer(&mut writer, &record)?;
                    writer.write_all(b"\n")?;
                    records.push(record);
                }
                Err(failure) => {
                    // Flush what completed before aborting.
                    writer.flush()?;
                    return Err(failure.into_anyhow());
                }
            }
        }
    }
    writer.flush()?;

    let summaries = aggregate(&records)?;
    let summary_json = serde_json::to_string_pretty(&summaries)? + "\n";
    std::fs::write(config.output_dir.join("summary.json"), summary_json)?;
    std::fs::write(
        config.output_dir.join("summary.md"),
        report::render_markdown(&summaries),
    )?;
    report::write_charts(&config.output_dir, &summaries)?;

    let (provider_id, model_id) = chain.active_identity();
    let report = RunReport {
        config: config.clone(),
        summaries,
        records_path,
        record_count: records.len(),
        provider_id,
        model_id,
        generator_id: generator.id().to_string(),
        fallback_events: chain.fallback_events(),
        timings: StageTimings {
            total_ms: total_started.elapsed().as_millis() as u64,
            embed_ms: clock.embed_us.load(Ordering::Relaxed) / 1000,
            retrieve_ms: clock.retrieve_us.load(Ordering::Relaxed) / 1000,
            generate_ms: clock.generate_us.load(Ordering::Relaxed) / 1000,
            score_ms: clock.score_us.load(Ordering::Relaxed) / 1000,
        },
    };
    std::fs::write(
        config.output_dir.join("run_report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    Ok(report)
}

/// Loads the dataset slice a config describes (shuffle applied), for
/// commands that need the same view of the data as `eval`.
pub fn load_slice(config: &RunConfig) -> anyhow::Result<Vec<Example>> {
    let mut examples = load_hotpotqa(&config.dataset_path, Some(config.limit))
        .with_context(|| format!("loading dataset {}", config.dataset_path.display()))?;
    if config.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        examples.shuffle(&mut rng);
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, CorpusKind};
    use hopqa_core::ProviderSpec;
    use std::path::Path;

    fn corpus_config(dir: &Path, kind: CorpusKind, count: usize) -> RunConfig {
        let corpus = generate(kind, count, 11);
        let dataset_path = dir.join("dataset.json");
        let mock_path = dir.join("mock.json");
        corpus.write(&dataset_path, Some(&mock_path)).unwrap();
        RunConfig {
            dataset_path,
            limit: count,
            strategies: Strategy::ALL.to_vec(),
            k: 2,
            lambda: 0.5,
            pipeline: crate::config::PipelineSection::default(),
            providers: vec![ProviderSpec::Deterministic { dim: 256, seed: 42 }],
            generator: GeneratorSpec::Mock {
                script: Some(mock_path),
            },
            seed: 42,
            shuffle: false,
            output_dir: dir.join("out"),
            cache_path: None,
        }
    }

    #[test]
    fn eval_writes_expected_record_counts() {
        let dir = tempfile::tempdir().unwrap();
        let config = corpus_config(dir.path(), CorpusKind::Plain, 12);
        let report = cmd_eval(&config).unwrap();
        assert_eq!(report.record_count, 36, "3 strategies x 12 questions");
        assert_eq!(report.summaries.len(), 3);
        let records = report::read_records(&report.records_path).unwrap();
        assert_eq!(records.len(), 36);
        for artifact in ["summary.json", "summary.md", "em.svg", "f1.svg", "run_report.json"] {
            assert!(config.output_dir.join(artifact).exists(), "{artifact} missing");
        }
    }

    #[test]
    fn eval_aborts_with_stage_tag_when_generator_unreachable() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = corpus_config(dir.path(), CorpusKind::Plain, 3);
        config.generator = GeneratorSpec::Http {
            endpoint: "http://127.0.0.1:9/api/generate".into(),
            model: "m".into(),
            temperature: 0.1,
            max_tokens: 64,
            timeout_ms: 200,
            stop: vec!["\n".into()],
            max_retries: 0,
        };
        let err = cmd_eval(&config).unwrap_err();
        let message = format!("{err}");
        assert!(message.contains("stage=generation"), "got: {message}");
        assert!(config.output_dir.join("records.jsonl").exists());
    }

    #[test]
    fn shuffle_is_seeded_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = corpus_config(dir.path(), CorpusKind::Plain, 8);
        config.shuffle = true;
        let a = load_slice(&config).unwrap();
        let b = load_slice(&config).unwrap();
        assert_eq!(
            a.iter().map(|e| &e.id).collect::<Vec<_>>(),
            b.iter().map(|e| &e.id).collect::<Vec<_>>()
        );
        config.seed = 43;
        let c = load_slice(&config).unwrap();
        assert_ne!(
            a.iter().map(|e| &e.id).collect::<Vec<_>>(),
            c.iter().map(|e| &e.id).collect::<Vec<_>>()
        );
    }
}
