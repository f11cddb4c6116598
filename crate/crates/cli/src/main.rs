//! `hopqa`: benchmark CLI for multi-hop QA retrieval strategies.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use hopqa_cli::config::{GeneratorSpec, RunConfig};
use hopqa_cli::synth::CorpusKind;
use hopqa_cli::{explain, report, runner, synth};
use hopqa_core::Strategy;

#[derive(Parser)]
#[command(name = "hopqa", version, about = "Benchmark retrieval strategies for multi-hop QA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an evaluation over a dataset slice and write records, summaries
    /// and charts.
    Eval {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the number of questions evaluated.
        #[arg(long)]
        limit: Option<usize>,
        /// Override the strategies (repeatable: cosine, mmr, hybrid).
        #[arg(long = "strategy")]
        strategies: Vec<Strategy>,
        /// Use a scripted mock generator instead of the configured one.
        #[arg(long = "mock-gen")]
        mock_gen: Option<PathBuf>,
        /// Override the output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the run seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Explain retrieval for one question: per-candidate score breakdown
    /// and, with the pipeline enabled, the hop trace.
    Retrieve {
        /// Question id to explain.
        #[arg(long)]
        id: String,
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Merge records files into one report (markdown table + SVG charts).
    Report {
        /// One or more records.jsonl files.
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Where to write report.md and the charts.
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
    },
    /// Generate a synthetic HotpotQA-format corpus plus a mock-generator
    /// script, for offline runs.
    Synth {
        /// Corpus shape: plain, lexical-bridge or two-hop.
        #[arg(long, default_value = "plain")]
        kind: CorpusKind,
        /// Number of questions.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Generation seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output dataset path.
        #[arg(long, default_value = "dataset.json")]
        out: PathBuf,
        /// Output mock script path.
        #[arg(long = "mock-out")]
        mock_out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Eval {
            config,
            limit,
            strategies,
            mock_gen,
            output_dir,
            seed,
        } => {
            let mut run_config = RunConfig::load(&config)?;
            if let Some(limit) = limit {
                run_config.limit = limit;
            }
            if !strategies.is_empty() {
                run_config.strategies = strategies;
            }
            if let Some(script) = mock_gen {
                run_config.generator = GeneratorSpec::Mock {
                    script: Some(script),
                };
            }
            if let Some(dir) = output_dir {
                run_config.output_dir = dir;
            }
            if let Some(seed) = seed {
                run_config.seed = seed;
            }
            let report = runner::cmd_eval(&run_config)?;
            println!(
                "{}",
                report::render_markdown(&report.summaries).trim_end()
            );
            println!(
                "\n{} records -> {} (provider {} / {})",
                report.record_count,
                report.records_path.display(),
                report.provider_id,
                report.model_id
            );
            for event in &report.fallback_events {
                println!("note: {event}");
            }
            Ok(())
        }
        Command::Retrieve { id, config } => {
            let run_config = RunConfig::load(&config)?;
            print!("{}", explain::cmd_retrieve(&id, &run_config)?);
            Ok(())
        }
        Command::Report {
            records,
            output_dir,
        } => {
            let markdown = report::cmd_report(&records, &output_dir)?;
            print!("{markdown}");
            Ok(())
        }
        Command::Synth {
            kind,
            count,
            seed,
            out,
            mock_out,
        } => {
            let corpus = synth::generate(kind, count, seed);
            corpus.write(&out, mock_out.as_deref())?;
            println!("wrote {count} questions to {}", out.display());
            if let Some(mock) = mock_out {
                println!("wrote mock script to {}", mock.display());
            }
            Ok(())
        }
    }
}
