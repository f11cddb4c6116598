//! Benchmark CLI for the hopqa retrieval toolkit: evaluation runs over
//! HotpotQA-format data, per-question retrieval explanations, merged
//! reports, and synthetic corpus generation for offline use.

pub mod config;
pub mod explain;
pub mod report;
pub mod runner;
pub mod synth;

pub use config::{GeneratorSpec, PipelineSection, RunConfig, RunReport, StageTimings};
pub use runner::cmd_eval;
