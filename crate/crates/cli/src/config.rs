//! Run configuration: JSON file, flag overrides, environment overrides.
//!
//! The fully resolved configuration is echoed into the run report, so a
//! report is always reproducible from its own bytes.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use hopqa_core::{ProviderSpec, Strategy, Summary};

fn default_limit() -> usize {
    100
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_k() -> usize {
    2
}

fn default_lambda() -> f64 {
    0.5
}

fn default_providers() -> Vec<ProviderSpec> {
    vec![ProviderSpec::Deterministic { dim: 256, seed: 42 }]
}

fn default_seed() -> u64 {
    42
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("hopqa-out")
}

fn default_max_hops() -> usize {
    2
}

fn default_salience_threshold() -> f64 {
    0.5
}

fn default_docs_per_hop() -> usize {
    2
}

fn default_temperature() -> f64 {
    0.1
}

fn default_max_tokens() -> usize {
    64
}

fn default_gen_timeout_ms() -> u64 {
    60_000
}

fn default_stop() -> Vec<String> {
    vec!["\n".into()]
}

fn default_max_retries() -> usize {
    1
}

/// Multi-hop loop settings within a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_max_hops")]
    pub max_hops: usize,
    #[serde(default = "default_salience_threshold")]
    pub salience_threshold: f64,
    #[serde(default = "default_docs_per_hop")]
    pub docs_per_hop: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            enabled: false,
            max_hops: default_max_hops(),
            salience_threshold: default_salience_threshold(),
            docs_per_hop: default_docs_per_hop(),
        }
    }
}

/// Which generation client a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Http {
        endpoint: String,
        model: String,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_max_tokens")]
        max_tokens: usize,
        #[serde(default = "default_gen_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_stop")]
        stop: Vec<String>,
        #[serde(default = "default_max_retries")]
        max_retries: usize,
    },
    Mock {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        script: Option<PathBuf>,
    },
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::Mock { script: None }
    }
}

/// One evaluation run, fully specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    #[serde(default = "default_limit")]
    pub limit: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default = "default_providers")]
    pub providers: Vec<ProviderSpec>,
    #[serde(default)]
    pub generator: GeneratorSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub shuffle: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
}

/// Environment variable that overrides every remote provider endpoint.
pub const EMBED_ENDPOINT_ENV: &str = "HOPQA_EMBED_ENDPOINT";
/// Environment variable that overrides the HTTP generator endpoint.
pub const GEN_ENDPOINT_ENV: &str = "HOPQA_GEN_ENDPOINT";

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig = serde_json::from_str(&raw)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.apply_env_overrides();
        Ok(config)
    }

    /// Applies `HOPQA_EMBED_ENDPOINT` / `HOPQA_GEN_ENDPOINT` when set.
    pub fn apply_env_overrides(&mut self) {
        if let Ok(endpoint) = std::env::var(EMBED_ENDPOINT_ENV) {
            for provider in &mut self.providers {
                if let ProviderSpec::Remote(spec) = provider {
                    spec.endpoint = endpoint.clone();
                }
            }
        }
        if let Ok(endpoint_override) = std::env::var(GEN_ENDPOINT_ENV) {
            if let GeneratorSpec::Http { endpoint, .. } = &mut self.generator {
                *endpoint = endpoint_override;
            }
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.strategies.is_empty() {
            bail!("config: strategies must be non-empty");
        }
        if self.limit < 1 {
            bail!("config: limit must be at least 1");
        }
        if self.k < 1 {
            bail!("config: k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            bail!("config: lambda={} outside [0, 1]", self.lambda);
        }
        if self.providers.is_empty() {
            bail!("config: provider chain must be non-empty");
        }
        if self.pipeline.enabled {
            if self.pipeline.max_hops < 1 {
                bail!("config: pipeline.max_hops must be at least 1");
            }
            if !(0.0..=1.0).contains(&self.pipeline.salience_threshold) {
                bail!(
                    "config: pipeline.salience_threshold={} outside [0, 1]",
                    self.pipeline.salience_threshold
                );
            }
            if self.pipeline.docs_per_hop < 1 {
                bail!("config: pipeline.docs_per_hop must be at least 1");
            }
        }
        if let GeneratorSpec::Http { temperature, .. } = &self.generator {
            if *temperature < 0.0 {
                bail!("config: generator.temperature must be non-negative");
            }
        }
        Ok(())
    }
}

/// Accumulated wall-clock per stage, in milliseconds. Timings are the one
/// part of a run that is not byte-deterministic, so they live in the run
/// report only, never next to records or summaries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub total_ms: u64,
    pub embed_ms: u64,
    pub retrieve_ms: u64,
    pub generate_ms: u64,
    pub score_ms: u64,
}

/// Everything a finished run reports back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Byte-identical echo of the resolved configuration.
    pub config: RunConfig,
    pub summaries: Vec<Summary>,
    pub records_path: PathBuf,
    pub record_count: usize,
    /// Provider identity actually pinned for the run.
    pub provider_id: String,
    pub model_id: String,
    pub generator_id: String,
    pub fallback_events: Vec<String>,
    pub timings: StageTimings,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let config: RunConfig =
            serde_json::from_str(r#"{"dataset_path": "data.json"}"#).unwrap();
        assert_eq!(config.limit, 100);
        assert_eq!(config.k, 2);
        assert_eq!(config.lambda, 0.5);
        assert_eq!(config.strategies, Strategy::ALL.to_vec());
        assert!(!config.pipeline.enabled);
        assert_eq!(config.pipeline.max_hops, 2);
        assert_eq!(config.generator, GeneratorSpec::Mock { script: None });
        config.validate().unwrap();
    }

    #[test]
    fn config_echo_is_stable() {
        let config: RunConfig =
            serde_json::from_str(r#"{"dataset_path": "data.json", "seed": 7}"#).unwrap();
        let a = serde_json::to_string(&config).unwrap();
        let b = serde_json::to_string(&serde_json::from_str::<RunConfig>(&a).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut config: RunConfig =
            serde_json::from_str(r#"{"dataset_path": "d.json"}"#).unwrap();
        config.lambda = 1.5;
        assert!(config.validate().is_err());
        config.lambda = 0.5;
        config.strategies.clear();
        assert!(config.validate().is_err());
    }
}
