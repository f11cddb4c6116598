//! Embedding providers and the fallback chain.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{deterministic_embed, EmbeddingVector};
use crate::error::{Error, Result};

pub(super) const DETERMINISTIC_PROVIDER_ID: &str = "deterministic";
pub(super) const REMOTE_PROVIDER_ID: &str = "remote";

pub(super) fn deterministic_model_id(dim: usize, seed: u64) -> String {
    format!("hashed-bow-d{dim}-s{seed}")
}

/// A remote HTTP embedding endpoint, in the local-model-server style:
/// request `{"model", "prompt", "input"}`, response containing a numeric
/// array under `embedding`, `embeddings[0]` or `data[0].embedding`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteProviderSpec {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// When set, every response vector must have this dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_dim: Option<usize>,
    /// Bound on in-flight requests within one batch.
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_in_flight() -> usize {
    4
}

/// One provider in the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSpec {
    Remote(RemoteProviderSpec),
    Deterministic { dim: usize, seed: u64 },
}

impl ProviderSpec {
    pub fn provider_id(&self) -> &'static str {
        match self {
            ProviderSpec::Remote(_) => REMOTE_PROVIDER_ID,
            ProviderSpec::Deterministic { .. } => DETERMINISTIC_PROVIDER_ID,
        }
    }

    pub fn model_id(&self) -> String {
        match self {
            ProviderSpec::Remote(spec) => spec.model.clone(),
            ProviderSpec::Deterministic { dim, seed } => deterministic_model_id(*dim, *seed),
        }
    }
}

struct ChainState {
    active: usize,
    pinned: bool,
}

/// Ordered embedding providers with automatic fallback.
///
/// The first provider that completes a whole batch becomes pinned for the
/// rest of the run; a later failure of the pinned provider is a hard error
/// rather than a silent switch, so no index ever mixes dimensions.
pub struct ProviderChain {
    specs: Vec<ProviderSpec>,
    state: Mutex<ChainState>,
    call_counts: Vec<AtomicU64>,
    fallback_events: Mutex<Vec<String>>,
    http: reqwest::blocking::Client,
}

impl ProviderChain {
    pub fn new(specs: Vec<ProviderSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidInput("provider chain is empty".into()));
        }
        for spec in &specs {
            if let ProviderSpec::Deterministic { dim, .. } = spec {
                if *dim < 8 {
                    return Err(Error::InvalidInput(format!(
                        "deterministic provider dim {dim} < 8"
                    )));
                }
            }
        }
        let call_counts = specs.iter().map(|_| AtomicU64::new(0)).collect();
        let http = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| Error::Http {
                url: "<client>".into(),
                cause: e.to_string(),
            })?;
        Ok(Self {
            specs,
            state: Mutex::new(ChainState {
                active: 0,
                pinned: false,
            }),
            call_counts,
            fallback_events: Mutex::new(Vec::new()),
            http,
        })
    }

    /// A chain holding only the deterministic embedder; handy for tests and
    /// offline runs.
    pub fn deterministic(dim: usize, seed: u64) -> Self {
        Self::new(vec![ProviderSpec::Deterministic { dim, seed }])
            .expect("deterministic chain is always valid")
    }

    pub fn specs(&self) -> &[ProviderSpec] {
        &self.specs
    }

    pub fn active_index(&self) -> usize {
        self.state.lock().unwrap().active
    }

    /// `(provider_id, model_id)` of the provider the next call will use.
    pub fn active_identity(&self) -> (String, String) {
        let idx = self.active_index().min(self.specs.len() - 1);
        let spec = &self.specs[idx];
        (spec.provider_id().to_string(), spec.model_id())
    }

    /// Per-text requests issued to the provider at `index` so far.
    pub fn call_count(&self, index: usize) -> u64 {
        self.call_counts[index].load(Ordering::SeqCst)
    }

    pub fn total_calls(&self) -> u64 {
        self.call_counts
            .iter()
            .map(|c| c.load(Ordering::SeqCst))
            .sum()
    }

    /// Human-readable log of every fallback that happened, in order.
    pub fn fallback_events(&self) -> Vec<String> {
        self.fallback_events.lock().unwrap().clone()
    }

    /// Embeds a batch of texts, one vector per text in input order, all from
    /// a single provider. On failure before pinning, the chain advances and
    /// retries the whole batch with the next provider.
    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::InvalidInput("embed_batch called with no texts".into()));
        }
        if let Some(t) = texts.iter().find(|t| t.trim().is_empty()) {
            let _ = t;
            return Err(Error::InvalidInput(
                "embed_batch called with an empty text".into(),
            ));
        }
        loop {
            let idx = {
                let state = self.state.lock().unwrap();
                state.active
            };
            if idx >= self.specs.len() {
                return Err(Error::ChainExhausted {
                    causes: self.fallback_events(),
                });
            }
            match self.embed_with(idx, texts) {
                Ok(vectors) => {
                    let mut state = self.state.lock().unwrap();
                    if state.active == idx {
                        state.pinned = true;
                        return Ok(vectors);
                    }
                    // Lost a race with a concurrent fallback: discard and
                    // re-embed with the provider the chain settled on.
                }
                Err(cause) => {
                    let mut state = self.state.lock().unwrap();
                    if state.active == idx {
                        if state.pinned {
                            return Err(Error::ProviderFailedAfterPin {
                                provider_id: self.specs[idx].provider_id().to_string(),
                                cause: cause.to_string(),
                            });
                        }
                        let event = format!(
                            "provider {} ({}) failed: {cause}",
                            self.specs[idx].provider_id(),
                            self.specs[idx].model_id()
                        );
                        log::warn!("embedding fallback: {event}");
                        self.fallback_events.lock().unwrap().push(event);
                        state.active = idx + 1;
                        if state.active >= self.specs.len() {
                            return Err(Error::ChainExhausted {
                                causes: self.fallback_events(),
                            });
                        }
                    }
                }
            }
        }
    }

    fn embed_with(&self, index: usize, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        match &self.specs[index] {
            ProviderSpec::Deterministic { dim, seed } => {
                let mut out = Vec::with_capacity(texts.len());
                for text in texts {
                    self.call_counts[index].fetch_add(1, Ordering::SeqCst);
                    out.push(deterministic_embed(text, *dim, *seed));
                }
                Ok(out)
            }
            ProviderSpec::Remote(spec) => self.embed_remote(index, spec, texts),
        }
    }

    fn embed_remote(
        &self,
        index: usize,
        spec: &RemoteProviderSpec,
        texts: &[&str],
    ) -> Result<Vec<EmbeddingVector>> {
        let workers = spec.max_in_flight.max(1).min(texts.len());
        let next = AtomicU64::new(0);
        let slots: Vec<Mutex<Option<Result<Vec<f64>>>>> =
            texts.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst) as usize;
                    if i >= texts.len() {
                        break;
                    }
                    self.call_counts[index].fetch_add(1, Ordering::SeqCst);
                    let result = self.request_embedding(spec, texts[i]);
                    *slots[i].lock().unwrap() = Some(result);
                });
            }
        });
        let mut dim_seen = spec.expected_dim;
        let mut out = Vec::with_capacity(texts.len());
        for slot in slots {
            let values = slot
                .into_inner()
                .unwrap()
                .expect("worker filled every slot")?;
            match dim_seen {
                None => dim_seen = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::MalformedResponse {
                        url: spec.endpoint.clone(),
                        cause: format!(
                            "inconsistent embedding dimension: {} vs {d}",
                            values.len()
                        ),
                    });
                }
                Some(_) => {}
            }
            out.push(EmbeddingVector::new(
                values,
                REMOTE_PROVIDER_ID,
                spec.model.clone(),
            )?);
        }
        Ok(out)
    }

    fn request_embedding(&self, spec: &RemoteProviderSpec, text: &str) -> Result<Vec<f64>> {
        let body = serde_json::json!({
            "model": spec.model,
            "prompt": text,
            "input": text,
        });
        let response = self
            .http
            .post(&spec.endpoint)
            .timeout(Duration::from_millis(spec.timeout_ms))
            .json(&body)
            .send()
            .map_err(|e| Error::Http {
                url: spec.endpoint.clone(),
                cause: e.to_string(),
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Http {
                url: spec.endpoint.clone(),
                cause: format!("status {status}"),
            });
        }
        let value: Value = response.json().map_err(|e| Error::MalformedResponse {
            url: spec.endpoint.clone(),
            cause: e.to_string(),
        })?;
        parse_embedding_response(&value).ok_or_else(|| Error::MalformedResponse {
            url: spec.endpoint.clone(),
            cause: "no numeric embedding array found".into(),
        })
    }
}

fn numeric_array(value: &Value) -> Option<Vec<f64>> {
    let array = value.as_array()?;
    if array.is_empty() {
        return None;
    }
    let mut out = Vec::with_capacity(array.len());
    for v in array {
        let f = v.as_f64()?;
        if !f.is_finite() {
            return None;
        }
        out.push(f);
    }
    Some(out)
}

/// Accepts the common local-server response layouts.
fn parse_embedding_response(value: &Value) -> Option<Vec<f64>> {
    if let Some(v) = value.get("embedding").and_then(numeric_array) {
        return Some(v);
    }
    if let Some(v) = value
        .get("embeddings")
        .and_then(|e| e.as_array())
        .and_then(|a| a.first())
        .and_then(numeric_array)
    {
        return Some(v);
    }
    value
        .get("data")
        .and_then(|d| d.as_array())
        .and_then(|a| a.first())
        .and_then(|e| e.get("embedding"))
        .and_then(numeric_array)
}
