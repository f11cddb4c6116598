//! Persistent embedding cache.
//!
//! A single append-friendly binary file: an 12-byte header (magic +
//! version), then records of `(key: 32 bytes, dim: u32 LE, dim * f64 LE)`.
//! Keys are SHA-256 over `(provider_id, model_id, text)`, so the same text
//! embedded by different models occupies distinct entries. Values round-trip
//! bit-identically. A truncated tail record (interrupted write) is tolerated:
//! loading stops at the last complete record and warns.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{EmbeddingVector, ProviderChain};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HOPQAEC\0";
const VERSION: u32 = 1;
const KEY_LEN: usize = 32;

type Key = [u8; KEY_LEN];

struct CacheInner {
    map: HashMap<Key, Vec<f64>>,
    file: Option<File>,
    hits: u64,
    misses: u64,
}

/// Thread-safe embedding cache; all access is serialized through one lock.
pub struct EmbeddingCache {
    inner: Mutex<CacheInner>,
    path: Option<PathBuf>,
}

fn cache_key(provider_id: &str, model_id: &str, text: &str) -> Key {
    let mut hasher = Sha256::new();
    hasher.update(provider_id.as_bytes());
    hasher.update([0]);
    hasher.update(model_id.as_bytes());
    hasher.update([0]);
    hasher.update(text.as_bytes());
    hasher.finalize().into()
}

fn load_records(bytes: &[u8], path: &Path) -> Result<HashMap<Key, Vec<f64>>> {
    if bytes.len() < MAGIC.len() + 4 {
        return Err(Error::Cache(format!(
            "{}: file too short for header",
            path.display()
        )));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Cache(format!("{}: bad magic", path.display())));
    }
    let version = u32::from_le_bytes(bytes[MAGIC.len()..MAGIC.len() + 4].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Cache(format!(
            "{}: unsupported cache version {version}",
            path.display()
        )));
    }
    let mut map = HashMap::new();
    let mut offset = MAGIC.len() + 4;
    while offset < bytes.len() {
        if bytes.len() - offset < KEY_LEN + 4 {
            log::warn!("{}: truncated record header, ignoring tail", path.display());
            break;
        }
        let key: Key = bytes[offset..offset + KEY_LEN].try_into().unwrap();
        offset += KEY_LEN;
        let dim = u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize;
        offset += 4;
        let payload = dim * 8;
        if bytes.len() - offset < payload {
            log::warn!("{}: truncated record payload, ignoring tail", path.display());
            break;
        }
        let mut values = Vec::with_capacity(dim);
        for chunk in bytes[offset..offset + payload].chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        offset += payload;
        map.insert(key, values);
    }
    Ok(map)
}

impl EmbeddingCache {
    /// Opens (or creates) a cache file and loads every complete record.
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let map = if bytes.is_empty() {
            file.write_all(MAGIC)?;
            file.write_all(&VERSION.to_le_bytes())?;
            file.flush()?;
            HashMap::new()
        } else {
            load_records(&bytes, path)?
        };
        Ok(Self {
            inner: Mutex::new(CacheInner {
                map,
                file: Some(file),
                hits: 0,
                misses: 0,
            }),
            path: Some(path.to_path_buf()),
        })
    }

    /// A cache with no backing file; entries live for the process only.
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(CacheInner {
                map: HashMap::new(),
                file: None,
                hits: 0,
                misses: 0,
            }),
            path: None,
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(hits, misses)` observed since open.
    pub fn stats(&self) -> (u64, u64) {
        let inner = self.inner.lock().unwrap();
        (inner.hits, inner.misses)
    }

    fn get(&self, key: &Key) -> Option<Vec<f64>> {
        let mut inner = self.inner.lock().unwrap();
        let hit = inner.map.get(key).cloned();
        if hit.is_some() {
            inner.hits += 1;
        } else {
            inner.misses += 1;
        }
        hit
    }

    fn put(&self, key: Key, values: &[f64]) {
        let mut inner = self.inner.lock().unwrap();
        if inner.map.contains_key(&key) {
            return;
        }
        inner.map.insert(key, values.to_vec());
        if let Some(file) = inner.file.as_mut() {
            let mut record = Vec::with_capacity(KEY_LEN + 4 + values.len() * 8);
            record.extend_from_slice(&key);
            record.extend_from_slice(&(values.len() as u32).to_le_bytes());
            for v in values {
                record.extend_from_slice(&v.to_le_bytes());
            }
            // Cache write failures are non-fatal: the vector was already
            // computed, the run just loses persistence.
            if let Err(e) = file.write_all(&record).and_then(|()| file.flush()) {
                log::warn!("embedding cache write failed: {e}");
                inner.file = None;
            }
        }
    }

    /// Returns the cached vector for `text` under the chain's active
    /// identity, or embeds, stores and returns it.
    pub fn get_or_embed(&self, chain: &ProviderChain, text: &str) -> Result<EmbeddingVector> {
        let mut out = self.get_or_embed_batch(chain, &[text])?;
        Ok(out.pop().expect("batch of one yields one vector"))
    }

    /// Batch form of [`EmbeddingCache::get_or_embed`]: cache hits are served
    /// without provider calls, misses are embedded in one batch and stored.
    /// Output order matches input order.
    pub fn get_or_embed_batch(
        &self,
        chain: &ProviderChain,
        texts: &[&str],
    ) -> Result<Vec<EmbeddingVector>> {
        let (provider_id, model_id) = chain.active_identity();
        let mut out: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        let mut miss_indices = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            let key = cache_key(&provider_id, &model_id, text);
            match self.get(&key) {
                Some(values) => {
                    out[i] = Some(EmbeddingVector {
                        dim: values.len(),
                        values,
                        provider_id: provider_id.clone(),
                        model_id: model_id.clone(),
                    });
                }
                None => miss_indices.push(i),
            }
        }
        if !miss_indices.is_empty() {
            let miss_texts: Vec<&str> = miss_indices.iter().map(|&i| texts[i]).collect();
            let vectors = chain.embed_batch(&miss_texts)?;
            for (&i, vector) in miss_indices.iter().zip(vectors) {
                // Key under the identity that actually produced the vector;
                // it differs from the lookup identity when a fallback
                // happened inside this batch.
                let key = cache_key(&vector.provider_id, &vector.model_id, texts[i]);
                self.put(key, &vector.values);
                out[i] = Some(vector);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("every slot filled")).collect())
    }
}
