use std::collections::hash_map::RandomState;
use std::collections::HashMap;
use std::hash::BuildHasher;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use serde::{Deserialize, Serialize};

use super::{RemoteConfig, RemoteProvider, TableProvider};
use crate::error::{Error, Result};
use crate::Embedding;

/// Backing service for embeddings. Implementations must be deterministic:
/// the same key always yields the same vector.
pub trait EmbeddingProvider: Send + Sync {
    /// Vectors for `keys`, in order. A key the provider cannot serve is an
    /// error for the whole call.
    fn embed_batch(&self, keys: &[&str]) -> Result<Vec<Embedding>>;

    fn info(&self) -> ProviderInfo;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderInfo {
    pub mode: String,
    pub location: String,
    pub dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SourceMode {
    Table { table_path: PathBuf },
    Remote(RemoteConfig),
}

/// Where embeddings come from plus the cache bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSource {
    #[serde(flatten)]
    pub mode: SourceMode,
    #[serde(default = "default_cache_capacity")]
    pub cache_capacity: usize,
}

fn default_cache_capacity() -> usize {
    65_536
}

impl EmbeddingSource {
    pub fn table(path: impl Into<PathBuf>) -> Self {
        Self {
            mode: SourceMode::Table {
                table_path: path.into(),
            },
            cache_capacity: default_cache_capacity(),
        }
    }

    pub fn remote(endpoint_url: impl Into<String>) -> Self {
        Self {
            mode: SourceMode::Remote(RemoteConfig::new(endpoint_url)),
            cache_capacity: default_cache_capacity(),
        }
    }

    pub fn open(&self) -> Result<EmbeddingStore> {
        let provider: Box<dyn EmbeddingProvider> = match &self.mode {
            SourceMode::Table { table_path } => Box::new(TableProvider::load(table_path)?),
            SourceMode::Remote(cfg) => Box::new(RemoteProvider::new(cfg.clone())),
        };
        Ok(EmbeddingStore::new(provider, self.cache_capacity))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

const SHARDS: usize = 16;

/// Provider fronted by a sharded LRU cache. Shared by reference across
/// scoring threads; each shard is updated under its own lock, so readers
/// only ever see complete `Arc`ed vectors.
pub struct EmbeddingStore {
    provider: Box<dyn EmbeddingProvider>,
    shards: Vec<Mutex<LruCache<String, Arc<Embedding>>>>,
    hasher: RandomState,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl EmbeddingStore {
    pub fn new(provider: Box<dyn EmbeddingProvider>, capacity: usize) -> Self {
        let per_shard = NonZeroUsize::new(capacity.div_ceil(SHARDS).max(1)).unwrap();
        Self {
            provider,
            shards: (0..SHARDS).map(|_| Mutex::new(LruCache::new(per_shard))).collect(),
            hasher: RandomState::new(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    fn shard(&self, key: &str) -> &Mutex<LruCache<String, Arc<Embedding>>> {
        &self.shards[self.hasher.hash_one(key) as usize % SHARDS]
    }

    fn cached(&self, key: &str) -> Option<Arc<Embedding>> {
        let hit = self.shard(key).lock().unwrap().get(key).cloned();
        match hit {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        hit
    }

    pub fn embed(&self, key: &str) -> Result<Arc<Embedding>> {
        if key.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(v) = self.cached(key) {
            return Ok(v);
        }
        let v = Arc::new(
            self.provider
                .embed_batch(&[key])?
                .pop()
                .ok_or_else(|| Error::MissingEmbedding(key.to_owned()))?,
        );
        self.shard(key).lock().unwrap().put(key.to_owned(), Arc::clone(&v));
        Ok(v)
    }

    /// Batch lookup; all cache misses go to the provider in one call.
    pub fn embed_many(&self, keys: &[&str]) -> Result<Vec<Arc<Embedding>>> {
        let mut out: Vec<Option<Arc<Embedding>>> = Vec::with_capacity(keys.len());
        let mut missing: Vec<&str> = Vec::new();
        for &k in keys {
            if k.is_empty() {
                return Err(Error::EmptyInput);
            }
            let hit = self.cached(k);
            if hit.is_none() && !missing.contains(&k) {
                missing.push(k);
            }
            out.push(hit);
        }
        if !missing.is_empty() {
            let fetched = self.provider.embed_batch(&missing)?;
            if fetched.len() != missing.len() {
                return Err(Error::MissingEmbedding(missing[fetched.len().min(missing.len() - 1)].to_owned()));
            }
            let fetched: HashMap<&str, Arc<Embedding>> = missing
                .iter()
                .copied()
                .zip(fetched.into_iter().map(Arc::new))
                .collect();
            for (k, v) in &fetched {
                self.shard(k).lock().unwrap().put((*k).to_owned(), Arc::clone(v));
            }
            for (slot, k) in out.iter_mut().zip(keys) {
                if slot.is_none() {
                    *slot = Some(Arc::clone(&fetched[k]));
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.shards.iter().map(|s| s.lock().unwrap().len()).sum(),
        }
    }

    pub fn provider_info(&self) -> ProviderInfo {
        self.provider.info()
    }
}

impl std::fmt::Debug for EmbeddingStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingStore")
            .field("provider", &self.provider.info())
            .field("stats", &self.stats())
            .finish()
    }
}
