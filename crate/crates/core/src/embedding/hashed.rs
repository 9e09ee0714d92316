use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingProvider, EmbeddingVector, ProviderInfo};
use crate::error::Result;
use crate::Embedding;

/// Deterministic pseudo-random embeddings derived from the key bytes.
///
/// Distinct keys map to nearly orthogonal vectors in high dimension and
/// equal keys to equal vectors. Intended for tests, fixtures and generating
/// placeholder tables; it carries no semantics.
#[derive(Clone, Debug)]
pub struct HashedProvider {
    dim: usize,
}

impl HashedProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim }
    }

    pub fn vector(&self, key: &str) -> Embedding {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(key.as_bytes()));
        let values = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        EmbeddingVector::normalized(values).expect("random vector is non-zero")
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

impl EmbeddingProvider for HashedProvider {
    fn embed_batch(&self, keys: &[&str]) -> Result<Vec<Embedding>> {
        Ok(keys.iter().map(|k| self.vector(k)).collect())
    }

    fn info(&self) -> ProviderInfo {
        ProviderInfo {
            mode: "hashed".into(),
            location: String::new(),
            dim: Some(self.dim),
        }
    }
}
