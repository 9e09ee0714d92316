use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::{EmbeddingProvider, EmbeddingVector, ProviderInfo};
use crate::error::{Error, Result};
use crate::Embedding;

/// In-memory table loaded from a line-delimited `{"key", "vector"}` file.
#[derive(Debug, Default)]
pub struct TableProvider {
    entries: HashMap<String, Embedding>,
    dim: Option<usize>,
    location: String,
}

#[derive(Deserialize)]
struct Record {
    key: String,
    vector: Vec<f64>,
}

impl TableProvider {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let mut table = Self::read(BufReader::new(file))?;
        table.location = path.display().to_string();
        Ok(table)
    }

    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut table = Self::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fail = |message: String| Error::Ingestion { line: n + 1, message };
            let rec: Record = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
            table.insert(rec.key, rec.vector).map_err(|e| fail(e.to_string()))?;
        }
        Ok(table)
    }

    pub fn from_entries<K, I>(entries: I) -> Result<Self>
    where
        K: Into<String>,
        I: IntoIterator<Item = (K, Vec<f64>)>,
    {
        let mut table = Self::default();
        for (k, v) in entries {
            table.insert(k.into(), v)?;
        }
        Ok(table)
    }

    fn insert(&mut self, key: String, vector: Vec<f64>) -> Result<()> {
        if key.is_empty() {
            return Err(Error::EmptyInput);
        }
        let v = EmbeddingVector::normalized(vector)?;
        match self.dim {
            Some(d) if d != v.dim() => {
                return Err(Error::DimMismatch {
                    left: d,
                    right: v.dim(),
                })
            }
            _ => self.dim = Some(v.dim()),
        }
        if self.entries.contains_key(&key) {
            return Err(Error::InvalidConfig(format!("duplicate key `{key}`")));
        }
        self.entries.insert(key, v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl EmbeddingProvider for TableProvider {
    fn embed_batch(&self, keys: &[&str]) -> Result<Vec<Embedding>> {
        keys.iter()
            .map(|k| {
                self.entries
                    .get(*k)
                    .cloned()
                    .ok_or_else(|| Error::MissingEmbedding((*k).to_owned()))
            })
            .collect()
    }

    fn info(&self) -> ProviderInfo {
        ProviderInfo {
            mode: "table".into(),
            location: self.location.clone(),
            dim: self.dim,
        }
    }
}
