//! Line-delimited JSON inputs and the ground-truth store.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sgr::graph::validate_graph;
use sgr::{DatasetProfile, SceneGraph};

use crate::error::EngineError;

/// Parses one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, EngineError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EngineError::new("IO", e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| EngineError::new("INGESTION", format!("line {}: {e}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn load_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EngineError> {
    let file = std::fs::File::open(path)
        .map_err(|e| EngineError::new("IO", format!("{}: {e}", path.display())))?;
    read_jsonl(BufReader::new(file))
        .map_err(|e| EngineError::new(&e.code, format!("{}: {}", path.display(), e.message)))
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// A completion to score or evaluate. Also accepts CoT records, whose
/// `prompt_ref` names the image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionItem {
    #[serde(default)]
    pub sample_id: Option<String>,
    #[serde(alias = "prompt_ref")]
    pub image_id: String,
    #[serde(alias = "completion_text", alias = "response_text")]
    pub text: String,
}

impl CompletionItem {
    pub fn sample_id(&self) -> &str {
        self.sample_id.as_deref().unwrap_or(&self.image_id)
    }
}

/// Ground-truth graphs keyed by image id, in file order. Read-only once
/// loaded; every graph validates against the profile.
#[derive(Debug)]
pub struct GroundTruthStore {
    graphs: Vec<SceneGraph>,
    index: HashMap<String, usize>,
}

impl GroundTruthStore {
    pub fn new(graphs: Vec<SceneGraph>, profile: &DatasetProfile) -> Result<Self, EngineError> {
        let mut index = HashMap::with_capacity(graphs.len());
        for (i, g) in graphs.iter().enumerate() {
            let report = validate_graph(g, profile);
            if !report.is_valid() {
                let v = &report.violations[0];
                return Err(EngineError::new(
                    "INVALID_GROUND_TRUTH",
                    format!("graph {} ({}): {:?} {}", i + 1, g.image_id, v.code, v.detail),
                ));
            }
            if index.insert(g.image_id.clone(), i).is_some() {
                return Err(EngineError::new(
                    "INVALID_GROUND_TRUTH",
                    format!("image_id `{}` appears twice", g.image_id),
                ));
            }
        }
        Ok(Self { graphs, index })
    }

    pub fn load(path: &Path, profile: &DatasetProfile) -> Result<Self, EngineError> {
        Self::new(load_jsonl(path)?, profile)
    }

    pub fn get(&self, image_id: &str) -> Option<&SceneGraph> {
        self.index.get(image_id).map(|&i| &self.graphs[i])
    }

    pub fn graphs(&self) -> &[SceneGraph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}
