#![allow(dead_code)]

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scenegraph_engine::store::CompletionItem;
use scenegraph_engine::{Engine, EngineConfig};
use sgr::{DatasetProfile, EmbeddingSource, SceneGraph};
use sgr_testkit::fixtures;
use tempfile::TempDir;

/// Profile, ground truth and embedding table written to a scratch dir.
pub struct Workspace {
    pub dir: TempDir,
    pub profile: DatasetProfile,
    pub graphs: Vec<SceneGraph>,
    pub entries: Vec<(String, Vec<f64>)>,
}

impl Workspace {
    pub fn new(images: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let profile = fixtures::profile();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graphs: Vec<SceneGraph> = (0..images)
            .map(|i| fixtures::anchored_scene(&mut rng, &profile, &format!("img{i:04}")))
            .collect();
        let entries = fixtures::embedding_entries(16, seed);
        std::fs::write(dir.path().join("profile.json"), serde_json::to_string_pretty(profile.spec()).unwrap())
            .unwrap();
        fixtures::write_jsonl(&dir.path().join("gt.jsonl"), &graphs).unwrap();
        fixtures::write_table(&dir.path().join("table.jsonl"), &entries).unwrap();
        Self {
            dir,
            profile,
            graphs,
            entries,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config(&self) -> EngineConfig {
        EngineConfig {
            profile_path: Some(self.path("profile.json")),
            gt_path: Some(self.path("gt.jsonl")),
            embedding: Some(EmbeddingSource::table(self.path("table.jsonl"))),
            ..Default::default()
        }
    }

    pub fn engine(&self) -> Engine {
        Engine::open(self.config()).unwrap()
    }

    /// One perturbed prediction per image.
    pub fn predictions(&self, seed: u64) -> Vec<CompletionItem> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.graphs
            .iter()
            .map(|g| {
                let pred = fixtures::perturb(&mut rng, g, &self.profile, 8);
                CompletionItem {
                    sample_id: Some(format!("{}-s{seed}", g.image_id)),
                    image_id: g.image_id.clone(),
                    text: fixtures::render(&pred, &self.profile),
                }
            })
            .collect()
    }

    /// The ground truth itself, rendered as completions.
    pub fn perfect(&self) -> Vec<CompletionItem> {
        self.graphs
            .iter()
            .map(|g| CompletionItem {
                sample_id: None,
                image_id: g.image_id.clone(),
                text: fixtures::render(g, &self.profile),
            })
            .collect()
    }
}
