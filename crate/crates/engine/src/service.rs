//! Request handling shared by the CLI and the HTTP service.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sgr::embedding::{CacheStats, ProviderInfo};
use sgr::eval::{aggregate, evaluate_completion, partition_predicates, EvalConfig, EvalReport, PartitionSpec, SceneTally};
use sgr::gspo::gspo_objective;
use sgr::reward::{score_parsed, RewardBreakdown, RewardConfig};
use sgr::structured_io::{parse_completion, ImageFrame};
use sgr::{DatasetProfile, EmbeddingStore, GspoResult, PolicyGroup, Real, SCHEMA_VERSION};

use crate::config::{required, EngineConfig};
use crate::error::EngineError;
use crate::store::{CompletionItem, GroundTruthStore};

/// Everything loaded at startup. Shared read-only across requests; only the
/// embedding cache mutates.
pub struct Engine {
    pub config: EngineConfig,
    pub profile: Arc<DatasetProfile>,
    pub gt: Arc<GroundTruthStore>,
    pub embeddings: Arc<EmbeddingStore>,
    pub partition: PartitionSpec,
}

impl Engine {
    pub fn new(
        config: EngineConfig,
        profile: DatasetProfile,
        gt: GroundTruthStore,
        embeddings: EmbeddingStore,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let partition = partition_predicates(&profile)?;
        Ok(Self {
            config,
            profile: Arc::new(profile),
            gt: Arc::new(gt),
            embeddings: Arc::new(embeddings),
            partition,
        })
    }

    /// Loads profile, ground truth and embedding source named in `config`.
    pub fn open(config: EngineConfig) -> Result<Self, EngineError> {
        let profile = DatasetProfile::load(required(&config.profile_path, "profile_path")?)?;
        let gt = GroundTruthStore::load(required(&config.gt_path, "gt_path")?, &profile)?;
        let embeddings = required(&config.embedding, "embedding source")?.open()?;
        Self::new(config, profile, gt, embeddings)
    }

    fn check_batch(&self, n: usize) -> Result<(), EngineError> {
        if n > self.config.server.max_batch {
            return Err(EngineError::new(
                "BATCH_TOO_LARGE",
                format!("{n} items exceeds the limit of {}", self.config.server.max_batch),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    /// Must name the loaded profile when given.
    #[serde(default)]
    pub profile: Option<String>,
    /// Overrides the engine's reward config for this request.
    #[serde(default)]
    pub reward: Option<RewardConfig>,
    pub items: Vec<CompletionItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub sample_id: String,
    pub image_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<RewardBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<EngineError>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub scored: usize,
    pub errors: usize,
    pub mean_composite: Real,
    /// Fraction of scored items with no usable graph.
    pub failure_rate: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub schema_version: String,
    pub profile: String,
    pub config: RewardConfig,
    pub results: Vec<ItemScore>,
    pub summary: ScoreSummary,
}

fn check_profile(engine: &Engine, name: &Option<String>) -> Result<(), EngineError> {
    match name {
        Some(n) if *n != engine.profile.name => Err(EngineError::request(format!(
            "profile `{n}` is not loaded (serving `{}`)",
            engine.profile.name
        ))),
        _ => Ok(()),
    }
}

/// Scores every item independently on the current rayon pool. Response order
/// matches request order.
pub fn handle_score(engine: &Engine, req: &ScoreRequest) -> Result<ScoreResponse, EngineError> {
    check_profile(engine, &req.profile)?;
    engine.check_batch(req.items.len())?;
    let cfg = req.reward.clone().unwrap_or_else(|| engine.config.reward.clone());
    cfg.validate()?;

    let scored: Vec<(ItemScore, bool)> = req
        .items
        .par_iter()
        .map(|item| {
            let mut failed = false;
            let outcome = match engine.gt.get(&item.image_id) {
                None => Err(EngineError::new(
                    "UNKNOWN_IMAGE",
                    format!("image_id `{}` is not in the ground-truth store", item.image_id),
                )),
                Some(gt) => {
                    let parsed = parse_completion(&item.text, &engine.profile, &ImageFrame::of(gt));
                    failed = parsed.graph.is_none();
                    score_parsed(&parsed, gt, &engine.profile, &cfg, &engine.embeddings).map_err(EngineError::from)
                }
            };
            let (breakdown, error) = match outcome {
                Ok(b) => (Some(b), None),
                Err(e) => (None, Some(e)),
            };
            let score = ItemScore {
                sample_id: item.sample_id().to_owned(),
                image_id: item.image_id.clone(),
                breakdown,
                error,
            };
            (score, failed)
        })
        .collect();

    let (mut n, mut failures, mut composite) = (0usize, 0usize, 0.0);
    for (item, failed) in &scored {
        if let Some(b) = &item.breakdown {
            n += 1;
            failures += *failed as usize;
            composite += b.composite;
        }
    }
    let results: Vec<ItemScore> = scored.into_iter().map(|(s, _)| s).collect();
    let ratio = |x: Real| if n == 0 { 0.0 } else { x / n as Real };
    let summary = ScoreSummary {
        count: results.len(),
        scored: n,
        errors: results.len() - n,
        mean_composite: ratio(composite),
        failure_rate: ratio(failures as Real),
    };
    Ok(ScoreResponse {
        schema_version: SCHEMA_VERSION.into(),
        profile: engine.profile.name.clone(),
        config: cfg,
        results,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantagesRequest {
    #[serde(default)]
    pub epsilon: Option<Real>,
    /// Groups are kept as raw JSON so one malformed group fails alone.
    pub groups: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<GspoResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<EngineError>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantagesResponse {
    pub schema_version: String,
    pub epsilon: Real,
    pub results: Vec<GroupOutcome>,
}

pub fn handle_advantages(engine: &Engine, req: &AdvantagesRequest) -> Result<AdvantagesResponse, EngineError> {
    engine.check_batch(req.groups.len())?;
    let epsilon = req.epsilon.unwrap_or(engine.config.gspo.epsilon);
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(EngineError::config("epsilon must lie in (0, 1)"));
    }
    let results = req
        .groups
        .par_iter()
        .map(|raw| {
            let outcome = serde_json::from_value::<PolicyGroup>(raw.clone())
                .map_err(|e| EngineError::request(format!("malformed group: {e}")))
                .and_then(|g| gspo_objective(&g, epsilon).map_err(EngineError::from));
            match outcome {
                Ok(r) => GroupOutcome {
                    result: Some(r),
                    error: None,
                },
                Err(e) => GroupOutcome {
                    result: None,
                    error: Some(e),
                },
            }
        })
        .collect();
    Ok(AdvantagesResponse {
        schema_version: SCHEMA_VERSION.into(),
        epsilon,
        results,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub eval: Option<EvalConfig>,
    pub items: Vec<CompletionItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemError {
    pub sample_id: String,
    pub image_id: String,
    pub error: EngineError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub schema_version: String,
    pub profile: String,
    pub config: EvalConfig,
    pub partition: PartitionSpec,
    pub evaluated: usize,
    pub report: EvalReport,
    pub errors: Vec<ItemError>,
}

pub fn handle_eval(engine: &Engine, req: &EvalRequest) -> Result<EvalResponse, EngineError> {
    check_profile(engine, &req.profile)?;
    engine.check_batch(req.items.len())?;
    let cfg = req.eval.clone().unwrap_or_else(|| engine.config.eval.clone());
    cfg.validate()?;
    let outcomes: Vec<Result<SceneTally, ItemError>> = req
        .items
        .par_iter()
        .map(|item| match engine.gt.get(&item.image_id) {
            Some(gt) => Ok(evaluate_completion(&item.text, gt, &engine.profile, &cfg)),
            None => Err(ItemError {
                sample_id: item.sample_id().to_owned(),
                image_id: item.image_id.clone(),
                error: EngineError::new("UNKNOWN_IMAGE", format!("image_id `{}` is not in the ground-truth store", item.image_id)),
            }),
        })
        .collect();
    let mut tallies = Vec::new();
    let mut errors = Vec::new();
    for o in outcomes {
        match o {
            Ok(t) => tallies.push(t),
            Err(e) => errors.push(e),
        }
    }
    let report = aggregate(&tallies, &engine.partition)?;
    Ok(EvalResponse {
        schema_version: SCHEMA_VERSION.into(),
        profile: engine.profile.name.clone(),
        config: cfg,
        partition: engine.partition.clone(),
        evaluated: tallies.len(),
        report,
        errors,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderStatus {
    #[serde(flatten)]
    pub info: ProviderInfo,
    pub reachable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<EngineError>,
    pub cache: CacheStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileStatus {
    pub name: String,
    pub categories: usize,
    pub predicates: usize,
    pub relation_types: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub schema_version: String,
    /// `ok`, or `degraded` when the embedding provider cannot serve a probe.
    pub status: String,
    pub profile: ProfileStatus,
    pub ground_truth_images: usize,
    pub provider: ProviderStatus,
}

pub fn handle_health(engine: &Engine) -> Health {
    let probe = engine
        .profile
        .categories
        .iter()
        .next()
        .map(|c| engine.embeddings.embed(&sgr::graph::canonical_token(c)).map(|_| ()));
    let error = match probe {
        Some(Err(e)) => Some(EngineError::from(e)),
        _ => None,
    };
    Health {
        schema_version: SCHEMA_VERSION.into(),
        status: if error.is_none() { "ok" } else { "degraded" }.into(),
        profile: ProfileStatus {
            name: engine.profile.name.clone(),
            categories: engine.profile.categories.len(),
            predicates: engine.profile.predicates.len(),
            relation_types: engine.profile.relation_types().to_vec(),
        },
        ground_truth_images: engine.gt.len(),
        provider: ProviderStatus {
            info: engine.embeddings.provider_info(),
            reachable: error.is_none(),
            error,
            cache: engine.embeddings.stats(),
        },
    }
}
