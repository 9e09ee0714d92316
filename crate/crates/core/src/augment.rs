//! Filtering of externally generated relation candidates and SFT record
//! construction.
//!
//! A candidate survives when it passes the structural checks and its
//! class-level embedding is close enough to some ground-truth triplet of the
//! same image: `max_gt reward_sim(e_cand, e_gt) ≥ θ`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::embedding::{reward_sim, EmbeddingStore};
use crate::error::{Error, Result};
use crate::eval::PartitionSpec;
use crate::graph::{ClassTriple, DatasetProfile, InstanceKey, RelationTriplet, SceneGraph};
use crate::structured_io::{serialize_cot, CotRecord};
use crate::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    #[default]
    Augmented,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateTriplet {
    pub image_id: String,
    pub subject: String,
    pub predicate: String,
    pub object: String,
    #[serde(default)]
    pub provenance: Provenance,
    /// Filled from the taxonomy when absent.
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub rel_type: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub theta: Real,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { theta: 0.8 }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!("theta {} outside [0, 1]", self.theta)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DropReason {
    KeyFormat,
    /// No ground truth is loaded for the candidate's image.
    UnknownImage,
    ImageMismatch,
    DanglingInstance,
    UnknownPredicate,
    TypeMismatch,
    SelfRelation,
    /// Same subject, predicate and object as a ground-truth relation.
    Duplicate,
    /// Repeats an earlier candidate.
    DuplicateCandidate,
    NoGtAnchor,
    BelowThreshold,
}

/// Structural checks. On success returns the typed relation.
pub fn validate_candidate(
    c: &CandidateTriplet,
    gt: &SceneGraph,
    profile: &DatasetProfile,
) -> std::result::Result<RelationTriplet, DropReason> {
    let (Ok(subject), Ok(object)) = (c.subject.parse::<InstanceKey>(), c.object.parse::<InstanceKey>()) else {
        return Err(DropReason::KeyFormat);
    };
    if c.image_id != gt.image_id {
        return Err(DropReason::ImageMismatch);
    }
    if gt.object(&subject).is_none() || gt.object(&object).is_none() {
        return Err(DropReason::DanglingInstance);
    }
    let Some(rel_type) = profile.rel_type_of(&c.predicate) else {
        return Err(DropReason::UnknownPredicate);
    };
    if c.rel_type.as_deref().is_some_and(|t| t != rel_type) {
        return Err(DropReason::TypeMismatch);
    }
    if subject == object {
        return Err(DropReason::SelfRelation);
    }
    let t = RelationTriplet::new(subject, c.predicate.clone(), object, rel_type);
    if gt.relations.iter().any(|r| r.same_edge(&t) && r.predicate == t.predicate) {
        return Err(DropReason::Duplicate);
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    #[serde(flatten)]
    pub candidate: CandidateTriplet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<DropReason>,
    /// Best similarity to a ground-truth triplet, when it was computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_similarity: Option<Real>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    /// Retained candidates with `type` filled in, in sorted order.
    pub retained: Vec<FilterRecord>,
    pub dropped: Vec<FilterRecord>,
}

impl FilterOutcome {
    pub fn retained_candidates(&self) -> impl Iterator<Item = &CandidateTriplet> {
        self.retained.iter().map(|r| &r.candidate)
    }
}

/// Candidates are processed in sorted order, so the outcome does not depend
/// on input order. Every input candidate lands in exactly one output list.
pub fn filter_candidates(
    cands: &[CandidateTriplet],
    gt: &SceneGraph,
    profile: &DatasetProfile,
    cfg: &FilterConfig,
    store: &EmbeddingStore,
) -> Result<FilterOutcome> {
    cfg.validate()?;
    let mut sorted: Vec<&CandidateTriplet> = cands.iter().collect();
    sorted.sort();

    let drop = |c: &CandidateTriplet, reason, sim| FilterRecord {
        candidate: c.clone(),
        reason: Some(reason),
        max_similarity: sim,
    };
    let mut out = FilterOutcome::default();
    if gt.relations.is_empty() {
        out.dropped = sorted.into_iter().map(|c| drop(c, DropReason::NoGtAnchor, None)).collect();
        return Ok(out);
    }

    let gt_keys: Vec<String> = gt.relations.iter().map(RelationTriplet::canonical_key).collect();
    let gt_refs: Vec<&str> = gt_keys.iter().map(String::as_str).collect();
    let gt_vecs = store.embed_many(&gt_refs)?;

    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    for c in sorted {
        let t = match validate_candidate(c, gt, profile) {
            Ok(t) => t,
            Err(reason) => {
                out.dropped.push(drop(c, reason, None));
                continue;
            }
        };
        if !seen.insert((t.subject.to_string(), t.predicate.clone(), t.object.to_string())) {
            out.dropped.push(drop(c, DropReason::DuplicateCandidate, None));
            continue;
        }
        let e = store.embed(&t.canonical_key())?;
        let mut best: Real = 0.0;
        for g in &gt_vecs {
            best = best.max(reward_sim(&e, g)?);
        }
        if best >= cfg.theta {
            let mut kept = c.clone();
            kept.rel_type = Some(t.rel_type);
            out.retained.push(FilterRecord {
                candidate: kept,
                reason: None,
                max_similarity: Some(best),
            });
        } else {
            out.dropped.push(drop(c, DropReason::BelowThreshold, Some(best)));
        }
    }
    Ok(out)
}

/// Merges retained candidates into the ground truth and renders the CoT
/// record of the merged graph.
pub fn merge_candidates(
    gt: &SceneGraph,
    retained: &[CandidateTriplet],
    profile: &DatasetProfile,
) -> Result<SceneGraph> {
    let mut merged = gt.clone();
    for c in retained {
        let subject: InstanceKey = c.subject.parse()?;
        let object: InstanceKey = c.object.parse()?;
        let rel_type = profile
            .rel_type_of(&c.predicate)
            .ok_or_else(|| Error::UnknownPredicate(c.predicate.clone()))?;
        merged
            .relations
            .push(RelationTriplet::new(subject, c.predicate.clone(), object, rel_type));
    }
    Ok(merged)
}

pub fn build_sft_record(gt: &SceneGraph, retained: &[CandidateTriplet], profile: &DatasetProfile) -> Result<CotRecord> {
    serialize_cot(&merge_candidates(gt, retained, profile)?, profile)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub images: usize,
    pub objects: usize,
    pub relations: usize,
    pub objects_per_image: Real,
    pub relations_per_image: Real,
    /// Distinct (subject class, predicate, object class) triples.
    pub distinct_triplets: usize,
    /// Relation count per relation type.
    pub per_type: BTreeMap<String, usize>,
    /// Relation count per partition group.
    pub group_counts: BTreeMap<String, usize>,
    /// `group_counts` as fractions of all relations.
    pub group_share: BTreeMap<String, Real>,
}

pub fn corpus_stats(graphs: &[SceneGraph], profile: &DatasetProfile, partition: &PartitionSpec) -> Result<CorpusStats> {
    if graphs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut objects = 0;
    let mut relations = 0;
    let mut distinct: BTreeSet<ClassTriple> = BTreeSet::new();
    let mut per_type: BTreeMap<String, usize> = profile.relation_types().iter().map(|t| (t.clone(), 0)).collect();
    let mut group_counts: BTreeMap<String, usize> =
        partition.groups().iter().map(|(g, _)| (g.to_string(), 0)).collect();
    for g in graphs {
        objects += g.objects.len();
        relations += g.relations.len();
        for r in &g.relations {
            distinct.insert(r.class_triple());
            *per_type.entry(r.rel_type.clone()).or_default() += 1;
            if let Some(group) = partition.group_of(&r.predicate) {
                *group_counts.entry(group.to_owned()).or_default() += 1;
            }
        }
    }
    let n = graphs.len() as Real;
    let group_share = group_counts
        .iter()
        .map(|(g, &c)| (g.clone(), if relations == 0 { 0.0 } else { c as Real / relations as Real }))
        .collect();
    Ok(CorpusStats {
        images: graphs.len(),
        objects,
        relations,
        objects_per_image: objects as Real / n,
        relations_per_image: relations as Real / n,
        distinct_triplets: distinct.len(),
        per_type,
        group_counts,
        group_share,
    })
}
