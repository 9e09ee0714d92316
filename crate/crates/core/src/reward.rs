//! Process and format rewards for a single completion.
//!
//! | component  | signal                                                        |
//! |------------|---------------------------------------------------------------|
//! | `format`   | valid stages / 3                                              |
//! | `category` | F1 between predicted and ground-truth category sets          |
//! | `box`      | mean over GT of `0.5·IoU + 0.5·max(0, 1 − L1)` for matched GT |
//! | `recall`   | mean over GT of the per-pair recall score                     |
//! | `fine`     | frequency-weighted mean of matched triplet similarities       |
//! | `coarse`   | cluster coverage × clamped cluster density                    |
//!
//! All similarities are clamped cosines, so every component is in `[0, 1]`.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assignment::{iou, l1_norm, solve_matching, MatchConfig, Matching};
use crate::cluster::{build_prototypes, DbscanParams};
use crate::embedding::{reward_sim, EmbeddingStore};
use crate::error::{Error, Result};
use crate::graph::{canonical_token, DatasetProfile, InstanceKey, ObjectInstance, RelationTriplet, SceneGraph};
use crate::scalar::unit_clamp;
use crate::structured_io::{format_reward, parse_completion, ImageFrame, ParsedCompletion};
use crate::{Embedding, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompositeWeights {
    pub format: Real,
    pub category: Real,
    pub node: Real,
    pub relation: Real,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        Self {
            format: 0.1,
            category: 0.2,
            node: 0.3,
            relation: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub w_base: Real,
    pub w_inc: Real,
    /// Cluster similarity threshold for the coarse reward.
    pub tau: Real,
    pub composite_weights: CompositeWeights,
    /// Share of `box` in the node reward; `recall` gets the rest.
    pub node_box_share: Real,
    /// Share of `fine` in the relation reward; `coarse` gets the rest.
    pub relation_fine_share: Real,
    pub dbscan: DbscanParams<Real>,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w_base: 1.0,
            w_inc: 1.0,
            tau: 0.75,
            composite_weights: CompositeWeights::default(),
            node_box_share: 0.5,
            relation_fine_share: 0.5,
            dbscan: DbscanParams::default(),
            matching: MatchConfig::default(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if !(self.w_base.is_finite() && self.w_base > 0.0) {
            return bad("w_base must be positive");
        }
        if !(self.w_inc.is_finite() && self.w_inc >= 0.0) {
            return bad("w_inc must be non-negative");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)");
        }
        let w = &self.composite_weights;
        let ws = [w.format, w.category, w.node, w.relation];
        if ws.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return bad("composite weights must be non-negative");
        }
        if (ws.iter().sum::<Real>() - 1.0).abs() > 1e-9 {
            return bad("composite weights must sum to 1");
        }
        for share in [self.node_box_share, self.relation_fine_share] {
            if !(0.0..=1.0).contains(&share) {
                return bad("mix shares must lie in [0, 1]");
            }
        }
        self.dbscan.validate()?;
        self.matching.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format: Real,
    pub category: Real,
    #[serde(rename = "box")]
    pub box_reward: Real,
    pub recall: Real,
    pub fine: Real,
    pub coarse: Real,
    pub composite: Real,
}

impl RewardBreakdown {
    /// Fills in `composite` from the components.
    pub fn finish(mut self, cfg: &RewardConfig) -> Self {
        let w = &cfg.composite_weights;
        let node = cfg.node_box_share * self.box_reward + (1.0 - cfg.node_box_share) * self.recall;
        let relation = cfg.relation_fine_share * self.fine + (1.0 - cfg.relation_fine_share) * self.coarse;
        self.composite = unit_clamp(
            w.format * self.format + w.category * self.category + w.node * node + w.relation * relation,
        );
        self
    }
}

/// F1 of the two category sets. Two empty sets agree perfectly.
pub fn category_reward<'a>(
    pred: impl IntoIterator<Item = &'a str>,
    gt: impl IntoIterator<Item = &'a str>,
) -> Real {
    let pred: BTreeSet<&str> = pred.into_iter().collect();
    let gt: BTreeSet<&str> = gt.into_iter().collect();
    if pred.is_empty() && gt.is_empty() {
        return 1.0;
    }
    let tp = pred.intersection(&gt).count() as Real;
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / pred.len() as Real;
    let recall = tp / gt.len() as Real;
    2.0 * precision * recall / (precision + recall)
}

/// Per-pair recall score: 1 when the box overlaps (IoU > 0.5) and the class
/// agrees, 0.5 when exactly one holds, else 0.
pub fn pair_recall(iou: Real, same_class: bool) -> Real {
    match (iou > 0.5, same_class) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.5,
        (false, false) => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeReward {
    #[serde(rename = "box")]
    pub box_reward: Real,
    pub recall: Real,
}

pub fn node_reward(
    matching: &Matching,
    gt: &[ObjectInstance],
    pred: &[ObjectInstance],
    width: u32,
    height: u32,
) -> NodeReward {
    if gt.is_empty() {
        let v = if pred.is_empty() { 1.0 } else { 0.0 };
        return NodeReward {
            box_reward: v,
            recall: v,
        };
    }
    let (w, h) = (width as Real, height as Real);
    let (mut box_sum, mut recall_sum) = (0.0, 0.0);
    for p in &matching.pairs {
        let (g, q) = (&gt[p.gt], &pred[p.pred]);
        let overlap = iou(&g.bbox, &q.bbox);
        box_sum += 0.5 * overlap + 0.5 * (1.0 - l1_norm(&g.bbox, &q.bbox, w, h)).max(0.0);
        recall_sum += pair_recall(overlap, g.category == q.category);
    }
    let n = gt.len() as Real;
    NodeReward {
        box_reward: box_sum / n,
        recall: recall_sum / n,
    }
}

/// Frequency-adaptive weight `w_base + w_inc·α(p)`, with α falling from 1 at
/// the rarest predicate to 0 at the most frequent on a log scale.
pub fn predicate_weight(predicate: &str, profile: &DatasetProfile, cfg: &RewardConfig) -> Result<Real> {
    let f = profile
        .frequency(predicate)
        .ok_or_else(|| Error::UnknownPredicate(predicate.to_owned()))?;
    let (f_max, f_min) = (profile.f_max(), profile.f_min());
    let alpha = if f_max == f_min {
        0.0
    } else {
        let info = |x: Real| (1.0 / x).ln();
        ((info(f) - info(f_max)) / (info(f_min) - info(f_max))).clamp(0.0, 1.0)
    };
    Ok(cfg.w_base + cfg.w_inc * alpha)
}

fn embed_keys(store: &EmbeddingStore, keys: &[String]) -> Result<Vec<Arc<Embedding>>> {
    let refs: Vec<&str> = keys.iter().map(String::as_str).collect();
    store.embed_many(&refs)
}

/// Per-GT-triplet similarity after one-to-one consumption of predictions.
/// Exposed for diagnostics; [`fine_reward`] is the weighted mean of these.
pub fn fine_similarities(
    gt: &SceneGraph,
    pred: &SceneGraph,
    matching: &Matching,
    store: &EmbeddingStore,
) -> Result<Vec<Real>> {
    let gt_pos = gt.index_of();
    let pred_pos = pred.index_of();
    let mut to_pred = vec![None; gt.objects.len()];
    for p in &matching.pairs {
        to_pred[p.gt] = Some(p.pred);
    }
    fn ends(r: &RelationTriplet, pos: &HashMap<&InstanceKey, usize>) -> Option<(usize, usize)> {
        Some((*pos.get(&r.subject)?, *pos.get(&r.object)?))
    }

    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (j, t) in gt.relations.iter().enumerate() {
        let Some((s, o)) = ends(t, &gt_pos) else { continue };
        let (Some(ms), Some(mo)) = (to_pred[s], to_pred[o]) else { continue };
        for (i, q) in pred.relations.iter().enumerate() {
            if ends(q, &pred_pos) == Some((ms, mo)) {
                candidates.push((j, i));
            }
        }
    }
    let mut sims = vec![0.0; gt.relations.len()];
    if candidates.is_empty() {
        return Ok(sims);
    }

    let mut keys = Vec::with_capacity(candidates.len() * 4);
    for &(j, i) in &candidates {
        let (t, q) = (&gt.relations[j], &pred.relations[i]);
        keys.push(t.canonical_key());
        keys.push(q.canonical_key());
        keys.push(canonical_token(&t.predicate));
        keys.push(canonical_token(&q.predicate));
    }
    let vecs = embed_keys(store, &keys)?;
    let mut scored: Vec<(Real, usize, usize)> = Vec::with_capacity(candidates.len());
    for (k, &(j, i)) in candidates.iter().enumerate() {
        let v = &vecs[4 * k..4 * k + 4];
        let s = reward_sim(&v[0], &v[1])? * reward_sim(&v[2], &v[3])?;
        scored.push((s, j, i));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_done = vec![false; gt.relations.len()];
    let mut pred_used = vec![false; pred.relations.len()];
    for (s, j, i) in scored {
        if !gt_done[j] && !pred_used[i] {
            gt_done[j] = true;
            pred_used[i] = true;
            sims[j] = s;
        }
    }
    Ok(sims)
}

pub fn fine_reward(
    gt: &SceneGraph,
    pred: &SceneGraph,
    matching: &Matching,
    profile: &DatasetProfile,
    cfg: &RewardConfig,
    store: &EmbeddingStore,
) -> Result<Real> {
    if gt.relations.is_empty() {
        return Ok(if pred.relations.is_empty() { 1.0 } else { 0.0 });
    }
    let sims = fine_similarities(gt, pred, matching, store)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, s) in gt.relations.iter().zip(sims) {
        let w = predicate_weight(&t.predicate, profile, cfg)?;
        num += s * w;
        den += w;
    }
    Ok(unit_clamp(num / den))
}

/// Cluster bookkeeping behind the coarse reward.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoarseDetail {
    pub clusters: usize,
    pub covered: usize,
    /// Ground-truth triplets per cluster.
    pub gt_counts: Vec<usize>,
    /// Predictions assigned to each cluster (best centroid at or above τ).
    pub pred_counts: Vec<usize>,
    pub density: Real,
    pub reward: Real,
}

pub fn coarse_detail(
    gt: &SceneGraph,
    pred: &SceneGraph,
    cfg: &RewardConfig,
    store: &EmbeddingStore,
) -> Result<CoarseDetail> {
    if gt.relations.is_empty() {
        return Ok(CoarseDetail {
            reward: if pred.relations.is_empty() { 1.0 } else { 0.0 },
            ..Default::default()
        });
    }
    let gt_keys: Vec<String> = gt.relations.iter().map(|r| r.canonical_key()).collect();
    let points: Vec<Embedding> = embed_keys(store, &gt_keys)?
        .into_iter()
        .map(|v| (*v).clone())
        .collect();
    let prototypes = build_prototypes(&points, &cfg.dbscan)?;
    let k = prototypes.len();
    let mut gt_counts = vec![0; k];
    for &c in &prototypes.assignment {
        gt_counts[c] += 1;
    }

    let pred_keys: Vec<String> = pred.relations.iter().map(|r| r.canonical_key()).collect();
    let pred_vecs = embed_keys(store, &pred_keys)?;
    let mut covered = vec![false; k];
    let mut pred_counts = vec![0; k];
    for v in &pred_vecs {
        let mut best: Option<(usize, Real)> = None;
        for (c, proto) in prototypes.clusters.iter().enumerate() {
            let s = reward_sim(v, &proto.centroid)?;
            if s >= cfg.tau {
                covered[c] = true;
            }
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        if let Some((c, s)) = best {
            if s >= cfg.tau {
                pred_counts[c] += 1;
            }
        }
    }

    let n_covered = covered.iter().filter(|c| **c).count();
    let (mut num, mut den) = (0usize, 0usize);
    for c in (0..k).filter(|&c| covered[c]) {
        num += pred_counts[c];
        den += gt_counts[c];
    }
    let density = if den == 0 { 0.0 } else { (num as Real / den as Real).min(1.0) };
    let reward = unit_clamp(n_covered as Real / k as Real * density);
    Ok(CoarseDetail {
        clusters: k,
        covered: n_covered,
        gt_counts,
        pred_counts,
        density,
        reward,
    })
}

pub fn coarse_reward(
    gt: &SceneGraph,
    pred: &SceneGraph,
    cfg: &RewardConfig,
    store: &EmbeddingStore,
) -> Result<Real> {
    Ok(coarse_detail(gt, pred, cfg, store)?.reward)
}

/// Scores an already-parsed completion.
pub fn score_parsed(
    parsed: &ParsedCompletion,
    gt: &SceneGraph,
    profile: &DatasetProfile,
    cfg: &RewardConfig,
    store: &EmbeddingStore,
) -> Result<RewardBreakdown> {
    let format = format_reward(parsed);
    let (Some(pred), Some(cats)) = (&parsed.graph, &parsed.category_stage) else {
        return Ok(RewardBreakdown {
            format,
            ..Default::default()
        }
        .finish(cfg));
    };
    let category = category_reward(cats.iter().map(String::as_str), gt.categories());
    let matching = solve_matching(&gt.objects, &pred.objects, &cfg.matching, store, gt.width, gt.height)?;
    let node = node_reward(&matching, &gt.objects, &pred.objects, gt.width, gt.height);
    let fine = fine_reward(gt, pred, &matching, profile, cfg, store)?;
    let coarse = coarse_reward(gt, pred, cfg, store)?;
    Ok(RewardBreakdown {
        format,
        category,
        box_reward: node.box_reward,
        recall: node.recall,
        fine,
        coarse,
        composite: 0.0,
    }
    .finish(cfg))
}

/// Parses `text` against the ground truth's frame and scores it. A
/// completion that does not yield a graph earns only its format credit.
pub fn composite_reward(
    text: &str,
    gt: &SceneGraph,
    profile: &DatasetProfile,
    cfg: &RewardConfig,
    store: &EmbeddingStore,
) -> Result<RewardBreakdown> {
    let parsed = parse_completion(text, profile, &ImageFrame::of(gt));
    score_parsed(&parsed, gt, profile, cfg, store)
}
