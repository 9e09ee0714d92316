//! SGDET evaluation: triplet correctness, recall family metrics and the
//! head/body/tail predicate partition.
//!
//! Generative outputs carry no confidence scores, so a prediction's position
//! in the output is its rank. Matching is greedy in that order and one-to-one
//! on both sides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::iou;
use crate::error::{Error, Result};
use crate::graph::{ClassTriple, DatasetProfile, SceneGraph};
use crate::structured_io::{parse_completion, ImageFrame};
use crate::{BoundingBox, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_threshold: Real,
    /// Only the first `top_k` predicted triplets are considered.
    pub top_k: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            top_k: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::InvalidConfig("iou_threshold must lie in (0, 1)".into()));
        }
        if self.top_k == Some(0) {
            return Err(Error::InvalidConfig("top_k must be positive".into()));
        }
        Ok(())
    }
}

/// A triplet with its endpoint boxes and classes looked up.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedTriplet<'a> {
    pub subject_class: &'a str,
    pub subject_box: BoundingBox,
    pub predicate: &'a str,
    pub object_class: &'a str,
    pub object_box: BoundingBox,
}

impl ResolvedTriplet<'_> {
    pub fn class_triple(&self) -> ClassTriple {
        ClassTriple(
            self.subject_class.to_owned(),
            self.predicate.to_owned(),
            self.object_class.to_owned(),
        )
    }
}

/// Relations whose endpoints exist in the graph, in order.
pub fn resolve_triplets(graph: &SceneGraph) -> Vec<ResolvedTriplet<'_>> {
    graph
        .relations
        .iter()
        .filter_map(|r| {
            let s = graph.object(&r.subject)?;
            let o = graph.object(&r.object)?;
            Some(ResolvedTriplet {
                subject_class: &s.category,
                subject_box: s.bbox,
                predicate: &r.predicate,
                object_class: &o.category,
                object_box: o.bbox,
            })
        })
        .collect()
}

pub fn triplet_correct(gt: &ResolvedTriplet, pred: &ResolvedTriplet, cfg: &EvalConfig) -> bool {
    gt.subject_class == pred.subject_class
        && gt.predicate == pred.predicate
        && gt.object_class == pred.object_class
        && iou(&gt.subject_box, &pred.subject_box) >= cfg.iou_threshold
        && iou(&gt.object_box, &pred.object_box) >= cfg.iou_threshold
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub hits: u64,
    pub total: u64,
}

impl Count {
    fn add(&mut self, hit: bool) {
        self.total += 1;
        self.hits += hit as u64;
    }

    fn merge(&mut self, other: Count) {
        self.hits += other.hits;
        self.total += other.total;
    }

    pub fn ratio(&self) -> Option<Real> {
        (self.total > 0).then(|| self.hits as Real / self.total as Real)
    }
}

/// Per-scene counts. Tallies merge associatively and commutatively.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneTally {
    pub scenes: u64,
    /// Scenes whose completion did not yield a graph.
    pub failed: u64,
    pub triplets: Count,
    pub zero_shot: Count,
    pub per_predicate: BTreeMap<String, Count>,
    pub detection: Count,
    pub per_category: BTreeMap<String, Count>,
}

impl SceneTally {
    pub fn merge(&mut self, other: &SceneTally) {
        self.scenes += other.scenes;
        self.failed += other.failed;
        self.triplets.merge(other.triplets);
        self.zero_shot.merge(other.zero_shot);
        for (k, c) in &other.per_predicate {
            self.per_predicate.entry(k.clone()).or_default().merge(*c);
        }
        self.detection.merge(other.detection);
        for (k, c) in &other.per_category {
            self.per_category.entry(k.clone()).or_default().merge(*c);
        }
    }
}

/// Greedy in prediction order: each prediction claims the first unclaimed
/// GT item it is correct for. Returns the per-GT hit flags.
pub fn greedy_hits<G, P>(gt: &[G], pred: &[P], correct: impl Fn(&G, &P) -> bool) -> Vec<bool> {
    let mut claimed = vec![false; gt.len()];
    for p in pred {
        if let Some(j) = (0..gt.len()).find(|&j| !claimed[j] && correct(&gt[j], p)) {
            claimed[j] = true;
        }
    }
    claimed
}

pub fn evaluate_scene(gt: &SceneGraph, pred: &SceneGraph, profile: &DatasetProfile, cfg: &EvalConfig) -> SceneTally {
    let mut tally = SceneTally {
        scenes: 1,
        ..Default::default()
    };
    let gt_t = resolve_triplets(gt);
    let mut pred_t = resolve_triplets(pred);
    if let Some(k) = cfg.top_k {
        pred_t.truncate(k);
    }
    let hits = greedy_hits(&gt_t, &pred_t, |g, p| triplet_correct(g, p, cfg));
    for (t, hit) in gt_t.iter().zip(hits) {
        tally.triplets.add(hit);
        tally.per_predicate.entry(t.predicate.to_owned()).or_default().add(hit);
        if !profile.is_seen_in_training(&t.class_triple()) {
            tally.zero_shot.add(hit);
        }
    }

    let det = greedy_hits(&gt.objects, &pred.objects, |g, p| {
        g.category == p.category && iou(&g.bbox, &p.bbox) >= cfg.iou_threshold
    });
    for (o, hit) in gt.objects.iter().zip(det) {
        tally.detection.add(hit);
        tally.per_category.entry(o.category.clone()).or_default().add(hit);
    }
    tally
}

/// Parses a completion and evaluates it. An unparseable completion counts
/// as a failure with no predictions.
pub fn evaluate_completion(
    text: &str,
    gt: &SceneGraph,
    profile: &DatasetProfile,
    cfg: &EvalConfig,
) -> SceneTally {
    let parsed = parse_completion(text, profile, &ImageFrame::of(gt));
    match &parsed.graph {
        Some(g) => evaluate_scene(gt, g, profile, cfg),
        None => {
            let empty = SceneGraph::new(gt.image_id.clone(), gt.width, gt.height);
            SceneTally {
                failed: 1,
                ..evaluate_scene(gt, &empty, profile, cfg)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    /// Each group in descending frequency order.
    pub head: Vec<String>,
    pub body: Vec<String>,
    pub tail: Vec<String>,
}

impl PartitionSpec {
    pub fn group_of(&self, predicate: &str) -> Option<&'static str> {
        let has = |g: &[String]| g.iter().any(|p| p == predicate);
        if has(&self.head) {
            Some("head")
        } else if has(&self.body) {
            Some("body")
        } else if has(&self.tail) {
            Some("tail")
        } else {
            None
        }
    }

    pub fn groups(&self) -> [(&'static str, &[String]); 3] {
        [("head", &self.head), ("body", &self.body), ("tail", &self.tail)]
    }
}

/// Top 30% / middle 30% / rest by descending frequency, ties broken by token.
pub fn partition_predicates(profile: &DatasetProfile) -> Result<PartitionSpec> {
    let n = profile.predicates.len();
    if n < 4 {
        return Err(Error::VocabTooSmall(n));
    }
    let mut ranked: Vec<(&String, Real)> = profile
        .predicates
        .iter()
        .map(|p| (p, profile.frequency(p).unwrap_or(0.0)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut names = ranked.into_iter().map(|(p, _)| p.clone());
    let k = n * 3 / 10;
    Ok(PartitionSpec {
        head: names.by_ref().take(k).collect(),
        body: names.by_ref().take(k).collect(),
        tail: names.collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recall: Real,
    pub m_recall: Real,
    pub zs_recall: Real,
    pub per_predicate_recall: BTreeMap<String, Real>,
    pub group_recall: BTreeMap<String, Real>,
    pub det_recall: Real,
    pub det_m_recall: Real,
    pub failure_rate: Real,
}

fn mean(values: impl IntoIterator<Item = Real>) -> Real {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as Real
    }
}

/// Metrics with an empty denominator are reported as 0.
pub fn aggregate(tallies: &[SceneTally], partition: &PartitionSpec) -> Result<EvalReport> {
    if tallies.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = SceneTally::default();
    for t in tallies {
        total.merge(t);
    }
    let per_predicate_recall: BTreeMap<String, Real> = total
        .per_predicate
        .iter()
        .filter_map(|(p, c)| Some((p.clone(), c.ratio()?)))
        .collect();
    let group_recall = partition
        .groups()
        .into_iter()
        .map(|(name, members)| {
            let r = mean(members.iter().filter_map(|p| per_predicate_recall.get(p).copied()));
            (name.to_owned(), r)
        })
        .collect();
    Ok(EvalReport {
        recall: total.triplets.ratio().unwrap_or(0.0),
        m_recall: mean(per_predicate_recall.values().copied()),
        zs_recall: total.zero_shot.ratio().unwrap_or(0.0),
        group_recall,
        det_recall: total.detection.ratio().unwrap_or(0.0),
        det_m_recall: mean(total.per_category.values().filter_map(Count::ratio)),
        failure_rate: total.failed as Real / total.scenes.max(1) as Real,
        per_predicate_recall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{demo_graph, demo_profile};
    use crate::graph::{ProfileSpec, RelationTriplet, TaxonomyGroup};
    use crate::structured_io::serialize_cot;

    fn rt(s: &'static str, sb: [f64; 4], p: &'static str, o: &'static str, ob: [f64; 4]) -> ResolvedTriplet<'static> {
        ResolvedTriplet {
            subject_class: s,
            subject_box: sb.into(),
            predicate: p,
            object_class: o,
            object_box: ob.into(),
        }
    }

    #[test]
    fn correctness_rule() {
        let cfg = EvalConfig::default();
        let a = [0.0, 0.0, 10.0, 10.0];
        let b = [20.0, 20.0, 30.0, 30.0];
        let g = rt("person", a, "on", "table", b);
        assert!(triplet_correct(&g, &g.clone(), &cfg));
        assert!(!triplet_correct(&g, &rt("person", a, "near", "table", b), &cfg));
        // subject IoU 0.4
        let shifted = [0.0, 0.0, 4.0, 10.0];
        assert!((iou(&a.into(), &shifted.into()) - 0.4).abs() < 1e-12);
        assert!(!triplet_correct(&g, &rt("person", shifted, "on", "table", b), &cfg));
        // exactly 0.5 is inclusive
        let half = [0.0, 0.0, 5.0, 10.0];
        assert!(triplet_correct(&g, &rt("person", half, "on", "table", b), &cfg));
    }

    #[test]
    fn perfect_and_duplicate_predictions() {
        let p = demo_profile();
        let gt = demo_graph();
        let t = evaluate_scene(&gt, &gt, &p, &EvalConfig::default());
        assert_eq!(t.triplets, Count { hits: 1, total: 1 });
        assert_eq!(t.detection, Count { hits: 3, total: 3 });

        let mut dup = gt.clone();
        dup.relations.push(dup.relations[0].clone());
        let mut gt2 = gt.clone();
        gt2.relations.push(RelationTriplet::new(
            "person.2".parse().unwrap(),
            "near",
            "person.1".parse().unwrap(),
            "spatial",
        ));
        let t = evaluate_scene(&gt2, &dup, &p, &EvalConfig::default());
        assert_eq!(t.triplets, Count { hits: 1, total: 2 });

        let r = aggregate(&[evaluate_scene(&gt, &gt, &p, &EvalConfig::default())], &partition_predicates(&p).unwrap()).unwrap();
        assert_eq!((r.recall, r.m_recall, r.det_recall, r.det_m_recall), (1.0, 1.0, 1.0, 1.0));
        // person-wearing-shirt is in the training catalog
        assert_eq!(r.zs_recall, 0.0);
        assert_eq!(r.failure_rate, 0.0);
    }

    #[test]
    fn top_k_truncates_predictions() {
        let p = demo_profile();
        let gt = demo_graph();
        let mut pred = gt.clone();
        pred.relations.insert(
            0,
            RelationTriplet::new("person.2".parse().unwrap(), "near", "person.1".parse().unwrap(), "spatial"),
        );
        let cfg = EvalConfig {
            top_k: Some(1),
            ..Default::default()
        };
        assert_eq!(evaluate_scene(&gt, &pred, &p, &cfg).triplets.hits, 0);
        assert_eq!(evaluate_scene(&gt, &pred, &p, &EvalConfig::default()).triplets.hits, 1);
    }

    #[test]
    fn greedy_is_prediction_major() {
        // p0 fits g0 and g1, p1 fits only g0: greedy gets 1, optimum is 2.
        let fits = [[true, true], [true, false]];
        let hits = greedy_hits(&[0usize, 1], &[0usize, 1], |g, p| fits[*p][*g]);
        assert_eq!(hits, vec![true, false]);
    }

    #[test]
    fn aggregate_counts_and_exclusions() {
        let mut a = SceneTally {
            scenes: 1,
            triplets: Count { hits: 4, total: 6 },
            ..Default::default()
        };
        a.per_predicate.insert("on".into(), Count { hits: 4, total: 6 });
        let mut b = SceneTally {
            scenes: 1,
            failed: 1,
            triplets: Count { hits: 2, total: 4 },
            ..Default::default()
        };
        b.per_predicate.insert("has".into(), Count { hits: 2, total: 4 });
        let part = partition_predicates(&demo_profile()).unwrap();
        let r = aggregate(&[a, b], &part).unwrap();
        assert!((r.recall - 0.6).abs() < 1e-12);
        assert!((r.m_recall - (4.0 / 6.0 + 0.5) / 2.0).abs() < 1e-12);
        assert_eq!(r.per_predicate_recall.len(), 2);
        assert_eq!(r.failure_rate, 0.5);
        assert_eq!(aggregate(&[], &part).unwrap_err().code(), "EMPTY_BATCH");
    }

    #[test]
    fn completion_failures_count() {
        let p = demo_profile();
        let gt = demo_graph();
        let good = serialize_cot(&gt, &p).unwrap().response_text;
        let t1 = evaluate_completion(&good, &gt, &p, &EvalConfig::default());
        let t2 = evaluate_completion("garbage", &gt, &p, &EvalConfig::default());
        assert_eq!((t2.failed, t2.triplets.hits, t2.triplets.total), (1, 0, 1));
        let r = aggregate(&[t1, t2], &partition_predicates(&p).unwrap()).unwrap();
        assert_eq!(r.failure_rate, 0.5);
        assert_eq!(r.recall, 0.5);
    }

    fn vocab(n: usize, freq: impl Fn(usize) -> f64) -> DatasetProfile {
        let preds: Vec<String> = (0..n).map(|i| format!("p{i:02}")).collect();
        DatasetProfile::from_spec(ProfileSpec {
            name: "v".into(),
            categories: vec!["thing".into()],
            taxonomy: vec![TaxonomyGroup {
                rel_type: "spatial".into(),
                predicates: preds.clone(),
            }],
            predicate_freq: preds.iter().enumerate().map(|(i, p)| (p.clone(), freq(i))).collect(),
            train_triplets: vec![],
        })
        .unwrap()
    }

    #[test]
    fn partition_sizes() {
        for (n, sizes) in [(50, (15, 15, 20)), (56, (16, 16, 24)), (10, (3, 3, 4)), (4, (1, 1, 2))] {
            let s = partition_predicates(&vocab(n, |i| (n - i) as f64)).unwrap();
            assert_eq!((s.head.len(), s.body.len(), s.tail.len()), sizes);
        }
        let flat = partition_predicates(&vocab(10, |_| 1.0)).unwrap();
        assert_eq!(flat.head, vec!["p00", "p01", "p02"]);
        assert_eq!(flat.tail, vec!["p06", "p07", "p08", "p09"]);
        // frequency beats name order
        let s = partition_predicates(&vocab(10, |i| i as f64 + 1.0)).unwrap();
        assert_eq!(s.head, vec!["p09", "p08", "p07"]);
        assert_eq!(s.group_of("p00"), Some("tail"));
        assert_eq!(partition_predicates(&vocab(3, |_| 1.0)).unwrap_err().code(), "VOCAB_TOO_SMALL");
    }
}
