//! Scene graphs, dataset vocabularies and graph validation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Real;

/// Pixels a coordinate may overshoot the frame before it stops being clamped.
pub const CLAMP_TOLERANCE_PX: f64 = 2.0;

/// Axis-aligned box in absolute pixel coordinates, corner-pair convention.
///
/// Serialized as `[x1, y1, x2, y2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 4]", into = "[T; 4]")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BoundingBox<T: Scalar> {
    pub x1: T,
    pub y1: T,
    pub x2: T,
    pub y2: T,
}

impl<T: Scalar> From<[T; 4]> for BoundingBox<T> {
    fn from([x1, y1, x2, y2]: [T; 4]) -> Self {
        Self { x1, y1, x2, y2 }
    }
}

impl<T: Scalar> From<BoundingBox<T>> for [T; 4] {
    fn from(b: BoundingBox<T>) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxDefect {
    NonFinite,
    Degenerate,
    OutOfBounds,
}

impl<T: Scalar> BoundingBox<T> {
    /// Checked constructor: finite coordinates and strictly positive area.
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Result<Self, BoxDefect> {
        let b = Self { x1, y1, x2, y2 };
        b.check_shape()?;
        Ok(b)
    }

    pub fn check_shape(&self) -> Result<(), BoxDefect> {
        if !self.coords().iter().all(|c| c.is_finite()) {
            return Err(BoxDefect::NonFinite);
        }
        if !(self.x1 < self.x2 && self.y1 < self.y2) {
            return Err(BoxDefect::Degenerate);
        }
        Ok(())
    }

    pub fn coords(&self) -> [T; 4] {
        (*self).into()
    }

    pub fn width(&self) -> T {
        self.x2 - self.x1
    }

    pub fn height(&self) -> T {
        self.y2 - self.y1
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    /// Clamp into `[0,width]×[0,height]` when every coordinate overshoots by
    /// at most `tolerance`; otherwise `OutOfBounds`. Clamping that collapses
    /// the box is reported as `Degenerate`.
    pub fn fit_to_frame(&self, width: T, height: T, tolerance: T) -> Result<Self, BoxDefect> {
        self.check_shape()?;
        let within = |v: T, hi: T| v >= -tolerance && v <= hi + tolerance;
        if !(within(self.x1, width)
            && within(self.x2, width)
            && within(self.y1, height)
            && within(self.y2, height))
        {
            return Err(BoxDefect::OutOfBounds);
        }
        let cx = |v: T| v.max(T::zero()).min(width);
        let cy = |v: T| v.max(T::zero()).min(height);
        Self::new(cx(self.x1), cy(self.y1), cx(self.x2), cy(self.y2))
    }
}

/// `category.N` instance identifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceKey {
    pub category: String,
    pub index: u32,
}

impl InstanceKey {
    pub fn new(category: impl Into<String>, index: u32) -> Self {
        Self {
            category: category.into(),
            index,
        }
    }
}

impl FromStr for InstanceKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (cat, idx) = s.rsplit_once('.').ok_or_else(|| Error::KeyFormat(s.to_owned()))?;
        if cat.trim().is_empty() || idx.is_empty() || !idx.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::KeyFormat(s.to_owned()));
        }
        let index: u32 = idx.parse().map_err(|_| Error::KeyFormat(s.to_owned()))?;
        if index == 0 {
            return Err(Error::KeyFormat(s.to_owned()));
        }
        Ok(Self::new(cat, index))
    }
}

impl fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.category, self.index)
    }
}

impl Serialize for InstanceKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InstanceKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    #[serde(rename = "id")]
    pub key: InstanceKey,
    pub category: String,
    pub bbox: BoundingBox<Real>,
}

impl ObjectInstance {
    pub fn new(category: impl Into<String>, index: u32, bbox: BoundingBox<Real>) -> Self {
        let category = category.into();
        Self {
            key: InstanceKey::new(category.clone(), index),
            category,
            bbox,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriplet {
    pub subject: InstanceKey,
    pub predicate: String,
    pub object: InstanceKey,
    #[serde(rename = "type")]
    pub rel_type: String,
}

impl RelationTriplet {
    pub fn new(
        subject: InstanceKey,
        predicate: impl Into<String>,
        object: InstanceKey,
        rel_type: impl Into<String>,
    ) -> Self {
        Self {
            subject,
            predicate: predicate.into(),
            object,
            rel_type: rel_type.into(),
        }
    }

    /// Class-level `(subject class, predicate, object class)`.
    pub fn class_triple(&self) -> ClassTriple {
        ClassTriple(
            self.subject.category.clone(),
            self.predicate.clone(),
            self.object.category.clone(),
        )
    }

    /// Embedding lookup key for this triplet.
    pub fn canonical_key(&self) -> String {
        canonical_key_of(&self.subject, &self.predicate, &self.object)
    }

    pub fn same_edge(&self, other: &RelationTriplet) -> bool {
        self.subject == other.subject && self.predicate == other.predicate && self.object == other.object
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassTriple(pub String, pub String, pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<ObjectInstance>,
    pub relations: Vec<RelationTriplet>,
}

impl SceneGraph {
    pub fn new(image_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            image_id: image_id.into(),
            width,
            height,
            objects: Vec::new(),
            relations: Vec::new(),
        }
    }

    pub fn object(&self, key: &InstanceKey) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| &o.key == key)
    }

    pub fn index_of(&self) -> HashMap<&InstanceKey, usize> {
        self.objects.iter().enumerate().map(|(i, o)| (&o.key, i)).collect()
    }

    /// Distinct categories in first-appearance order.
    pub fn categories(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.objects
            .iter()
            .filter(|o| seen.insert(o.category.as_str()))
            .map(|o| o.category.as_str())
            .collect()
    }

    /// Applies the out-of-frame clamping policy to every box. Boxes beyond
    /// tolerance are left untouched for [`validate_graph`] to report.
    pub fn clamp_boxes(&mut self) {
        let (w, h) = (self.width as Real, self.height as Real);
        for o in &mut self.objects {
            if let Ok(b) = o.bbox.fit_to_frame(w, h, CLAMP_TOLERANCE_PX) {
                o.bbox = b;
            }
        }
    }
}

/// Lowercased, whitespace-collapsed vocabulary token used for embedding keys.
pub fn canonical_token(token: &str) -> String {
    token.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn canonical_key_of(subject: &InstanceKey, predicate: &str, object: &InstanceKey) -> String {
    format!(
        "{} {} {}",
        canonical_token(&subject.category),
        canonical_token(predicate),
        canonical_token(&object.category)
    )
}

/// `("person.2","wearing","shirt.1")` → `"person wearing shirt"`.
pub fn canonical_key(subject: &str, predicate: &str, object: &str) -> Result<String> {
    let s: InstanceKey = subject.parse()?;
    let o: InstanceKey = object.parse()?;
    Ok(canonical_key_of(&s, predicate, &o))
}

/// Raw profile document as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub name: String,
    pub categories: Vec<String>,
    /// Ordered relation types; the order fixes the RELATION stage layout.
    pub taxonomy: Vec<TaxonomyGroup>,
    /// Training frequency (or raw count) per predicate; normalized on load.
    #[serde(default)]
    pub predicate_freq: BTreeMap<String, f64>,
    #[serde(default)]
    pub train_triplets: Vec<[String; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyGroup {
    #[serde(rename = "type")]
    pub rel_type: String,
    pub predicates: Vec<String>,
}

/// Closed-set vocabularies plus the training statistics the rewards and
/// evaluation need. Immutable once built.
#[derive(Clone, Debug)]
pub struct DatasetProfile {
    pub name: String,
    pub categories: BTreeSet<String>,
    pub predicates: BTreeSet<String>,
    relation_types: Vec<String>,
    taxonomy: BTreeMap<String, String>,
    predicate_freq: BTreeMap<String, f64>,
    f_min: f64,
    f_max: f64,
    train_catalog: HashSet<ClassTriple>,
    spec: ProfileSpec,
}

impl DatasetProfile {
    pub fn from_spec(spec: ProfileSpec) -> Result<Self> {
        let bad = |m: String| Error::InvalidProfile(m);
        let categories: BTreeSet<String> = spec.categories.iter().cloned().collect();
        if categories.len() != spec.categories.len() {
            return Err(bad("duplicate category".into()));
        }
        if spec.taxonomy.is_empty() {
            return Err(bad("taxonomy has no relation types".into()));
        }
        let mut relation_types = Vec::new();
        let mut taxonomy = BTreeMap::new();
        for group in &spec.taxonomy {
            if relation_types.contains(&group.rel_type) {
                return Err(bad(format!("relation type `{}` listed twice", group.rel_type)));
            }
            relation_types.push(group.rel_type.clone());
            for p in &group.predicates {
                if taxonomy.insert(p.clone(), group.rel_type.clone()).is_some() {
                    return Err(bad(format!("predicate `{p}` appears in more than one type")));
                }
            }
        }
        let predicates: BTreeSet<String> = taxonomy.keys().cloned().collect();
        if predicates.is_empty() {
            return Err(bad("no predicates".into()));
        }

        let mut total = 0.0;
        for (p, &f) in &spec.predicate_freq {
            if !predicates.contains(p) {
                return Err(bad(format!("frequency given for unknown predicate `{p}`")));
            }
            if !(f.is_finite() && f >= 0.0) {
                return Err(bad(format!("frequency of `{p}` must be finite and non-negative")));
            }
            total += f;
        }
        let mut observed: BTreeMap<String, f64> = spec
            .predicate_freq
            .iter()
            .filter(|(_, &f)| f > 0.0)
            .map(|(p, &f)| (p.clone(), f / total))
            .collect();
        // No training statistics at all: every predicate is equally frequent.
        if observed.is_empty() {
            let u = 1.0 / predicates.len() as f64;
            observed = predicates.iter().map(|p| (p.clone(), u)).collect();
        }
        let f_min = observed.values().copied().fold(f64::INFINITY, f64::min);
        let f_max = observed.values().copied().fold(0.0, f64::max);
        let predicate_freq = predicates
            .iter()
            .map(|p| (p.clone(), observed.get(p).copied().unwrap_or(f_min)))
            .collect();

        let train_catalog = spec
            .train_triplets
            .iter()
            .map(|[s, p, o]| ClassTriple(s.clone(), p.clone(), o.clone()))
            .collect();

        Ok(Self {
            name: spec.name.clone(),
            categories,
            predicates,
            relation_types,
            taxonomy,
            predicate_freq,
            f_min,
            f_max,
            train_catalog,
            spec,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    /// Relation types in their fixed layout order.
    pub fn relation_types(&self) -> &[String] {
        &self.relation_types
    }

    pub fn rel_type_of(&self, predicate: &str) -> Option<&str> {
        self.taxonomy.get(predicate).map(String::as_str)
    }

    /// Smoothed relative training frequency; unseen predicates get `f_min`.
    pub fn frequency(&self, predicate: &str) -> Option<f64> {
        self.predicate_freq.get(predicate).copied()
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn is_seen_in_training(&self, triple: &ClassTriple) -> bool {
        self.train_catalog.contains(triple)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    BadDimensions,
    UnknownCategory,
    IdCategoryMismatch,
    DuplicateInstance,
    NonContiguousIndex,
    NonFiniteBox,
    DegenerateBox,
    BoxOutOfBounds,
    UnknownPredicate,
    TypeMismatch,
    DanglingInstance,
    SelfRelation,
    DuplicateTriplet,
}

/// Where a violation was found. Orders graph-level first, then objects, then
/// relations, each by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Location {
    Graph,
    Object(usize),
    Relation(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub location: Location,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }
}

pub fn validate_graph(graph: &SceneGraph, profile: &DatasetProfile) -> ValidationReport {
    let mut out = Vec::new();
    let mut push = |code, location, detail: String| out.push(Violation { code, location, detail });

    if graph.width == 0 || graph.height == 0 {
        push(
            ViolationCode::BadDimensions,
            Location::Graph,
            format!("{}x{}", graph.width, graph.height),
        );
    }

    let (w, h) = (graph.width as Real, graph.height as Real);
    let mut keys = HashSet::new();
    let mut indices: BTreeMap<&str, Vec<(u32, usize)>> = BTreeMap::new();
    for (i, o) in graph.objects.iter().enumerate() {
        let at = Location::Object(i);
        if !profile.categories.contains(&o.category) {
            push(ViolationCode::UnknownCategory, at, o.category.clone());
        }
        if o.key.category != o.category {
            push(
                ViolationCode::IdCategoryMismatch,
                at,
                format!("{} vs {}", o.key, o.category),
            );
        }
        if !keys.insert(&o.key) {
            push(ViolationCode::DuplicateInstance, at, o.key.to_string());
        }
        indices.entry(o.key.category.as_str()).or_default().push((o.key.index, i));
        match o.bbox.fit_to_frame(w, h, CLAMP_TOLERANCE_PX) {
            Ok(_) => {}
            Err(BoxDefect::NonFinite) => push(ViolationCode::NonFiniteBox, at, o.key.to_string()),
            Err(BoxDefect::Degenerate) => push(ViolationCode::DegenerateBox, at, o.key.to_string()),
            Err(BoxDefect::OutOfBounds) => push(ViolationCode::BoxOutOfBounds, at, o.key.to_string()),
        }
    }
    for (cat, mut idx) in indices {
        idx.sort_unstable();
        let mut dedup: Vec<u32> = idx.iter().map(|(n, _)| *n).collect();
        dedup.dedup();
        let contiguous = dedup.iter().enumerate().all(|(k, &n)| n as usize == k + 1);
        if !contiguous {
            let first = idx.iter().map(|(_, i)| *i).min().unwrap_or(0);
            push(
                ViolationCode::NonContiguousIndex,
                Location::Object(first),
                format!("{cat}: {dedup:?}"),
            );
        }
    }

    let mut edges = HashSet::new();
    for (i, r) in graph.relations.iter().enumerate() {
        let at = Location::Relation(i);
        match profile.rel_type_of(&r.predicate) {
            None => push(ViolationCode::UnknownPredicate, at, r.predicate.clone()),
            Some(t) if t != r.rel_type => push(
                ViolationCode::TypeMismatch,
                at,
                format!("{} is {t}, not {}", r.predicate, r.rel_type),
            ),
            Some(_) => {}
        }
        for end in [&r.subject, &r.object] {
            if !keys.contains(end) {
                push(ViolationCode::DanglingInstance, at, end.to_string());
            }
        }
        if r.subject == r.object {
            push(ViolationCode::SelfRelation, at, r.subject.to_string());
        }
        if !edges.insert((&r.subject, &r.predicate, &r.object)) {
            push(
                ViolationCode::DuplicateTriplet,
                at,
                format!("{} {} {}", r.subject, r.predicate, r.object),
            );
        }
    }

    out.sort_by(|a, b| (a.location, a.code).cmp(&(b.location, b.code)));
    ValidationReport { violations: out }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn demo_profile() -> DatasetProfile {
        let spec = ProfileSpec {
            name: "demo".into(),
            categories: ["person", "dog", "shirt", "table", "house", "tree", "cat"]
                .map(String::from)
                .to_vec(),
            taxonomy: vec![
                TaxonomyGroup {
                    rel_type: "spatial".into(),
                    predicates: vec!["on".into(), "near".into()],
                },
                TaxonomyGroup {
                    rel_type: "possessive".into(),
                    predicates: vec!["has".into()],
                },
                TaxonomyGroup {
                    rel_type: "interactive".into(),
                    predicates: vec!["wearing".into(), "holding".into()],
                },
            ],
            predicate_freq: [("on", 50.0), ("near", 20.0), ("has", 20.0), ("wearing", 10.0)]
                .into_iter()
                .map(|(p, f)| (p.to_string(), f))
                .collect(),
            train_triplets: vec![["person".into(), "wearing".into(), "shirt".into()]],
        };
        DatasetProfile::from_spec(spec).unwrap()
    }

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox<f64> {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    pub fn demo_graph() -> SceneGraph {
        let mut g = SceneGraph::new("img", 100, 100);
        g.objects = vec![
            ObjectInstance::new("person", 1, bb(10.0, 10.0, 40.0, 90.0)),
            ObjectInstance::new("person", 2, bb(50.0, 10.0, 80.0, 90.0)),
            ObjectInstance::new("shirt", 1, bb(12.0, 30.0, 38.0, 50.0)),
        ];
        g.relations = vec![RelationTriplet::new(
            "person.1".parse().unwrap(),
            "wearing",
            "shirt.1".parse().unwrap(),
            "interactive",
        )];
        g
    }

    #[test]
    fn valid_graph_has_empty_report() {
        assert!(validate_graph(&demo_graph(), &demo_profile()).is_valid());
    }

    #[test]
    fn dangling_instance_reported() {
        let mut g = demo_graph();
        g.relations.push(RelationTriplet::new(
            "person.3".parse().unwrap(),
            "near",
            "person.1".parse().unwrap(),
            "spatial",
        ));
        let r = validate_graph(&g, &demo_profile());
        assert_eq!(r.codes(), vec![ViolationCode::DanglingInstance]);
        assert_eq!(r.violations[0].location, Location::Relation(1));
    }

    #[test]
    fn unknown_predicate_reported() {
        let mut g = demo_graph();
        g.relations[0].predicate = "flying over".into();
        let r = validate_graph(&g, &demo_profile());
        assert_eq!(r.codes(), vec![ViolationCode::UnknownPredicate]);
    }

    #[test]
    fn report_ordering_is_by_location_then_code() {
        let mut g = demo_graph();
        g.objects[2].bbox.x2 = 500.0;
        g.objects[0].category = "unicorn".into();
        g.relations[0].subject = "shirt.1".parse().unwrap();
        let r = validate_graph(&g, &demo_profile());
        let locs: Vec<_> = r.violations.iter().map(|v| (v.location, v.code)).collect();
        let mut sorted = locs.clone();
        sorted.sort();
        assert_eq!(locs, sorted);
        assert!(r.codes().contains(&ViolationCode::SelfRelation));
        assert!(r.codes().contains(&ViolationCode::BoxOutOfBounds));
        assert_eq!(r, validate_graph(&g, &demo_profile()));
    }

    #[test]
    fn small_overshoot_is_clamped_not_reported() {
        let mut g = demo_graph();
        g.objects[1].bbox.x2 = 101.5;
        g.objects[1].bbox.y1 = -1.0;
        assert!(validate_graph(&g, &demo_profile()).is_valid());
        g.clamp_boxes();
        assert_eq!(g.objects[1].bbox.coords(), [50.0, 0.0, 100.0, 90.0]);
        g.objects[1].bbox.x2 = 102.5;
        assert_eq!(
            validate_graph(&g, &demo_profile()).codes(),
            vec![ViolationCode::BoxOutOfBounds]
        );
    }

    #[test]
    fn non_contiguous_and_duplicate_instances() {
        let mut g = demo_graph();
        g.objects[1].key.index = 3;
        assert_eq!(
            validate_graph(&g, &demo_profile()).codes(),
            vec![ViolationCode::NonContiguousIndex]
        );
        g.objects[1].key.index = 1;
        let codes = validate_graph(&g, &demo_profile()).codes();
        assert!(codes.contains(&ViolationCode::DuplicateInstance));
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert_eq!(BoundingBox::new(1.0, 1.0, 1.0, 5.0), Err(BoxDefect::Degenerate));
        assert_eq!(BoundingBox::new(f64::NAN, 1.0, 2.0, 5.0), Err(BoxDefect::NonFinite));
        let b = bb(0.0, 0.0, 1.0, 1.0);
        assert_eq!(b.area(), 1.0);
    }

    #[test]
    fn canonical_key_examples() {
        assert_eq!(
            canonical_key("person.2", "wearing", "shirt.1").unwrap(),
            "person wearing shirt"
        );
        assert_eq!(canonical_key("Person.1", "ON", "table.1").unwrap(), "person on table");
        let err = canonical_key("tree", "near", "house.1").unwrap_err();
        assert_eq!(err.code(), "KEY_FORMAT");
        assert!(canonical_key("tree.0", "near", "house.1").is_err());
        assert!(canonical_key("tree.x", "near", "house.1").is_err());
    }

    #[test]
    fn profile_smoothing_assigns_f_min_to_unseen() {
        let p = demo_profile();
        assert_eq!(p.frequency("holding"), Some(p.f_min()));
        assert!((p.f_max() - 0.5).abs() < 1e-12);
        assert!((p.f_min() - 0.1).abs() < 1e-12);
        assert_eq!(p.relation_types(), ["spatial", "possessive", "interactive"]);
    }

    #[test]
    fn profile_rejects_overlapping_taxonomy() {
        let mut spec = demo_profile().spec().clone();
        spec.taxonomy[1].predicates.push("on".into());
        assert_eq!(DatasetProfile::from_spec(spec).unwrap_err().code(), "INVALID_PROFILE");
    }

    #[test]
    fn graph_json_roundtrip() {
        let g = demo_graph();
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains(r#""id":"person.1","category":"person","bbox":[10.0,10.0,40.0,90.0]"#));
        assert!(text.contains(r#""type":"interactive""#));
        let back: SceneGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn canonical_key_idempotent(s in "[A-Za-z]{1,8}( [a-z]{1,5})?", p in "[A-Za-z]{1,6}( [a-z]{1,4})?", o in "[A-Za-z]{1,8}") {
                let k = canonical_key(&format!("{s}.3"), &p, &format!("{o}.1")).unwrap();
                let again = canonical_key(
                    &format!("{}.1", canonical_token(&s)),
                    &canonical_token(&p),
                    &format!("{}.1", canonical_token(&o)),
                ).unwrap();
                prop_assert_eq!(k, again);
            }

            #[test]
            fn scene_graph_serde_roundtrip(
                boxes in proptest::collection::vec((0.0f64..50.0, 0.0f64..50.0, 1.0f64..50.0, 1.0f64..50.0), 1..6)
            ) {
                let mut g = SceneGraph::new("x", 100, 100);
                for (i, (x, y, w, h)) in boxes.into_iter().enumerate() {
                    g.objects.push(ObjectInstance::new("dog", i as u32 + 1, bb(x, y, x + w, y + h)));
                }
                if g.objects.len() > 1 {
                    g.relations.push(RelationTriplet::new(
                        g.objects[0].key.clone(), "near", g.objects[1].key.clone(), "spatial"));
                }
                let back: SceneGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
                prop_assert_eq!(back, g);
            }
        }
    }
}
