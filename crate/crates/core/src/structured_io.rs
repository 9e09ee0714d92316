//! Three-stage tagged completions: parsing, format reward, CoT serialization
//! and failure accounting.
//!
//! A completion carries three tagged JSON payloads:
//!
//! ```text
//! <CATEGORY>["person","dog"]</CATEGORY>
//! <OBJECT>[{"id":"person.1","bbox":[x1,y1,x2,y2]}, ...]</OBJECT>
//! <RELATION>{"spatial":[["person.1","near","dog.1"]], "possessive":[], ...}</RELATION>
//! ```
//!
//! Each stage is judged on its own (tag pair present exactly once, payload
//! matches the schema, tokens in the closed vocabularies, intra-stage
//! invariants). Cross-stage references only decide whether a graph is
//! assembled. Text outside the tags is ignored.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    validate_graph, BoundingBox, DatasetProfile, InstanceKey, ObjectInstance, RelationTriplet,
    SceneGraph, CLAMP_TOLERANCE_PX,
};
use crate::Real;

pub const CATEGORY_TAG: &str = "CATEGORY";
pub const OBJECT_TAG: &str = "OBJECT";
pub const RELATION_TAG: &str = "RELATION";

/// Image the completion describes; boxes are clamped against its frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageFrame {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
}

impl ImageFrame {
    pub fn new(image_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            image_id: image_id.into(),
            width,
            height,
        }
    }

    pub fn of(graph: &SceneGraph) -> Self {
        Self::new(graph.image_id.clone(), graph.width, graph.height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Category,
    Object,
    Relation,
}

/// Why a stage was rejected, or why stages disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageIssue {
    pub stage: Stage,
    pub code: IssueCode,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    MissingTag,
    DuplicateTag,
    MisorderedTag,
    InvalidJson,
    UnknownCategory,
    UnknownPredicate,
    WrongRelationType,
    RelationTypeKeys,
    KeyFormat,
    DuplicateEntry,
    BadBox,
    NonContiguousIndex,
    SelfRelation,
    /// Cross-stage: object category absent from the category stage.
    UnlistedCategory,
    /// Cross-stage: relation endpoint absent from the object stage.
    DanglingInstance,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedCompletion {
    pub category_stage: Option<Vec<String>>,
    pub object_stage: Option<Vec<ObjectInstance>>,
    /// Relation groups in the profile's type order.
    pub relation_stage: Option<Vec<(String, Vec<RelationTriplet>)>>,
    pub stage_valid: [bool; 3],
    pub graph: Option<SceneGraph>,
    pub issues: Vec<StageIssue>,
}

impl ParsedCompletion {
    pub fn valid_stages(&self) -> usize {
        self.stage_valid.iter().filter(|v| **v).count()
    }
}

type StageResult<T> = std::result::Result<T, (IssueCode, String)>;

fn tagged<'a>(text: &'a str, name: &str) -> StageResult<&'a str> {
    let open = format!("<{name}>");
    let close = format!("</{name}>");
    let opens: Vec<usize> = text.match_indices(&open).map(|(i, _)| i).take(2).collect();
    let closes: Vec<usize> = text.match_indices(&close).map(|(i, _)| i).take(2).collect();
    match (opens.len(), closes.len()) {
        (0, _) | (_, 0) => Err((IssueCode::MissingTag, format!("{open}…{close} not found"))),
        (1, 1) => {
            let start = opens[0] + open.len();
            if closes[0] < start {
                Err((IssueCode::MisorderedTag, format!("{close} precedes {open}")))
            } else {
                Ok(&text[start..closes[0]])
            }
        }
        _ => Err((IssueCode::DuplicateTag, format!("{name} tag repeated"))),
    }
}

fn json<'a, T: Deserialize<'a>>(payload: &'a str) -> StageResult<T> {
    serde_json::from_str(payload).map_err(|e| (IssueCode::InvalidJson, e.to_string()))
}

fn parse_categories(payload: &str, profile: &DatasetProfile) -> StageResult<Vec<String>> {
    let cats: Vec<String> = json(payload)?;
    let mut seen = HashSet::new();
    for c in &cats {
        if !profile.categories.contains(c) {
            return Err((IssueCode::UnknownCategory, c.clone()));
        }
        if !seen.insert(c) {
            return Err((IssueCode::DuplicateEntry, c.clone()));
        }
    }
    Ok(cats)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectRecord {
    id: String,
    bbox: [Real; 4],
}

fn parse_objects(
    payload: &str,
    profile: &DatasetProfile,
    frame: &ImageFrame,
) -> StageResult<Vec<ObjectInstance>> {
    let records: Vec<ObjectRecord> = json(payload)?;
    let mut out = Vec::with_capacity(records.len());
    let mut seen = HashSet::new();
    let mut per_cat: HashMap<String, Vec<u32>> = HashMap::new();
    for rec in records {
        let key: InstanceKey = rec.id.parse().map_err(|_| (IssueCode::KeyFormat, rec.id.clone()))?;
        if !profile.categories.contains(&key.category) {
            return Err((IssueCode::UnknownCategory, key.category));
        }
        if !seen.insert(key.clone()) {
            return Err((IssueCode::DuplicateEntry, rec.id));
        }
        let bbox = BoundingBox::from(rec.bbox)
            .fit_to_frame(frame.width as Real, frame.height as Real, CLAMP_TOLERANCE_PX)
            .map_err(|d| (IssueCode::BadBox, format!("{}: {d:?}", rec.id)))?;
        per_cat.entry(key.category.clone()).or_default().push(key.index);
        out.push(ObjectInstance {
            category: key.category.clone(),
            key,
            bbox,
        });
    }
    for (cat, mut idx) in per_cat {
        idx.sort_unstable();
        if idx.iter().enumerate().any(|(k, &n)| n as usize != k + 1) {
            return Err((IssueCode::NonContiguousIndex, cat));
        }
    }
    Ok(out)
}

fn parse_relations(
    payload: &str,
    profile: &DatasetProfile,
) -> StageResult<Vec<(String, Vec<RelationTriplet>)>> {
    let mut groups: BTreeMap<String, Vec<[String; 3]>> = json(payload)?;
    let want: HashSet<&str> = profile.relation_types().iter().map(String::as_str).collect();
    let got: HashSet<&str> = groups.keys().map(String::as_str).collect();
    if want != got {
        let mut keys: Vec<_> = got.into_iter().collect();
        keys.sort_unstable();
        return Err((IssueCode::RelationTypeKeys, keys.join(",")));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(want.len());
    for rel_type in profile.relation_types() {
        let entries = groups.remove(rel_type).unwrap_or_default();
        let mut triplets = Vec::with_capacity(entries.len());
        for [s, p, o] in entries {
            let key = |k: &str| -> StageResult<InstanceKey> {
                let key: InstanceKey = k.parse().map_err(|_| (IssueCode::KeyFormat, k.to_owned()))?;
                if !profile.categories.contains(&key.category) {
                    return Err((IssueCode::UnknownCategory, key.category));
                }
                Ok(key)
            };
            let (subject, object) = (key(&s)?, key(&o)?);
            match profile.rel_type_of(&p) {
                None => return Err((IssueCode::UnknownPredicate, p)),
                Some(t) if t != rel_type => {
                    return Err((IssueCode::WrongRelationType, format!("{p} listed under {rel_type}")))
                }
                Some(_) => {}
            }
            if subject == object {
                return Err((IssueCode::SelfRelation, s));
            }
            let t = RelationTriplet::new(subject, p, object, rel_type.clone());
            if !seen.insert((t.subject.clone(), t.predicate.clone(), t.object.clone())) {
                return Err((IssueCode::DuplicateEntry, format!("{s} {} {o}", t.predicate)));
            }
            triplets.push(t);
        }
        out.push((rel_type.clone(), triplets));
    }
    Ok(out)
}

/// Never fails: malformedness is reported through `stage_valid` and `issues`.
pub fn parse_completion(text: &str, profile: &DatasetProfile, frame: &ImageFrame) -> ParsedCompletion {
    let mut parsed = ParsedCompletion::default();
    let mut note = |stage, (code, detail): (IssueCode, String)| {
        parsed.issues.push(StageIssue { stage, code, detail });
    };

    let categories = tagged(text, CATEGORY_TAG).and_then(|p| parse_categories(p, profile));
    let objects = tagged(text, OBJECT_TAG).and_then(|p| parse_objects(p, profile, frame));
    let relations = tagged(text, RELATION_TAG).and_then(|p| parse_relations(p, profile));

    let categories = categories.map_err(|e| note(Stage::Category, e)).ok();
    let objects = objects.map_err(|e| note(Stage::Object, e)).ok();
    let relations = relations.map_err(|e| note(Stage::Relation, e)).ok();

    let mut consistent = true;
    if let (Some(cats), Some(objs), Some(rels)) = (&categories, &objects, &relations) {
        let listed: HashSet<&String> = cats.iter().collect();
        if let Some(o) = objs.iter().find(|o| !listed.contains(&o.category)) {
            note(Stage::Object, (IssueCode::UnlistedCategory, o.key.to_string()));
            consistent = false;
        }
        let keys: HashSet<&InstanceKey> = objs.iter().map(|o| &o.key).collect();
        let dangling = rels
            .iter()
            .flat_map(|(_, ts)| ts)
            .flat_map(|t| [&t.subject, &t.object])
            .find(|k| !keys.contains(k));
        if let Some(k) = dangling {
            note(Stage::Relation, (IssueCode::DanglingInstance, k.to_string()));
            consistent = false;
        }
    }

    parsed.stage_valid = [categories.is_some(), objects.is_some(), relations.is_some()];
    if let (true, Some(objs), Some(rels)) = (consistent, &objects, &relations) {
        if categories.is_some() {
            parsed.graph = Some(SceneGraph {
                image_id: frame.image_id.clone(),
                width: frame.width,
                height: frame.height,
                objects: objs.clone(),
                relations: rels.iter().flat_map(|(_, ts)| ts.iter().cloned()).collect(),
            });
        }
    }
    parsed.category_stage = categories;
    parsed.object_stage = objects;
    parsed.relation_stage = relations;
    parsed
}

/// Per-stage partial credit: valid stages / 3.
pub fn format_reward(parsed: &ParsedCompletion) -> Real {
    parsed.valid_stages() as Real / 3.0
}

pub fn failure_rate(results: &[ParsedCompletion]) -> Result<Real> {
    if results.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let failed = results.iter().filter(|p| p.graph.is_none()).count();
    Ok(failed as Real / results.len() as Real)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotRecord {
    pub prompt_ref: String,
    pub response_text: String,
}

/// Reorders and renumbers a valid graph into CoT layout: categories by first
/// appearance, instances grouped by category with suffixes in annotation
/// order, relations grouped by type in taxonomy order and sorted by subject
/// position, then object position, then predicate.
pub fn canonicalize(graph: &SceneGraph, profile: &DatasetProfile) -> Result<SceneGraph> {
    let report = validate_graph(graph, profile);
    if !report.is_valid() {
        return Err(Error::SerializeInvalidGraph(report.violations));
    }
    let mut objects = Vec::with_capacity(graph.objects.len());
    let mut renamed: HashMap<&InstanceKey, (InstanceKey, usize)> = HashMap::new();
    for cat in graph.categories() {
        let mut next = 0;
        for o in graph.objects.iter().filter(|o| o.category == cat) {
            next += 1;
            let key = InstanceKey::new(cat, next);
            renamed.insert(&o.key, (key.clone(), objects.len()));
            objects.push(ObjectInstance {
                key,
                category: o.category.clone(),
                bbox: o.bbox,
            });
        }
    }

    let type_rank: HashMap<&str, usize> = profile
        .relation_types()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut relations: Vec<(usize, usize, usize, RelationTriplet)> = graph
        .relations
        .iter()
        .map(|r| {
            let (s, sp) = renamed[&r.subject].clone();
            let (o, op) = renamed[&r.object].clone();
            let t = RelationTriplet::new(s, r.predicate.clone(), o, r.rel_type.clone());
            (type_rank[r.rel_type.as_str()], sp, op, t)
        })
        .collect();
    relations.sort_by(|a, b| (a.0, a.1, a.2, &a.3.predicate).cmp(&(b.0, b.1, b.2, &b.3.predicate)));

    Ok(SceneGraph {
        image_id: graph.image_id.clone(),
        width: graph.width,
        height: graph.height,
        objects,
        relations: relations.into_iter().map(|r| r.3).collect(),
    })
}

/// Renders the three tagged stages of `graph`.
pub fn serialize_cot(graph: &SceneGraph, profile: &DatasetProfile) -> Result<CotRecord> {
    let g = canonicalize(graph, profile)?;

    let categories: Vec<&str> = g.categories();
    let objects: Vec<ObjectOut> = g
        .objects
        .iter()
        .map(|o| ObjectOut {
            id: &o.key,
            bbox: &o.bbox,
        })
        .collect();

    let mut rel = String::from("{");
    for (i, t) in profile.relation_types().iter().enumerate() {
        if i > 0 {
            rel.push(',');
        }
        let triples: Vec<[String; 3]> = g
            .relations
            .iter()
            .filter(|r| &r.rel_type == t)
            .map(|r| [r.subject.to_string(), r.predicate.clone(), r.object.to_string()])
            .collect();
        rel.push_str(&to_json(t.as_str()));
        rel.push(':');
        rel.push_str(&to_json(&triples));
    }
    rel.push('}');

    let response_text = format!(
        "<{c}>{}</{c}>\n<{o}>{}</{o}>\n<{r}>{}</{r}>",
        to_json(&categories),
        to_json(&objects),
        rel,
        c = CATEGORY_TAG,
        o = OBJECT_TAG,
        r = RELATION_TAG,
    );
    Ok(CotRecord {
        prompt_ref: g.image_id,
        response_text,
    })
}

#[derive(Serialize)]
struct ObjectOut<'a> {
    id: &'a InstanceKey,
    bbox: &'a BoundingBox<Real>,
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{demo_graph, demo_profile};

    fn frame() -> ImageFrame {
        ImageFrame::new("img", 100, 100)
    }

    const GOOD: &str = r#"Let me look at the image.
<CATEGORY>["person","shirt"]</CATEGORY>
Now the instances.
<OBJECT>[{"id":"person.1","bbox":[10,10,40,90]},{"id":"person.2","bbox":[50,10,80,90]},{"id":"shirt.1","bbox":[12,30,38,50]}]</OBJECT>
<RELATION>{"spatial":[],"possessive":[],"interactive":[["person.1","wearing","shirt.1"]]}</RELATION>"#;

    #[test]
    fn well_formed_completion() {
        let p = parse_completion(GOOD, &demo_profile(), &frame());
        assert_eq!(p.stage_valid, [true, true, true], "{:?}", p.issues);
        assert_eq!(p.graph.as_ref().unwrap(), &demo_graph());
        assert_eq!(format_reward(&p), 1.0);
    }

    #[test]
    fn missing_close_tag() {
        let text = GOOD.replace("</RELATION>", "");
        let p = parse_completion(&text, &demo_profile(), &frame());
        assert_eq!(p.stage_valid, [true, true, false]);
        assert!(p.graph.is_none());
        assert_eq!(format_reward(&p), 2.0 / 3.0);
    }

    #[test]
    fn invalid_object_json_keeps_relation_syntax() {
        let text = GOOD.replace(r#"[12,30,38,50]}]"#, r#"[12,30,38,50]},]"#);
        let p = parse_completion(&text, &demo_profile(), &frame());
        assert_eq!(p.stage_valid, [true, false, true]);
        assert!(p.graph.is_none());
        assert_eq!(p.issues[0].code, IssueCode::InvalidJson);
    }

    #[test]
    fn only_first_stage() {
        let p = parse_completion(r#"<CATEGORY>["dog"]</CATEGORY>"#, &demo_profile(), &frame());
        assert_eq!(p.stage_valid, [true, false, false]);
        assert!((format_reward(&p) - 1.0 / 3.0).abs() < 1e-15);
        let p = parse_completion("garbage", &demo_profile(), &frame());
        assert_eq!(format_reward(&p), 0.0);
    }

    #[test]
    fn duplicate_tags_invalidate_stage() {
        let text = format!("{GOOD}\n<CATEGORY>[\"dog\"]</CATEGORY>");
        let p = parse_completion(&text, &demo_profile(), &frame());
        assert_eq!(p.stage_valid, [false, true, true]);
        assert_eq!(p.issues[0].code, IssueCode::DuplicateTag);
    }

    #[test]
    fn cross_stage_inconsistency_blocks_graph() {
        let text = GOOD.replace(r#"["person","shirt"]"#, r#"["person"]"#);
        let p = parse_completion(&text, &demo_profile(), &frame());
        assert_eq!(p.stage_valid, [true, true, true]);
        assert!(p.graph.is_none());
        assert_eq!(p.issues[0].code, IssueCode::UnlistedCategory);

        let text = GOOD.replace(r#"["person.1","wearing","shirt.1"]"#, r#"["person.3","wearing","shirt.1"]"#);
        let p = parse_completion(&text, &demo_profile(), &frame());
        assert_eq!(p.stage_valid, [true, true, true]);
        assert_eq!(p.issues[0].code, IssueCode::DanglingInstance);
        assert!(p.graph.is_none());
    }

    #[test]
    fn vocabulary_and_schema_violations() {
        let cases = [
            (r#"["person","shirt"]"#, r#"["person","unicorn"]"#, 0, IssueCode::UnknownCategory),
            (r#""wearing""#, r#""flying over""#, 2, IssueCode::UnknownPredicate),
            (r#""spatial":[]"#, r#""spatial":[["person.1","wearing","shirt.1"]]"#, 2, IssueCode::WrongRelationType),
            (r#","interactive""#, r#","dynamic""#, 2, IssueCode::RelationTypeKeys),
            (r#""bbox":[10,10,40,90]"#, r#""bbox":[10,10,10,90]"#, 1, IssueCode::BadBox),
            (r#""bbox":[10,10,40,90]"#, r#""bbox":[10,10,40,95],"score":1"#, 1, IssueCode::InvalidJson),
            (r#""bbox":[10,10,40,90]"#, r#""bbox":[10,10,40]"#, 1, IssueCode::InvalidJson),
            (r#""bbox":[50,10,80,90]"#, r#""bbox":[50,10,180,90]"#, 1, IssueCode::BadBox),
            (r#""id":"person.2""#, r#""id":"person.3""#, 1, IssueCode::NonContiguousIndex),
            (r#""id":"person.2""#, r#""id":"person.1""#, 1, IssueCode::DuplicateEntry),
            (r#""id":"person.2""#, r#""id":"person""#, 1, IssueCode::KeyFormat),
            (r#"["person.1","wearing","shirt.1"]"#, r#"["person.1","wearing","person.1"]"#, 2, IssueCode::SelfRelation),
        ];
        for (from, to, stage, code) in cases {
            let text = GOOD.replacen(from, to, 1);
            assert_ne!(text, GOOD, "{from}");
            let p = parse_completion(&text, &demo_profile(), &frame());
            let mut expect = [true; 3];
            expect[stage] = false;
            assert_eq!(p.stage_valid, expect, "{to}");
            assert_eq!(p.issues[0].code, code, "{to}");
        }
    }

    #[test]
    fn slight_overshoot_is_clamped() {
        let text = GOOD.replace("[50,10,80,90]", "[50,10,101.5,90]");
        let p = parse_completion(&text, &demo_profile(), &frame());
        assert!(p.graph.is_some());
        assert_eq!(p.graph.unwrap().objects[1].bbox.x2, 100.0);
    }

    #[test]
    fn failure_rate_counts_missing_graphs() {
        let ok = parse_completion(GOOD, &demo_profile(), &frame());
        let bad = parse_completion("", &demo_profile(), &frame());
        assert_eq!(failure_rate(&vec![ok.clone(); 10]).unwrap(), 0.0);
        let mut batch = vec![ok; 6];
        batch.extend(vec![bad; 4]);
        assert_eq!(failure_rate(&batch).unwrap(), 0.4);
        assert_eq!(failure_rate(&[]).unwrap_err().code(), "EMPTY_BATCH");
    }

    #[test]
    fn cot_ordering_rules() {
        let p = demo_profile();
        let mut g = SceneGraph::new("img", 100, 100);
        let bb = |x: f64| BoundingBox::new(x, 0.0, x + 5.0, 5.0).unwrap();
        g.objects = vec![
            ObjectInstance::new("dog", 7, bb(0.0)),
            ObjectInstance::new("person", 1, bb(10.0)),
            ObjectInstance::new("dog", 1, bb(20.0)),
        ];
        // ids out of canonical numbering on purpose
        g.objects[0].key.index = 2;
        g.relations = vec![
            RelationTriplet::new("person.1".parse().unwrap(), "near", "dog.1".parse().unwrap(), "spatial"),
            RelationTriplet::new("dog.1".parse().unwrap(), "near", "person.1".parse().unwrap(), "spatial"),
            RelationTriplet::new("dog.2".parse().unwrap(), "on", "person.1".parse().unwrap(), "spatial"),
            RelationTriplet::new("dog.2".parse().unwrap(), "has", "dog.1".parse().unwrap(), "possessive"),
        ];
        let rec = serialize_cot(&g, &p).unwrap();
        let expected = concat!(
            r#"<CATEGORY>["dog","person"]</CATEGORY>"#,
            "\n",
            r#"<OBJECT>[{"id":"dog.1","bbox":[0.0,0.0,5.0,5.0]},{"id":"dog.2","bbox":[20.0,0.0,25.0,5.0]},{"id":"person.1","bbox":[10.0,0.0,15.0,5.0]}]</OBJECT>"#,
            "\n",
            r#"<RELATION>{"spatial":[["dog.1","on","person.1"],["dog.2","near","person.1"],["person.1","near","dog.2"]],"possessive":[["dog.1","has","dog.2"]],"interactive":[]}</RELATION>"#,
        );
        assert_eq!(rec.response_text, expected);
        let back = parse_completion(&rec.response_text, &p, &ImageFrame::of(&g));
        assert_eq!(back.graph.unwrap(), canonicalize(&g, &p).unwrap());
    }

    #[test]
    fn empty_relations_serialize_as_empty_groups() {
        let mut g = demo_graph();
        g.relations.clear();
        let rec = serialize_cot(&g, &demo_profile()).unwrap();
        assert!(rec
            .response_text
            .ends_with(r#"<RELATION>{"spatial":[],"possessive":[],"interactive":[]}</RELATION>"#));
    }

    #[test]
    fn self_relation_cannot_be_serialized() {
        let mut g = SceneGraph::new("img", 10, 10);
        g.objects.push(ObjectInstance::new("table", 1, BoundingBox::new(1.0, 1.0, 5.0, 5.0).unwrap()));
        g.relations.push(RelationTriplet::new(
            "table.1".parse().unwrap(),
            "on",
            "table.1".parse().unwrap(),
            "spatial",
        ));
        let err = serialize_cot(&g, &demo_profile()).unwrap_err();
        assert_eq!(err.code(), "SERIALIZE_INVALID_GRAPH");
    }

    #[test]
    fn whitespace_outside_payloads_is_ignored() {
        let spaced = GOOD.replace("\n", "\n\n   ").replace("<OBJECT>", "  <OBJECT>");
        let a = parse_completion(GOOD, &demo_profile(), &frame());
        let b = parse_completion(&spaced, &demo_profile(), &frame());
        assert_eq!(a.graph, b.graph);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn never_panics_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
                let text = String::from_utf8_lossy(&bytes);
                let p = parse_completion(&text, &demo_profile(), &frame());
                let r = format_reward(&p);
                prop_assert!([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0].contains(&r));
            }

            #[test]
            fn never_panics_on_tag_soup(parts in proptest::collection::vec(prop_oneof![
                Just("<CATEGORY>"), Just("</CATEGORY>"), Just("<OBJECT>"), Just("</OBJECT>"),
                Just("<RELATION>"), Just("</RELATION>"), Just("["), Just("]"), Just("{"), Just("}"),
                Just("\"person.1\""), Just(","), Just("\"spatial\":"), Just("\"bbox\":[1,2,3,4]"),
            ], 0..40)) {
                let text: String = parts.concat();
                let p = parse_completion(&text, &demo_profile(), &frame());
                prop_assert!(p.graph.is_none() || p.stage_valid == [true; 3]);
            }
        }
    }
}
