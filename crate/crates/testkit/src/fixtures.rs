//! Synthetic profiles, embedding tables and scenes.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgr::augment::{CandidateTriplet, Provenance};
use sgr::embedding::TableProvider;
use sgr::graph::{canonical_token, BoundingBox, InstanceKey, ProfileSpec, TaxonomyGroup};
use sgr::structured_io::serialize_cot;
use sgr::{DatasetProfile, EmbeddingStore, ObjectInstance, RelationTriplet, SceneGraph};

/// Categories in loose synonym groups so that triplet embeddings cluster.
pub const CATEGORY_GROUPS: &[&[&str]] = &[
    &["person", "man", "woman", "child"],
    &["dog", "cat", "horse"],
    &["car", "bike", "bus"],
    &["table", "chair", "bench"],
    &["shirt", "hat"],
    &["tree", "plant"],
];

pub const TAXONOMY: &[(&str, &[&str])] = &[
    ("geometric", &["above", "behind", "in front of", "near", "on", "under"]),
    ("possessive", &["has", "holding", "part of", "wearing"]),
    ("semantic", &["eating", "looking at", "riding", "sitting on", "using"]),
];

/// Predicates whose embeddings sit close together.
const PREDICATE_GROUPS: &[&[&str]] = &[
    &["above", "on", "sitting on"],
    &["behind", "in front of", "near"],
    &["under"],
    &["has", "holding", "using"],
    &["part of"],
    &["wearing"],
    &["eating"],
    &["looking at"],
    &["riding"],
];

pub fn categories() -> Vec<&'static str> {
    CATEGORY_GROUPS.iter().flat_map(|g| g.iter().copied()).collect()
}

pub fn predicates() -> Vec<&'static str> {
    TAXONOMY.iter().flat_map(|(_, ps)| ps.iter().copied()).collect()
}

/// Profile over [`CATEGORY_GROUPS`] and [`TAXONOMY`] with long-tailed raw
/// counts (one predicate never observed) and a seeded training catalog.
pub fn profile_spec() -> ProfileSpec {
    let preds = predicates();
    let mut predicate_freq = BTreeMap::new();
    for (rank, p) in preds.iter().enumerate() {
        if *p == "part of" {
            continue;
        }
        predicate_freq.insert(p.to_string(), (4000.0 / (rank as f64 + 1.0).powf(1.6)).round());
    }
    let cats = categories();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut train_triplets = Vec::new();
    for s in &cats {
        for p in &preds {
            for o in &cats {
                if s != o && rng.gen_bool(0.3) {
                    train_triplets.push([s.to_string(), p.to_string(), o.to_string()]);
                }
            }
        }
    }
    ProfileSpec {
        name: "synthetic".into(),
        categories: cats.iter().map(|c| c.to_string()).collect(),
        taxonomy: TAXONOMY
            .iter()
            .map(|(t, ps)| TaxonomyGroup {
                rel_type: t.to_string(),
                predicates: ps.iter().map(|p| p.to_string()).collect(),
            })
            .collect(),
        predicate_freq,
        train_triplets,
    }
}

pub fn profile() -> DatasetProfile {
    DatasetProfile::from_spec(profile_spec()).expect("fixture profile is valid")
}

/// Profile with `n` predicates `p000..`, strictly decreasing counts, split
/// round-robin over three relation types.
pub fn vocabulary_profile(n: usize) -> DatasetProfile {
    let names: Vec<String> = (0..n).map(|i| format!("p{i:03}")).collect();
    let taxonomy = ["a", "b", "c"]
        .iter()
        .enumerate()
        .map(|(k, t)| TaxonomyGroup {
            rel_type: t.to_string(),
            predicates: names.iter().skip(k).step_by(3).cloned().collect(),
        })
        .collect();
    let predicate_freq = names
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), (n - i) as f64))
        .collect();
    DatasetProfile::from_spec(ProfileSpec {
        name: format!("vocab{n}"),
        categories: vec!["thing".into()],
        taxonomy,
        predicate_freq,
        train_triplets: Vec::new(),
    })
    .expect("vocabulary profile is valid")
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            // Box-Muller; plenty for fixture data.
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let v: f64 = rng.gen();
            scale * (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect()
}

fn add(a: &[f64], b: &[f64], k: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + k * y).collect()
}

/// Raw (unnormalized) vectors for every category token, predicate token and
/// class-level triplet key of the fixture vocabulary. Synonyms share a
/// group center, so related triplets get high but imperfect similarity.
pub fn embedding_entries(dim: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cat_vec = BTreeMap::new();
    for group in CATEGORY_GROUPS {
        let center = gaussian(&mut rng, dim, 1.0);
        for c in group.iter() {
            cat_vec.insert(*c, add(&center, &gaussian(&mut rng, dim, 0.3), 1.0));
        }
    }
    let mut pred_vec = BTreeMap::new();
    for group in PREDICATE_GROUPS {
        let center = gaussian(&mut rng, dim, 1.0);
        for p in group.iter() {
            pred_vec.insert(*p, add(&center, &gaussian(&mut rng, dim, 0.3), 1.0));
        }
    }
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (c, v) in &cat_vec {
        out.push((canonical_token(c), v.clone()));
    }
    for (p, v) in &pred_vec {
        out.push((canonical_token(p), v.clone()));
    }
    for (s, sv) in &cat_vec {
        for (p, pv) in &pred_vec {
            for (o, ov) in &cat_vec {
                let mut v = add(&add(sv, pv, 1.5), ov, 0.8);
                v = add(&v, &gaussian(&mut rng, dim, 0.1), 1.0);
                out.push((format!("{s} {} {o}", canonical_token(p)), v));
            }
        }
    }
    out
}

pub fn store_from(entries: &[(String, Vec<f64>)]) -> EmbeddingStore {
    let table = TableProvider::from_entries(entries.iter().cloned()).expect("fixture table is valid");
    EmbeddingStore::new(Box::new(table), 1 << 16)
}

pub fn write_table(path: &Path, entries: &[(String, Vec<f64>)]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (key, vector) in entries {
        serde_json::to_writer(&mut w, &serde_json::json!({ "key": key, "vector": vector }))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Assembles a graph from `(category, box)` objects and `(subject index,
/// predicate, object index)` edges. Instance suffixes are assigned per
/// category in list order; self-edges and repeated edges are skipped.
pub fn build_graph(
    image_id: &str,
    width: u32,
    height: u32,
    objects: &[(&str, [f64; 4])],
    edges: &[(usize, &str, usize)],
    profile: &DatasetProfile,
) -> SceneGraph {
    let mut g = SceneGraph::new(image_id, width, height);
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for (cat, b) in objects {
        let n = counts.entry(cat).or_insert(0);
        *n += 1;
        g.objects.push(ObjectInstance::new(*cat, *n, BoundingBox::from(*b)));
    }
    let mut seen = HashSet::new();
    for &(s, p, o) in edges {
        if s == o || !seen.insert((s, p, o)) {
            continue;
        }
        let rel_type = profile.rel_type_of(p).expect("fixture predicate");
        g.relations.push(RelationTriplet::new(
            g.objects[s].key.clone(),
            p,
            g.objects[o].key.clone(),
            rel_type,
        ));
    }
    g
}

fn random_box(rng: &mut ChaCha8Rng, w: f64, h: f64) -> [f64; 4] {
    let bw = rng.gen_range(0.1..0.6) * w;
    let bh = rng.gen_range(0.1..0.6) * h;
    let x1 = rng.gen_range(0.0..w - bw);
    let y1 = rng.gen_range(0.0..h - bh);
    [x1, y1, x1 + bw, y1 + bh]
}

/// Valid random scene with 1..=`max_objects` objects and up to
/// `max_relations` edges.
pub fn random_scene(
    rng: &mut ChaCha8Rng,
    profile: &DatasetProfile,
    image_id: &str,
    max_objects: usize,
    max_relations: usize,
) -> SceneGraph {
    let cats = categories();
    let preds = predicates();
    let (w, h) = (rng.gen_range(200..1200u32), rng.gen_range(200..1000u32));
    let n = rng.gen_range(1..=max_objects);
    let objects: Vec<(&str, [f64; 4])> = (0..n)
        .map(|_| (*cats.choose(rng).unwrap(), random_box(rng, w as f64, h as f64)))
        .collect();
    let mut edges = Vec::new();
    if n >= 2 {
        for _ in 0..rng.gen_range(0..=max_relations) {
            edges.push((rng.gen_range(0..n), *preds.choose(rng).unwrap(), rng.gen_range(0..n)));
        }
    }
    build_graph(image_id, w, h, &objects, &edges, profile)
}

fn synonym_of(rng: &mut ChaCha8Rng, cat: &str) -> &'static str {
    let group = CATEGORY_GROUPS.iter().find(|g| g.contains(&cat)).unwrap();
    if rng.gen_bool(0.7) {
        group.choose(rng).unwrap()
    } else {
        categories().choose(rng).unwrap()
    }
}

/// A plausible, imperfect prediction of `gt`: jittered boxes, some
/// relabeled or missing objects, hallucinated extras, altered predicates.
/// Always a valid graph over the same frame.
pub fn perturb(rng: &mut ChaCha8Rng, gt: &SceneGraph, profile: &DatasetProfile, max_objects: usize) -> SceneGraph {
    let (w, h) = (gt.width as f64, gt.height as f64);
    let preds = predicates();
    let mut objects: Vec<(&str, [f64; 4])> = Vec::new();
    let mut origin: Vec<Option<usize>> = Vec::new();
    for (i, o) in gt.objects.iter().enumerate() {
        if rng.gen_bool(0.15) {
            continue;
        }
        let cat = if rng.gen_bool(0.2) {
            synonym_of(rng, &o.category)
        } else {
            categories().into_iter().find(|c| *c == o.category).unwrap()
        };
        let b = o.bbox;
        let spread = if rng.gen_bool(0.2) { 0.4 } else { 0.05 };
        let mut j = |v: f64, extent: f64| v + rng.gen_range(-spread..spread) * extent;
        let (bw, bh) = (b.x2 - b.x1, b.y2 - b.y1);
        let mut x = [j(b.x1, bw), j(b.y1, bh), j(b.x2, bw), j(b.y2, bh)];
        x[0] = x[0].clamp(0.0, w - 2.0);
        x[1] = x[1].clamp(0.0, h - 2.0);
        x[2] = x[2].clamp(x[0] + 1.0, w);
        x[3] = x[3].clamp(x[1] + 1.0, h);
        objects.push((cat, x));
        origin.push(Some(i));
    }
    while objects.len() < max_objects && rng.gen_bool(0.3) {
        objects.push((*categories().choose(rng).unwrap(), random_box(rng, w, h)));
        origin.push(None);
    }
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.shuffle(rng);
    let objects: Vec<(&str, [f64; 4])> = order.iter().map(|&k| objects[k]).collect();
    let origin: Vec<Option<usize>> = order.iter().map(|&k| origin[k]).collect();

    let pos = |gi: usize| origin.iter().position(|o| *o == Some(gi));
    let index = gt.index_of();
    let mut edges = Vec::new();
    for r in &gt.relations {
        let (Some(s), Some(o)) = (pos(index[&r.subject]), pos(index[&r.object])) else { continue };
        if rng.gen_bool(0.2) {
            continue;
        }
        let p = if rng.gen_bool(0.25) { *preds.choose(rng).unwrap() } else { preds.iter().copied().find(|p| *p == r.predicate).unwrap() };
        edges.push((s, p, o));
    }
    let n = objects.len();
    if n >= 2 {
        for _ in 0..rng.gen_range(0..=2) {
            edges.push((rng.gen_range(0..n), *preds.choose(rng).unwrap(), rng.gen_range(0..n)));
        }
    }
    build_graph(&gt.image_id, gt.width, gt.height, &objects, &edges, profile)
}

/// Completion text for `graph`.
pub fn render(graph: &SceneGraph, profile: &DatasetProfile) -> String {
    serialize_cot(graph, profile).expect("fixture graph is valid").response_text
}

/// Damages one or more stages of a well-formed completion.
pub fn corrupt(rng: &mut ChaCha8Rng, text: &str) -> String {
    match rng.gen_range(0..6) {
        0 => text.replacen("</RELATION>", "", 1),
        1 => text.replacen("<OBJECT>[", "<OBJECT>[,", 1),
        2 => text.replacen("<CATEGORY>[", "<CATEGORY>[\"unicorn\",", 1),
        3 => format!("{text}\n<CATEGORY>[]</CATEGORY>"),
        4 => text.replacen("]}]</OBJECT>", "]},{\"id\":\"ghost.1\",\"bbox\":[0,0,1,1]}]</OBJECT>", 1),
        _ => text.chars().take(text.len() / 2).collect(),
    }
}

pub fn instance_key(s: &str) -> InstanceKey {
    s.parse().expect("well-formed instance key")
}

/// Random scene with at least two objects and one relation.
pub fn anchored_scene(rng: &mut ChaCha8Rng, profile: &DatasetProfile, image_id: &str) -> SceneGraph {
    loop {
        let g = random_scene(rng, profile, image_id, 8, 10);
        if !g.relations.is_empty() {
            return g;
        }
    }
}

/// Candidate relations for `graphs`: mostly structurally valid ones over
/// existing instances, plus a sprinkling of every kind of defect and a few
/// candidates for an image that has no ground truth.
pub fn candidates(rng: &mut ChaCha8Rng, graphs: &[SceneGraph], per_image: usize) -> Vec<CandidateTriplet> {
    let preds = predicates();
    let mut out = Vec::new();
    let cand = |image: &str, s: String, p: &str, o: String| CandidateTriplet {
        image_id: image.to_owned(),
        subject: s,
        predicate: p.to_owned(),
        object: o,
        provenance: Provenance::Augmented,
        rel_type: None,
    };
    for g in graphs {
        let keys: Vec<String> = g.objects.iter().map(|o| o.key.to_string()).collect();
        for _ in 0..per_image {
            let s = keys.choose(rng).unwrap().clone();
            let o = keys.choose(rng).unwrap().clone();
            let p = *preds.choose(rng).unwrap();
            let mut c = cand(&g.image_id, s, p, o);
            match rng.gen_range(0..20) {
                0 => c.subject = "nosuffix".into(),
                1 => c.object = format!("{}.99", g.objects[0].category),
                2 => c.predicate = "floating near".into(),
                3 => c.rel_type = Some("not-a-type".into()),
                4 => c.object = c.subject.clone(),
                5 => {
                    let r = &g.relations[0];
                    c.subject = r.subject.to_string();
                    c.predicate = r.predicate.clone();
                    c.object = r.object.to_string();
                }
                6 => c.rel_type = profile_type(p),
                _ => {}
            }
            out.push(c);
        }
    }
    for _ in 0..3 {
        out.push(cand("missing-image", "person.1".into(), "near", "dog.1".into()));
    }
    out
}

fn profile_type(predicate: &str) -> Option<String> {
    TAXONOMY
        .iter()
        .find(|(_, ps)| ps.contains(&predicate))
        .map(|(t, _)| t.to_string())
}
