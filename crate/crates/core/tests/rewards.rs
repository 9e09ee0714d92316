use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sgr::graph::ProfileSpec;
use sgr::reward::{category_reward, fine_reward, predicate_weight, score_parsed, RewardConfig};
use sgr::structured_io::{parse_completion, ImageFrame};
use sgr::{composite_reward, DatasetProfile, EmbeddingStore, RewardBreakdown, SceneGraph};
use sgr_testkit::fixtures;
use sgr_testkit::reference::{Reference, Vectors};

struct World {
    profile: DatasetProfile,
    entries: Vec<(String, Vec<f64>)>,
    store: EmbeddingStore,
}

fn world() -> World {
    let entries = fixtures::embedding_entries(16, 7);
    World {
        profile: fixtures::profile(),
        store: fixtures::store_from(&entries),
        entries,
    }
}

fn components(b: &RewardBreakdown) -> [f64; 7] {
    [b.format, b.category, b.box_reward, b.recall, b.fine, b.coarse, b.composite]
}

fn scene_pair(seed: u64, w: &World) -> (SceneGraph, SceneGraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt = fixtures::random_scene(&mut rng, &w.profile, "s", 8, 12);
    let pred = fixtures::perturb(&mut rng, &gt, &w.profile, 8);
    (gt, pred)
}

#[test]
fn agrees_with_reference_on_random_scenes() {
    let w = world();
    let cfg = RewardConfig::default();
    let vectors = Vectors::new(&w.entries);
    let spec = w.profile.spec().clone();
    let reference = Reference { vectors: &vectors, spec: &spec, cfg: &cfg };
    for seed in 0..200 {
        let (gt, pred) = scene_pair(seed, &w);
        let text = fixtures::render(&pred, &w.profile);
        let got = composite_reward(&text, &gt, &w.profile, &cfg, &w.store).unwrap();
        let parsed = parse_completion(&text, &w.profile, &ImageFrame::of(&gt));
        let graph = parsed.graph.as_ref().unwrap();
        let cats = parsed.category_stage.as_ref().unwrap();
        let r = reference.score(&gt, parsed.valid_stages(), Some((cats, graph)));
        let want = [r.format, r.category, r.box_reward, r.recall, r.fine, r.coarse, r.composite];
        for (g, e) in components(&got).iter().zip(want) {
            assert!((g - e).abs() <= 1e-9, "seed {seed}: {got:?} vs {r:?}");
        }
    }
}

#[test]
fn self_prediction_scores_one() {
    let w = world();
    let cfg = RewardConfig::default();
    for seed in 0..100 {
        let (gt, _) = scene_pair(seed, &w);
        let b = composite_reward(&fixtures::render(&gt, &w.profile), &gt, &w.profile, &cfg, &w.store).unwrap();
        assert_eq!(components(&b), [1.0; 7], "seed {seed}");
    }
}

#[test]
fn unparseable_completion_earns_only_format_credit() {
    let w = world();
    let cfg = RewardConfig::default();
    let (gt, _) = scene_pair(1, &w);
    let b = composite_reward("no tags at all", &gt, &w.profile, &cfg, &w.store).unwrap();
    assert_eq!(components(&b), [0.0; 7]);
    let text = fixtures::render(&gt, &w.profile).replacen("</RELATION>", "", 1);
    let b = composite_reward(&text, &gt, &w.profile, &cfg, &w.store).unwrap();
    assert_eq!(b.format, 2.0 / 3.0);
    assert_eq!(b.composite, cfg.composite_weights.format * 2.0 / 3.0);
    assert_eq!([b.category, b.box_reward, b.recall, b.fine, b.coarse], [0.0; 5]);
}

#[test]
fn parallel_scoring_is_bit_identical_to_sequential() {
    let w = world();
    let cfg = RewardConfig::default();
    let items: Vec<(SceneGraph, String)> = (0..64)
        .map(|s| {
            let (gt, pred) = scene_pair(s, &w);
            let text = fixtures::render(&pred, &w.profile);
            (gt, text)
        })
        .collect();
    let seq: Vec<_> = items
        .iter()
        .map(|(g, t)| composite_reward(t, g, &w.profile, &cfg, &w.store).unwrap())
        .collect();
    let par: Vec<_> = items
        .par_iter()
        .map(|(g, t)| composite_reward(t, g, &w.profile, &cfg, &w.store).unwrap())
        .collect();
    assert_eq!(seq, par);
}

#[test]
fn whitespace_outside_payloads_does_not_matter() {
    let w = world();
    let cfg = RewardConfig::default();
    for seed in 0..50 {
        let (gt, pred) = scene_pair(seed, &w);
        let text = fixtures::render(&pred, &w.profile);
        let spaced = format!("\n\n  {}\t\n", text.replace('\n', "\n   \n"));
        let a = composite_reward(&text, &gt, &w.profile, &cfg, &w.store).unwrap();
        let b = composite_reward(&spaced, &gt, &w.profile, &cfg, &w.store).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn uniform_frequencies_reduce_fine_reward_to_plain_mean() {
    let w = world();
    let mut spec: ProfileSpec = w.profile.spec().clone();
    spec.predicate_freq.clear();
    let uniform = DatasetProfile::from_spec(spec).unwrap();
    let cfg = RewardConfig {
        w_inc: 3.0,
        ..Default::default()
    };
    for seed in 0..50 {
        let (gt, pred) = scene_pair(seed, &w);
        if gt.relations.is_empty() {
            continue;
        }
        let m = sgr::assignment::solve_matching(&gt.objects, &pred.objects, &cfg.matching, &w.store, gt.width, gt.height)
            .unwrap();
        let sims = sgr::reward::fine_similarities(&gt, &pred, &m, &w.store).unwrap();
        let mean = sims.iter().sum::<f64>() / sims.len() as f64;
        let fine = fine_reward(&gt, &pred, &m, &uniform, &cfg, &w.store).unwrap();
        assert!((fine - mean).abs() < 1e-12);
    }
}

#[test]
fn predicate_weight_is_monotone_in_frequency() {
    let w = world();
    let cfg = RewardConfig::default();
    let mut by_freq: Vec<(f64, f64)> = w
        .profile
        .predicates
        .iter()
        .map(|p| (w.profile.frequency(p).unwrap(), predicate_weight(p, &w.profile, &cfg).unwrap()))
        .collect();
    by_freq.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in by_freq.windows(2) {
        assert!(pair[1].1 <= pair[0].1);
    }
    assert_eq!(by_freq.last().unwrap().1, cfg.w_base);
    assert_eq!(by_freq[0].1, cfg.w_base + cfg.w_inc);
}

fn cats() -> impl Strategy<Value = Vec<&'static str>> {
    proptest::sample::subsequence(fixtures::categories(), 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn category_reward_is_one_only_on_equal_sets(a in cats(), b in cats()) {
        let r = category_reward(a.iter().copied(), b.iter().copied());
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(r == 1.0, a == b);
    }

    #[test]
    fn spurious_category_strictly_lowers_reward(gt in cats(), extra in proptest::sample::select(fixtures::categories())) {
        prop_assume!(!gt.is_empty() && !gt.contains(&extra));
        let base = category_reward(gt.iter().copied(), gt.iter().copied());
        let mut padded = gt.clone();
        padded.push(extra);
        let spammed = category_reward(padded.iter().copied(), gt.iter().copied());
        prop_assert!(spammed < base);
    }

    #[test]
    fn every_component_is_bounded(seed in any::<u64>(), damage in any::<bool>()) {
        let w = world();
        let cfg = RewardConfig::default();
        let (gt, pred) = scene_pair(seed, &w);
        let mut text = fixtures::render(&pred, &w.profile);
        if damage {
            text = fixtures::corrupt(&mut ChaCha8Rng::seed_from_u64(seed), &text);
        }
        let b = composite_reward(&text, &gt, &w.profile, &cfg, &w.store).unwrap();
        for v in components(&b) {
            prop_assert!((0.0..=1.0).contains(&v), "{:?}", b);
        }
    }

    #[test]
    fn composite_follows_the_weighted_formula(seed in any::<u64>()) {
        let w = world();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
        let total: f64 = raw.iter().sum();
        let mut cfg = RewardConfig::default();
        cfg.composite_weights.format = raw[0] / total;
        cfg.composite_weights.category = raw[1] / total;
        cfg.composite_weights.node = raw[2] / total;
        cfg.composite_weights.relation = 1.0 - (raw[0] + raw[1] + raw[2]) / total;
        prop_assume!(cfg.validate().is_ok());
        let (gt, pred) = scene_pair(seed, &w);
        let text = fixtures::render(&pred, &w.profile);
        let parsed = parse_completion(&text, &w.profile, &ImageFrame::of(&gt));
        let b = score_parsed(&parsed, &gt, &w.profile, &cfg, &w.store).unwrap();
        let c = &cfg.composite_weights;
        let expect = c.format * b.format
            + c.category * b.category
            + c.node * (b.box_reward + b.recall) / 2.0
            + c.relation * (b.fine + b.coarse) / 2.0;
        prop_assert!((b.composite - expect).abs() < 1e-12);
    }
}
