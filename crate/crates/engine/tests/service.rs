mod common;

use common::Workspace;
use scenegraph_engine::service::{
    handle_advantages, handle_eval, handle_health, handle_score, AdvantagesRequest, EvalRequest, ScoreRequest,
};
use scenegraph_engine::store::CompletionItem;
use sgr::eval::EvalConfig;
use sgr::gspo::gspo_objective;
use sgr::{composite_reward, PolicyGroup, PolicySample, RewardConfig};

fn score_request(items: Vec<CompletionItem>) -> ScoreRequest {
    ScoreRequest {
        profile: None,
        reward: None,
        items,
    }
}

#[test]
fn score_matches_direct_library_calls() {
    let ws = Workspace::new(20, 1);
    let engine = ws.engine();
    let items = ws.predictions(2);
    let resp = handle_score(&engine, &score_request(items.clone())).unwrap();
    assert_eq!(resp.results.len(), items.len());
    assert_eq!(resp.profile, "synthetic");
    assert_eq!(resp.config, RewardConfig::default());
    for (item, res) in items.iter().zip(&resp.results) {
        assert_eq!(res.sample_id, item.sample_id.clone().unwrap());
        let gt = ws.graphs.iter().find(|g| g.image_id == item.image_id).unwrap();
        let direct = composite_reward(&item.text, gt, &ws.profile, &engine.config.reward, &engine.embeddings).unwrap();
        assert_eq!(res.breakdown, Some(direct));
    }
    assert_eq!(resp.summary.errors, 0);
    assert_eq!(resp.summary.scored, 20);
    assert_eq!(resp.summary.failure_rate, 0.0);
}

#[test]
fn one_bad_item_does_not_fail_the_batch() {
    let ws = Workspace::new(5, 3);
    let engine = ws.engine();
    let mut items = ws.perfect();
    items.insert(
        2,
        CompletionItem {
            sample_id: Some("stray".into()),
            image_id: "nope".into(),
            text: items[0].text.clone(),
        },
    );
    items.push(CompletionItem {
        sample_id: Some("garbled".into()),
        image_id: ws.graphs[0].image_id.clone(),
        text: "<CATEGORY>[]</CATEGORY>".into(),
    });
    let resp = handle_score(&engine, &score_request(items)).unwrap();
    assert_eq!(resp.results.len(), 7);
    let stray = &resp.results[2];
    assert_eq!(stray.error.as_ref().unwrap().code, "UNKNOWN_IMAGE");
    assert!(stray.breakdown.is_none());
    let garbled = resp.results.last().unwrap().breakdown.unwrap();
    assert_eq!(garbled.format, 1.0 / 3.0);
    for r in resp.results.iter().take(6).filter(|r| r.sample_id != "stray") {
        assert_eq!(r.breakdown.unwrap().composite, 1.0);
    }
    assert_eq!(resp.summary.count, 7);
    assert_eq!(resp.summary.errors, 1);
    assert_eq!(resp.summary.scored, 6);
    assert!((resp.summary.failure_rate - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn request_level_rejections() {
    let ws = Workspace::new(3, 4);
    let mut engine = ws.engine();
    let mut req = score_request(ws.perfect());
    req.profile = Some("other".into());
    assert_eq!(handle_score(&engine, &req).unwrap_err().code, "INVALID_REQUEST");

    let mut req = score_request(ws.perfect());
    req.reward = Some(RewardConfig {
        tau: 1.5,
        ..Default::default()
    });
    assert_eq!(handle_score(&engine, &req).unwrap_err().code, "INVALID_CONFIG");

    engine.config.server.max_batch = 2;
    assert_eq!(handle_score(&engine, &score_request(ws.perfect())).unwrap_err().code, "BATCH_TOO_LARGE");
}

#[test]
fn reward_override_is_applied_and_echoed() {
    let ws = Workspace::new(6, 5);
    let engine = ws.engine();
    let mut cfg = RewardConfig::default();
    cfg.composite_weights.format = 1.0;
    cfg.composite_weights.category = 0.0;
    cfg.composite_weights.node = 0.0;
    cfg.composite_weights.relation = 0.0;
    let req = ScoreRequest {
        profile: Some("synthetic".into()),
        reward: Some(cfg.clone()),
        items: ws.predictions(9),
    };
    let resp = handle_score(&engine, &req).unwrap();
    assert_eq!(resp.config, cfg);
    for r in &resp.results {
        assert_eq!(r.breakdown.unwrap().composite, 1.0);
    }
}

fn group(rewards: &[f64], drift: f64) -> PolicyGroup {
    PolicyGroup {
        samples: rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| PolicySample {
                reward: r,
                logp_new: vec![-0.5 + drift * i as f64, -1.25],
                logp_old: vec![-0.5, -1.25],
            })
            .collect(),
    }
}

#[test]
fn advantages_isolate_malformed_groups() {
    let ws = Workspace::new(1, 6);
    let engine = ws.engine();
    let good = group(&[0.1, 0.7, 0.4, 0.9], 1e-3);
    let req = AdvantagesRequest {
        epsilon: None,
        groups: vec![
            serde_json::to_value(&good).unwrap(),
            serde_json::json!({"samples": "nope"}),
            serde_json::to_value(group(&[0.5], 0.0)).unwrap(),
            serde_json::to_value(group(&[0.3, 0.3, 0.3], 0.0)).unwrap(),
        ],
    };
    let resp = handle_advantages(&engine, &req).unwrap();
    assert_eq!(resp.epsilon, 3e-4);
    assert_eq!(resp.results[0].result, Some(gspo_objective(&good, 3e-4).unwrap()));
    assert_eq!(resp.results[1].error.as_ref().unwrap().code, "INVALID_REQUEST");
    assert_eq!(resp.results[2].error.as_ref().unwrap().code, "GROUP_TOO_SMALL");
    let flat = resp.results[3].result.as_ref().unwrap();
    assert_eq!(flat.advantages, vec![0.0; 3]);
    assert_eq!(flat.objective, 0.0);

    let bad = AdvantagesRequest {
        epsilon: Some(0.0),
        groups: vec![],
    };
    assert_eq!(handle_advantages(&engine, &bad).unwrap_err().code, "INVALID_CONFIG");
}

#[test]
fn eval_of_ground_truth_is_perfect() {
    let ws = Workspace::new(15, 7);
    let engine = ws.engine();
    let mut items = ws.perfect();
    items.push(CompletionItem {
        sample_id: None,
        image_id: "ghost".into(),
        text: String::new(),
    });
    let resp = handle_eval(
        &engine,
        &EvalRequest {
            profile: None,
            eval: None,
            items,
        },
    )
    .unwrap();
    assert_eq!(resp.evaluated, 15);
    assert_eq!(resp.errors.len(), 1);
    assert_eq!(resp.errors[0].error.code, "UNKNOWN_IMAGE");
    let r = &resp.report;
    assert_eq!((r.recall, r.m_recall, r.det_recall, r.det_m_recall, r.failure_rate), (1.0, 1.0, 1.0, 1.0, 0.0));
    assert!(r.per_predicate_recall.values().all(|v| *v == 1.0));
    let sizes = (resp.partition.head.len(), resp.partition.body.len(), resp.partition.tail.len());
    assert_eq!(sizes, (4, 4, 7));
}

#[test]
fn eval_counts_unparseable_completions_as_failures() {
    let ws = Workspace::new(10, 8);
    let engine = ws.engine();
    let mut items = ws.perfect();
    for item in items.iter_mut().take(4) {
        item.text = item.text.replacen("<OBJECT>", "<OBJ>", 1);
    }
    let req = EvalRequest {
        profile: None,
        eval: Some(EvalConfig {
            iou_threshold: 0.5,
            top_k: None,
        }),
        items,
    };
    let resp = handle_eval(&engine, &req).unwrap();
    assert_eq!(resp.report.failure_rate, 0.4);
    assert!(resp.report.recall < 1.0);
}

#[test]
fn health_reports_profile_and_provider() {
    let ws = Workspace::new(4, 9);
    let engine = ws.engine();
    let h = handle_health(&engine);
    assert_eq!(h.status, "ok");
    assert_eq!(h.ground_truth_images, 4);
    assert_eq!(h.profile.relation_types, vec!["geometric", "possessive", "semantic"]);
    assert_eq!(h.provider.info.mode, "table");
    assert_eq!(h.provider.info.dim, Some(16));
    assert!(h.provider.reachable);
}
