mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use proptest::collection::vec;
use proptest::prelude::*;
use serde_json::json;

use common::toy_benchmark;
use localeval::benchmark::{compute_distance, detect_stable_trend, QCConfig, REGISTRY};
use localeval::eval::{
    correlation_matrix, evaluate_model, letter, mark_unparsed, parse_answer, score_run, ModelRun, Parsed,
    PromptStrategy, ScoreTable, TaskScore,
};
use localeval::fixtures::{generate_fixture, FixtureSpec};
use localeval::gateway::{ChatMessage, ChatRequest, Gateway, MockReply, MockScript};
use localeval::platform::{
    ingest_str, BundleOptions, Denylist, GeoPoint, IngestOptions, ReviewRecord, StoreBundle,
};
use localeval::rng::SplitMix64;

fn letter_run() -> &'static ModelRun {
    static R: OnceLock<ModelRun> = OnceLock::new();
    R.get_or_init(|| {
        let gw = Gateway::new();
        let ep = gw.configure_mock("letters", MockScript::default());
        evaluate_model(&gw, toy_benchmark(), &ep, &PromptStrategy::zero_shot(), None, 4, 1).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn sampled_indices_are_distinct_and_in_range(seed: u64, len in 0usize..300, frac in 0.0f64..=1.0) {
        let n = (len as f64 * frac) as usize;
        let picks = SplitMix64::new(seed).sample_indices(len, n);
        prop_assert_eq!(picks.len(), n);
        prop_assert!(picks.iter().all(|&i| i < len));
        prop_assert_eq!(picks.iter().collect::<BTreeSet<_>>().len(), n);
        prop_assert_eq!(picks, SplitMix64::new(seed).sample_indices(len, n));
    }

    #[test]
    fn every_review_line_lands_in_one_bucket(texts in vec("[ -~]{0,40}", 1..12), term in "[a-z]{3,8}", upper: bool) {
        let deny = Denylist::new([term.as_str()]);
        let planted = if upper { term.to_uppercase() } else { term.clone() };
        let mut lines: Vec<String> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| json!({"review_id": format!("r{i}"), "user_id": "u1", "merchant_id": "m1", "text": t}).to_string())
            .collect();
        lines.push(json!({"review_id": "planted", "user_id": "u1", "merchant_id": "m1", "text": format!("so {planted} here")}).to_string());
        let (store, report) = ingest_str::<ReviewRecord>(&lines.join("\n"), Path::new("mem.jsonl"), &deny, &IngestOptions::default());
        prop_assert_eq!(report.accepted + report.rejected(), lines.len());
        prop_assert_eq!(store.len(), report.accepted);
        prop_assert!(!store.contains("planted"));
        let hits = texts.iter().filter(|t| t.to_lowercase().contains(&term)).count();
        prop_assert_eq!(report.scrubbed, hits + 1);
        prop_assert!(store.iter().all(|r| deny.find(&r.text).is_none()));
    }

    #[test]
    fn trend_verdict_flips_with_group_order(
        a in vec(0.0f64..1000.0, 10..25),
        b in vec(0.0f64..1000.0, 10..25),
        seed: u64,
    ) {
        let qc = QCConfig { bootstrap_resamples: 200, ..QCConfig::default() };
        let ab = detect_stable_trend(&a, &b, &qc, seed);
        let ba = detect_stable_trend(&b, &a, &qc, seed);
        prop_assert_eq!(ab.effect, -ba.effect);
        prop_assert_eq!(ab.ci_low, -ba.ci_high);
        prop_assert_eq!(ab.ci_high, -ba.ci_low);
    }

    #[test]
    fn overall_is_task_mean_and_category_weighted_mean(counts in vec((0usize..20, 1usize..20), REGISTRY.len())) {
        let tasks = REGISTRY
            .iter()
            .zip(&counts)
            .map(|(t, &(c, n))| (t.id.to_string(), TaskScore { correct: c.min(n), total: n }))
            .collect();
        let table = ScoreTable::from_tasks("p", "p", "zero_shot", "b", tasks).unwrap();
        let mean = table.tasks.values().map(TaskScore::accuracy).sum::<f64>() / table.tasks.len() as f64;
        prop_assert!((table.overall - mean).abs() < 1e-9);
        prop_assert!((table.overall - table.weighted_overall()).abs() < 1e-9);
        prop_assert!(table.overall >= 0.0 && table.overall <= 100.0);
    }

    #[test]
    fn marking_answers_unparsed_never_raises_scores(mask in vec(any::<bool>(), 82)) {
        let run = letter_run();
        let bench = toy_benchmark();
        let ids: BTreeSet<String> = run
            .answers
            .iter()
            .zip(&mask)
            .filter(|(_, m)| **m)
            .map(|(a, _)| a.question_id.clone())
            .collect();
        let before = score_run(run, bench).unwrap();
        let after = score_run(&mark_unparsed(run, &ids), bench).unwrap();
        prop_assert!(after.overall <= before.overall);
        for (task, s) in &after.tasks {
            prop_assert!(s.correct <= before.tasks[task].correct);
        }
    }

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal(cols in (3usize..15).prop_flat_map(|n| vec(vec(-50.0f64..50.0, n), 2..6))) {
        if let Ok(m) = correlation_matrix(&cols) {
            for i in 0..m.len() {
                prop_assert_eq!(m[i][i], 1.0);
                for j in 0..m.len() {
                    prop_assert_eq!(m[i][j], m[j][i]);
                    prop_assert!(m[i][j].abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn batch_results_keep_request_order(n in 1usize..40, parallel in 1usize..8) {
        let gw = Gateway::new();
        let script = MockScript::responder(|req, _| MockReply::Text(format!("echo {}", req.messages[0].content)));
        let ep = gw.configure_mock("echo", script);
        let requests: Vec<ChatRequest> = (0..n).map(|i| ChatRequest::new(vec![ChatMessage::user(format!("q{i}"))], 8)).collect();
        let out = gw.complete_batch(&requests, &ep, parallel).unwrap();
        prop_assert_eq!(out.len(), n);
        for (i, r) in out.iter().enumerate() {
            prop_assert_eq!(&r.as_ref().unwrap().text, &format!("echo q{i}"));
        }
        prop_assert!(gw.peak_in_flight() <= parallel);
    }

    #[test]
    fn stated_answer_letter_is_recovered(n in 2usize..9, pick in 0usize..9) {
        let i = pick % n;
        let options: Vec<String> = (0..n).map(|k| format!("option number {k}")).collect();
        prop_assert_eq!(parse_answer(&format!("Answer: {}", letter(i)), &options), Parsed::Index(i));
        prop_assert_eq!(parse_answer(&letter(i).to_string(), &options), Parsed::Index(i));
    }

    #[test]
    fn distance_is_symmetric_and_non_negative(
        la in -90.0f64..=90.0, lo in -180.0f64..=180.0, lb in -90.0f64..=90.0, mo in -180.0f64..=180.0,
    ) {
        let a = GeoPoint { latitude: la, longitude: lo };
        let b = GeoPoint { latitude: lb, longitude: mo };
        let ab = compute_distance(a, b).unwrap();
        prop_assert!(ab >= 0.0 && ab <= 20_040_000.0);
        prop_assert!((ab - compute_distance(b, a).unwrap()).abs() < 1e-6);
        prop_assert_eq!(compute_distance(a, a).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn export_then_load_reproduces_the_bundle(seed: u64) {
        let bundle = generate_fixture(&FixtureSpec { seed, ..FixtureSpec::small() });
        let dir = tempfile::tempdir().unwrap();
        bundle.export_dir(dir.path()).unwrap();
        let (back, reports) = StoreBundle::load_dir(dir.path(), &Denylist::default(), &BundleOptions::default()).unwrap();
        prop_assert!(reports.iter().all(|r| r.rejected() == 0));
        prop_assert_eq!(back.merchants.len(), bundle.merchants.len());
        prop_assert_eq!(back.interactions.len(), bundle.interactions.len());
        prop_assert_eq!(back.content_hash(), bundle.content_hash());
    }
}
