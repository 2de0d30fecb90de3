mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use common::oracle::{haversine, Oracle};
use localeval::benchmark::*;
use localeval::fixtures::{generate_fixture, FixtureSpec};
use localeval::platform::{GeoPoint, StoreBundle};
use serde_json::Value;

fn frozen() -> Value {
    serde_json::from_str(include_str!("data/benchmark_oracle.json")).unwrap()
}

fn bundle() -> &'static StoreBundle {
    static B: OnceLock<StoreBundle> = OnceLock::new();
    B.get_or_init(|| generate_fixture(&FixtureSpec::benchmark()))
}

fn full_build() -> &'static BenchmarkBuild {
    static F: OnceLock<BenchmarkBuild> = OnceLock::new();
    F.get_or_init(|| build_benchmark(bundle(), "Hangzhou", &BuildOptions::default(), 42).unwrap())
}

#[test]
fn every_question_matches_brute_force_oracle() {
    let build = full_build();
    let local = bundle().filter_city("Hangzhou");
    let failures = Oracle { b: &local, file: &build.file }.check_all();
    assert!(failures.is_empty(), "{} oracle disagreements: {:#?}", failures.len(), &failures[..failures.len().min(10)]);
}

#[test]
fn fixture_fills_every_task_without_shortfall() {
    let build = full_build();
    assert_eq!(build.report.tasks.len(), 41);
    assert_eq!(build.report.shortfalls, 0, "{:#?}", build.report.tasks.iter().filter(|t| t.shortfall.is_some()).collect::<Vec<_>>());
    assert_eq!(build.file.counts.total, 41 * 13);
    for t in REGISTRY.iter() {
        assert_eq!(build.file.counts.by_task[t.id], 13, "{}", t.id);
    }
}

#[test]
fn rebuild_is_byte_identical() {
    let again = build_benchmark(bundle(), "Hangzhou", &BuildOptions::default(), 42).unwrap();
    assert_eq!(full_build().file.to_json(), again.file.to_json());
    let other = build_benchmark(bundle(), "Hangzhou", &BuildOptions::default(), 43).unwrap();
    assert_ne!(full_build().file.to_json(), other.file.to_json());
}

#[test]
fn json_round_trip_and_lookup() {
    let f = &full_build().file;
    let back = BenchmarkFile::from_json(&f.to_json()).unwrap();
    assert_eq!(&back, f);
    let q = &f.questions[17];
    assert_eq!(back.question(&q.question_id), Some(q));
    assert!(q.question_id.starts_with(&format!("{}-", q.task_type)));
}

#[test]
fn two_per_task_header_totals() {
    let opts = BuildOptions { questions_per_task: 2, ..BuildOptions::default() };
    let f = build_benchmark(bundle(), "Hangzhou", &opts, 5).unwrap().file;
    assert_eq!(f.counts.total, 82);
    let by: Vec<usize> = Category::ALL.iter().map(|c| f.counts.by_category[c]).collect();
    assert_eq!(by, vec![36, 20, 20, 6]);
}

#[test]
fn correct_positions_spread_over_multi_option_tasks() {
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for q in &full_build().file.questions {
        if q.options.len() == 4 && matches!(q.task().unwrap().arity, Arity::Choice(4)) {
            *hist.entry(q.correct_index).or_default() += 1;
        }
    }
    let total: usize = hist.values().sum();
    for i in 0..4 {
        let share = *hist.get(&i).unwrap_or(&0) as f64 / total as f64;
        assert!((0.15..=0.35).contains(&share), "position {i}: {share} of {total}");
    }
}

#[test]
fn oversize_option_list_aborts_assembly() {
    let mut qs = full_build().file.questions.clone();
    let q = qs.iter_mut().find(|q| q.task_type == "business_district_identification").unwrap();
    q.options = (0..21).map(|i| format!("district {i}")).collect();
    q.correct_index = 0;
    let err = assemble_benchmark(qs, "Hangzhou", 42, &BuildOptions::default(), "x").unwrap_err();
    assert!(matches!(err, BenchmarkError::Invalid { .. }), "{err:?}");
}

#[test]
fn unannotated_reviews_are_a_hard_error() {
    let mut reviews: Vec<_> = bundle().reviews.iter().cloned().collect();
    for r in &mut reviews {
        r.annotations.clear();
    }
    let mut b = bundle().clone();
    b.reviews = localeval::platform::Store::from_records(reviews);
    let opts = BuildOptions { tasks: vec!["review_information_points".into()], ..BuildOptions::default() };
    let err = build_benchmark(&b, "Hangzhou", &opts, 1).unwrap_err();
    assert!(matches!(err, BenchmarkError::MissingAnnotations { .. }), "{err:?}");
}

#[test]
fn unknown_task_and_empty_city_rejected() {
    let opts = BuildOptions { tasks: vec!["horoscope".into()], ..BuildOptions::default() };
    assert!(matches!(build_benchmark(bundle(), "Hangzhou", &opts, 1), Err(BenchmarkError::UnknownTask(_))));
    assert!(matches!(
        build_benchmark(bundle(), "Atlantis", &BuildOptions::default(), 1),
        Err(BenchmarkError::EmptyCity(_))
    ));
}

#[test]
fn haversine_matches_frozen_value() {
    let want = frozen()["haversine_beijing_shanghai_m"].as_f64().unwrap();
    let got = compute_distance(
        GeoPoint { latitude: 39.9042, longitude: 116.4074 },
        GeoPoint { latitude: 31.2304, longitude: 121.4737 },
    )
    .unwrap();
    assert!((got - want).abs() / want < 1e-3, "{got} vs {want}");
    assert!((haversine((39.9042, 116.4074), (31.2304, 121.4737)) - want).abs() < 1e-6);
}

#[test]
fn bootstrap_matches_frozen_intervals() {
    let qc = QCConfig::default();
    let fixture: Value = serde_json::from_str(include_str!("data/trend_fixture.json")).unwrap();
    assert_eq!(fixture["resamples"].as_u64().unwrap() as usize, qc.bootstrap_resamples);
    for case in fixture["cases"].as_array().unwrap() {
        let v = |k: &str| case[k].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect::<Vec<_>>();
        let (a, b) = (v("a"), v("b"));
        let t = detect_stable_trend(&a, &b, &qc, case["seed"].as_u64().unwrap());
        let name = case["name"].as_str().unwrap();
        for (got, key) in [(t.effect, "effect"), (t.ci_low, "ci_low"), (t.ci_high, "ci_high")] {
            assert!((got - case[key].as_f64().unwrap()).abs() < 1e-9, "{name} {key}: {got}");
        }
        let expect = if name == "flat" { TrendDirection::None } else { TrendDirection::AHigher };
        assert_eq!(t.direction, expect, "{name}");
    }
}

#[test]
fn shuffle_position_histogram_matches_frozen() {
    let want: Vec<u64> =
        frozen()["position_histogram_1000"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    let mut hist = vec![0u64; 4];
    for seed in 0..1000 {
        let mut opts: Vec<String> = ["c", "d1", "d2", "d3"].iter().map(|s| s.to_string()).collect();
        hist[shuffle_options(&mut opts, 0, seed)] += 1;
    }
    assert_eq!(hist, want);
    let chi2: f64 = hist.iter().map(|&o| (o as f64 - 250.0).powi(2) / 250.0).sum();
    assert!(chi2 < 7.815, "chi2 {chi2}");
}

#[test]
fn distractor_sampling_matches_frozen() {
    let f = frozen();
    let pool: Vec<String> = "abcdefghij".chars().map(String::from).collect();
    for (seed, key) in [(1, "distractors_seed1"), (2, "distractors_seed2")] {
        let want: Vec<String> = serde_json::from_value(f[key].clone()).unwrap();
        assert_eq!(sample_distractors("c", &pool, 3, seed).unwrap(), want);
    }
    assert_eq!(localeval::rng::derive_seed(7, "Hangzhou"), f["derive_seed_7_hangzhou"].as_u64().unwrap());
}
