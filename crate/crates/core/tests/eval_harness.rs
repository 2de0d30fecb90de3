mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{data, pool_benchmark, toy_benchmark};
use localeval::benchmark::{task_by_id, BenchmarkFile, Category, REGISTRY};
use localeval::eval::*;
use localeval::gateway::{EndpointConfig, Gateway, GatewayError, MockReply, MockScript, Role};
use localeval::rng::fnv1a64;

fn mock(gw: &Gateway, script: MockScript) -> EndpointConfig {
    gw.configure_mock("mock", script)
}

fn run_scripted(b: &BenchmarkFile, correct: impl Fn(&str) -> bool) -> ModelRun {
    let gw = Gateway::new();
    let s = PromptStrategy::zero_shot();
    let script = scripted_script(b, &s, None, 3, |q| correct(&q.question_id)).unwrap();
    evaluate_model(&gw, b, &mock(&gw, script), &s, None, 4, 3).unwrap()
}

#[test]
fn parse_golden_table() {
    let cases = data("parse_golden.json");
    let cases = cases.as_array().unwrap();
    assert_eq!(cases.len(), 30);
    for c in cases {
        let raw = c["raw"].as_str().unwrap();
        let options: Vec<String> = serde_json::from_value(c["options"].clone()).unwrap();
        let want = match c["expected"].as_u64() {
            Some(i) => Parsed::Index(i as usize),
            None => Parsed::Unparsed,
        };
        assert_eq!(parse_answer(raw, &options), want, "{raw:?}");
    }
}

#[test]
fn pearson_matches_independent_oracle() {
    let d = data("pearson_oracle.json");
    let pairs = d["pearson"].as_array().unwrap();
    assert_eq!(pairs.len(), 100);
    for p in pairs {
        let x: Vec<f64> = serde_json::from_value(p["x"].clone()).unwrap();
        let y: Vec<f64> = serde_json::from_value(p["y"].clone()).unwrap();
        let r = pearson(&x, &y).unwrap();
        assert!((r - p["r"].as_f64().unwrap()).abs() < 1e-9, "{r} vs {}", p["r"]);
    }
}

#[test]
fn table1_category_matrix_matches_oracle() {
    let d = data("table1_oracle.json");
    let want: Vec<Vec<f64>> = serde_json::from_value(d["category_matrix"].clone()).unwrap();
    let m = category_correlation(&builtin_table1()).unwrap();
    for i in 0..4 {
        assert_eq!(m[i][i], 1.0);
        for j in 0..4 {
            assert_eq!(m[i][j], m[j][i]);
            assert!((m[i][j] - want[i][j]).abs() < 1e-9);
            assert!(m[i][j] > 0.0);
        }
    }
    let rows = builtin_table1();
    let sf: Vec<f64> = rows.iter().map(|r| r.service_fundamentals).collect();
    let swc: Vec<f64> = rows.iter().map(|r| r.service_with_context).collect();
    assert!((pearson(&sf, &swc).unwrap() - d["sf_swc"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn table1_weighted_means() {
    let d = data("table1_oracle.json");
    for r in builtin_table1() {
        let want = d["weighted"][&r.model].as_f64().unwrap();
        assert!((r.weighted_mean(CATEGORY_WEIGHTS) - want).abs() < 1e-9, "{}", r.model);
    }
    let v = verify_published_table(&builtin_table1(), CATEGORY_WEIGHTS, DEFAULT_TOLERANCE);
    let row = |m: &str| v.rows.iter().find(|r| r.model == m).unwrap().clone();
    assert_eq!(format!("{:.2}", row("GPT-4o").weighted), "68.52");
    assert_eq!(format!("{:.2}", row("Claude 3.5 Sonnet-v2").weighted), "68.86");
    assert!(row("Claude 3.5 Sonnet-v2").pass);
    assert_eq!(format!("{:.2}", row("Qwen2.5-0.5B").weighted), "45.85");
    assert!(row("Qwen2.5-0.5B").pass);
    // The published Phi-3 mini overall is 1.64 above its weighted categories.
    assert_eq!(v.worst.as_ref().unwrap().model, "Phi-3 mini");
    assert_eq!(v.failed, 1);
}

#[test]
fn scoring_matches_hand_computation() {
    let b = toy_benchmark();
    assert_eq!(b.questions.len(), 82);
    let rule = |id: &str| fnv1a64(id.as_bytes()) % 3 != 0;
    let run = run_scripted(b, rule);
    let table = score_run(&run, b).unwrap();

    let mut per_task: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for q in &b.questions {
        let e = per_task.entry(q.task_type.as_str()).or_default();
        e.1 += 1.0;
        if rule(&q.question_id) {
            e.0 += 1.0;
        }
    }
    let acc: BTreeMap<&str, f64> = per_task.iter().map(|(t, (c, n))| (*t, 100.0 * c / n)).collect();
    let all: Vec<f64> = acc.values().copied().collect();
    let overall = all.iter().sum::<f64>() / all.len() as f64;
    assert!((table.overall - overall).abs() < 1e-9);
    for c in Category::ALL {
        let v: Vec<f64> = acc.iter().filter(|(t, _)| task_by_id(t).unwrap().category == c).map(|(_, a)| *a).collect();
        let want = v.iter().sum::<f64>() / v.len() as f64;
        assert!((table.category(c).unwrap() - want).abs() < 1e-9, "{c}");
    }
    let weighted = [18.0, 10.0, 10.0, 3.0]
        .iter()
        .zip(Category::ALL)
        .map(|(w, c)| w * table.category(c).unwrap())
        .sum::<f64>()
        / 41.0;
    assert!((table.overall - weighted).abs() < 1e-9);
    assert!((table.overall - table.weighted_overall()).abs() < 1e-9);
    assert_eq!(run.summary.correct, b.questions.iter().filter(|q| rule(&q.question_id)).count());
}

#[test]
fn uniform_accuracy_gives_same_overall() {
    let tasks = REGISTRY.iter().map(|t| (t.id.to_string(), TaskScore { correct: 73, total: 100 })).collect();
    let t = ScoreTable::from_tasks("x", "x", "zero_shot", "b", tasks).unwrap();
    assert_eq!(format!("{:.2}", t.overall), "73.00");
}

#[test]
fn all_correct_mock_scores_100_and_runs_are_identical() {
    let b = toy_benchmark();
    let a = run_scripted(b, |_| true);
    let table = score_run(&a, b).unwrap();
    assert_eq!(table.overall, 100.0);
    let again = run_scripted(b, |_| true);
    assert_eq!(a.to_json(), again.to_json());
    assert!(a.started_at.is_none());
}

#[test]
fn ten_question_run_counts_seven() {
    let mut b = toy_benchmark().clone();
    b.questions.truncate(10);
    let keep: BTreeSet<String> = b.questions.iter().take(7).map(|q| q.question_id.clone()).collect();
    let run = run_scripted(&b, |id| keep.contains(id));
    assert_eq!(run.summary.correct, 7);
    assert_eq!(run.answers.len(), 10);
}

#[test]
fn unparsed_never_raises_scores() {
    let b = toy_benchmark();
    let run = run_scripted(b, |id| fnv1a64(id.as_bytes()) % 2 == 0);
    let base = score_run(&run, b).unwrap();
    for k in [1usize, 5, 20, 82] {
        let ids: BTreeSet<String> =
            b.questions.iter().filter(|q| fnv1a64(q.stem.as_bytes()) % 82 < k as u64).map(|q| q.question_id.clone()).collect();
        let t = score_run(&mark_unparsed(&run, &ids), b).unwrap();
        assert!(t.overall <= base.overall);
        for c in Category::ALL {
            assert!(t.category(c) <= base.category(c));
        }
    }
}

#[test]
fn run_against_other_benchmark_is_rejected() {
    let b = toy_benchmark();
    let run = run_scripted(b, |_| true);
    let mut other = b.clone();
    other.questions.pop();
    assert!(matches!(score_run(&run, &other), Err(EvalError::VersionMismatch { .. })));
}

#[test]
fn transport_failures_mark_run_degraded() {
    let b = toy_benchmark();
    let gw = Gateway::new().without_backoff_sleep();
    let ep = mock(
        &gw,
        MockScript::responder(|r, _| {
            if fnv1a64(r.last_user_content().as_bytes()) % 3 == 0 {
                MockReply::Fail { status: 503, message: "down".into() }
            } else {
                MockReply::Text("A".into())
            }
        }),
    );
    let run = evaluate_model(&gw, b, &ep, &PromptStrategy::zero_shot(), None, 4, 1).unwrap();
    assert_eq!(run.answers.len(), b.questions.len());
    assert!(run.summary.transport_failures > 0);
    assert!(run.summary.degraded);
    for a in run.answers.iter().filter(|a| a.error.is_some()) {
        assert_eq!(a.parsed, Parsed::Unparsed);
        assert!(!a.correct);
    }
}

#[test]
fn missing_credentials_abort_the_run() {
    let gw = Gateway::new();
    let mut ep = EndpointConfig::remote("r", "http://127.0.0.1:9", "m");
    ep.auth_env = Some("LOCALEVAL_TEST_UNSET_TOKEN".into());
    let err = evaluate_model(&gw, toy_benchmark(), &ep, &PromptStrategy::zero_shot(), None, 1, 1).unwrap_err();
    assert!(matches!(err, EvalError::Gateway(GatewayError::MissingAuth { .. })), "{err}");
}

#[test]
fn strategy_isolation() {
    let q = &toy_benchmark().questions[0];
    let p = localeval::prompts::PromptCatalog::builtin();
    let zero = render_prompt(q, &PromptStrategy::zero_shot(), &[], 1).unwrap();
    assert_eq!(zero.messages.len(), 1);
    let text = &zero.messages[0].content;
    assert!(text.contains(&q.stem));
    assert_eq!(text.matches(&p.eval.question_prefix).count(), 1);
    assert!(!text.contains(&p.eval.exemplar_answer_prefix));
    assert!(!text.contains(&p.eval.default_role));
    assert!(!text.contains("step by step"));
    assert_eq!(zero.max_output_tokens, ANSWER_MAX_TOKENS);

    let role = render_prompt(q, &PromptStrategy::role_play(None), &[], 1).unwrap();
    assert_eq!(role.messages[0].role, Role::System);
    assert_eq!(role.messages[0].content, p.eval.default_role);
    assert_eq!(role.messages[1].content, *text);

    let cot = render_prompt(q, &PromptStrategy::cot(), &[], 1).unwrap();
    assert!(cot.messages[0].content.contains("step by step"));
    assert!(cot.messages[0].content.trim_end().ends_with(&format!("({}).", letter_list(q.options.len()))));
    assert_eq!(cot.max_output_tokens, COT_MAX_TOKENS);
    for r in [&zero, &role, &cot] {
        assert_eq!(r.temperature, 0.0);
    }
}

#[test]
fn five_shot_blocks_are_disjoint_from_eval_set() {
    let b = toy_benchmark();
    let pool = pool_benchmark();
    let s = PromptStrategy::k_shot(5, "pool");
    let reqs = build_requests(b, &s, Some(pool), 2).unwrap();
    let eval_ids: BTreeSet<&str> = b.questions.iter().map(|q| q.question_id.as_str()).collect();
    let eval_stems: BTreeSet<&str> = b.questions.iter().map(|q| q.stem.as_str()).collect();
    let p = localeval::prompts::PromptCatalog::builtin();
    for ((req, ids), q) in reqs.iter().zip(&b.questions) {
        assert_eq!(ids.len(), 5);
        let body = &req.messages[0].content;
        assert_eq!(body.matches(&format!("\n{}", p.eval.exemplar_answer_prefix)).count(), 5);
        assert_eq!(body.matches(&p.eval.question_prefix).count(), 6);
        let target_at = body.rfind(&p.eval.question_prefix).unwrap();
        assert!(body[target_at..].contains(&q.stem));
        for id in ids {
            assert!(!eval_ids.contains(id.as_str()));
            let e = pool.question(id).unwrap();
            assert_eq!(e.task_type, q.task_type);
            assert!(!eval_stems.contains(e.stem.as_str()));
        }
    }
    // Using the evaluated benchmark as its own pool leaves nothing to draw from.
    assert!(matches!(build_requests(b, &s, Some(b), 2), Err(EvalError::InsufficientExemplars { .. })));
}

#[test]
fn report_round_trip_and_ranks() {
    let b = toy_benchmark();
    let mut tables = vec![
        score_run(&run_scripted(b, |id| fnv1a64(id.as_bytes()) % 2 == 0), b).unwrap(),
        score_run(&run_scripted(b, |_| true), b).unwrap(),
    ];
    tables[0].endpoint_id = "weak".into();
    tables[0].label = "weak/zero_shot".into();
    rank_tables(&mut tables);
    assert_eq!(tables[0].rank, Some(1));
    assert_eq!(tables[0].overall, 100.0);
    assert_eq!(tables[1].rank, Some(2));

    let md = render_report(&tables[..1], &[], ReportFormat::Markdown);
    let header = md.lines().next().unwrap();
    assert_eq!(header, "| Run | SF | SwC | USI | Comp | Overall | Rank |");
    assert_eq!(md.lines().nth(2).unwrap().matches('|').count(), 8);

    let csv = render_report(&tables, &[], ReportFormat::Csv);
    assert_eq!(parse_report_csv(&csv).unwrap(), tables);

    let cmp = compare(&tables[1], &tables[0]);
    let md = render_report(&tables, &[cmp], ReportFormat::Markdown);
    assert!(md.contains("ΔOverall"));
}

#[test]
fn correlation_analysis_structure() {
    let b = toy_benchmark();
    let mut tables = Vec::new();
    for salt in 0..4u64 {
        let run = run_scripted(b, |id| {
            let q = b.question(id).unwrap();
            q.task_type == "category_prediction" || (fnv1a64(id.as_bytes()) ^ salt) % (2 + salt) != 0
        });
        let mut t = score_run(&run, b).unwrap();
        t.label = format!("run{salt}");
        tables.push(t);
    }
    let rep = correlation_analysis(&tables).unwrap();
    assert!(rep.excluded_tasks.contains(&"category_prediction".to_string()));
    let m = &rep.task_matrix;
    for i in 0..m.len() {
        assert_eq!(m[i][i], 1.0);
        for j in 0..m.len() {
            assert_eq!(m[i][j], m[j][i]);
        }
    }
    assert!(correlation_analysis(&tables[..2]).is_err());
}
