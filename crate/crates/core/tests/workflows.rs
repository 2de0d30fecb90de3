mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use common::fixture_bundle;
use localeval::benchmark::{build_benchmark, BenchmarkFile, BuildOptions};
use localeval::eval::{build_requests, evaluate_model, letter, score_run, Parsed, PromptStrategy};
use localeval::gateway::{Gateway, MockReply, MockScript};
use localeval::manifest::ManifestContext;
use localeval::prompts::input_of;
use localeval::simulate::agent_script;
use localeval::synthesis::{export_training_file, read_training_file, Agent};
use localeval::workflows::*;

fn composite() -> &'static BenchmarkFile {
    static F: OnceLock<BenchmarkFile> = OnceLock::new();
    F.get_or_init(|| {
        let opts = BuildOptions { tasks: WORKFLOW_IDS.iter().map(|s| s.to_string()).collect(), ..BuildOptions::default() };
        build_benchmark(fixture_bundle(), "Hangzhou", &opts, 21).unwrap().file
    })
}

fn input(req: &localeval::gateway::ChatRequest) -> serde_json::Value {
    input_of(req.last_user_content()).unwrap()
}

/// Final steps answer correctly; every other step gives a fixed analysis.
fn oracle_script(b: &BenchmarkFile) -> MockScript {
    let answers: BTreeMap<String, char> = b.questions.iter().map(|q| (q.question_id.clone(), letter(q.correct_index))).collect();
    MockScript::responder(move |req, _| {
        let v = input(req);
        let qid = v["question_id"].as_str().unwrap_or_default();
        if v["final"].as_bool().unwrap_or(false) {
            MockReply::Text(format!("Weighing everything above.\nAnswer: {}", answers[qid]))
        } else {
            MockReply::Text(format!("Notes on {} for {qid}.", v["step"].as_str().unwrap()))
        }
    })
}

#[test]
fn traces_follow_step_order_and_call_count() {
    let b = composite();
    let gw = Gateway::new();
    let ep = gw.configure_mock("agent", agent_script());
    let batch = run_workflows(&gw, &ep, b, Some(fixture_bundle()), &WorkflowOptions::default()).unwrap();
    assert_eq!(batch.traces.len(), b.questions.len());
    for t in &batch.traces {
        let names: Vec<&str> = t.steps.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, required_steps(&t.workflow_id).unwrap());
        assert!(t.is_complete());
        assert_ne!(t.prediction, Parsed::Unparsed);
    }
    assert_eq!(gw.requests_with_tag_prefix("workflow."), 4 * b.questions.len());
    assert_eq!(gw.total_requests(), 4 * b.questions.len());
    for (id, s) in &batch.summaries {
        assert_eq!(s.questions, b.counts.by_task[id.as_str()], "{id}");
        assert_eq!(s.calls, 4 * s.questions);
    }
}

#[test]
fn each_prompt_embeds_all_earlier_responses() {
    let b = composite();
    let gw = Gateway::new();
    let ep = gw.configure_mock("agent", agent_script());
    let q = b.questions.iter().find(|q| q.task_type == "recommendation").unwrap();
    let spec = WorkflowSpec::builtin("recommendation").unwrap();
    let stats = similar_profile_stats(fixture_bundle(), &q.construction.source_ids[0], DEFAULT_MIN_SHARED).unwrap();
    let t = run_workflow(&spec, q, Some(&stats), &gw, &ep).unwrap();
    for k in 0..4 {
        let req = step_request(&spec, k, q, Some(&stats), &t.steps[..k]);
        assert_eq!(req.fingerprint(), t.steps[k].prompt_fingerprint, "step {k}");
        for prior in &t.steps[..k] {
            assert!(req.last_user_content().contains(prior.response.trim()));
        }
    }
    let first = step_request(&spec, 0, q, Some(&stats), &[]);
    assert!(first.last_user_content().contains("Users with similar profiles"));
    let again = run_workflow(&spec, q, Some(&stats), &gw, &ep).unwrap();
    assert_eq!(t, again);
}

#[test]
fn final_step_answer_is_parsed() {
    let b = composite();
    let q = b.questions.iter().find(|q| q.task_type == "search" && q.options.len() == 4).unwrap();
    let gw = Gateway::new();
    let ep = gw.configure_mock(
        "b",
        MockScript::responder(|req, _| {
            let last = input_of(req.last_user_content()).unwrap()["final"].as_bool().unwrap();
            MockReply::Text(if last { "The answer is B".into() } else { "thinking".into() })
        }),
    );
    let t = run_workflow(&WorkflowSpec::builtin("search").unwrap(), q, None, &gw, &ep).unwrap();
    assert_eq!(t.prediction, Parsed::Index(1));
    assert_eq!(t.correct, q.correct_index == 1);
}

#[test]
fn step_failure_truncates_trace() {
    let b = composite();
    let q = b.questions.iter().find(|q| q.task_type == "content_marketing").unwrap();
    let gw = Gateway::new().without_backoff_sleep();
    let ep = gw.configure_mock(
        "flaky",
        MockScript::responder(|req, _| {
            if input_of(req.last_user_content()).unwrap()["step"] == "topic_sentiment_parsing" {
                MockReply::Fail { status: 503, message: "overloaded".into() }
            } else {
                MockReply::Text("fine".into())
            }
        }),
    );
    let t = run_workflow(&WorkflowSpec::builtin("content_marketing").unwrap(), q, None, &gw, &ep).unwrap();
    assert_eq!(t.steps.len(), 2);
    assert!(t.steps[0].error.is_none());
    assert!(t.steps[1].error.is_some());
    assert_eq!(t.prediction, Parsed::Unparsed);
    assert!(!t.is_complete());
    assert!(trace_to_instruction(&t, q).is_err());
}

#[test]
fn wrong_scenario_rejected() {
    let b = composite();
    let q = b.questions.iter().find(|q| q.task_type == "search").unwrap();
    let gw = Gateway::new();
    let ep = gw.configure_mock("agent", agent_script());
    let err = run_workflow(&WorkflowSpec::builtin("recommendation").unwrap(), q, None, &gw, &ep).unwrap_err();
    assert!(matches!(err, WorkflowError::ScenarioMismatch { .. }));
    assert_eq!(gw.total_requests(), 0);
}

#[test]
fn missing_credentials_abort_workflows() {
    let gw = Gateway::new();
    let ep = localeval::gateway::EndpointConfig {
        auth_env: Some("LOCALEVAL_TEST_WORKFLOW_KEY_UNSET".into()),
        ..localeval::gateway::EndpointConfig::remote("r", "http://127.0.0.1:9/v1", "m")
    };
    let err = run_workflows(&gw, &ep, composite(), None, &WorkflowOptions::default()).unwrap_err();
    assert!(err.to_string().contains("LOCALEVAL_TEST_WORKFLOW_KEY_UNSET"), "{err}");
}

#[test]
fn flywheel_keeps_correct_complete_traces() {
    let b = composite();
    let gw = Gateway::new();
    let ep = gw.configure_mock("agent", agent_script());
    let batch = run_workflows(&gw, &ep, b, Some(fixture_bundle()), &WorkflowOptions::default()).unwrap();
    let n_correct = batch.traces.iter().filter(|t| t.correct).count();
    assert!(n_correct > 0 && n_correct < batch.traces.len());

    let (ds, report) = flywheel_dataset(&batch.traces, b, FlywheelConfig::default(), 3);
    assert_eq!(report.converted, n_correct);
    assert_eq!(report.excluded_incorrect, batch.traces.len() - n_correct);
    for (pair, t) in ds.pairs.iter().zip(batch.traces.iter().filter(|t| t.correct)) {
        assert_eq!(pair.provenance.agent, Agent::Flywheel);
        let mut at = 0;
        for s in &t.steps {
            at += pair.output[at..].find(s.response.trim()).expect("step text in order");
        }
        assert!(pair.output.ends_with(&format!("Answer: {}", letter(b.question(&t.question_id).unwrap().correct_index))));
        assert!(pair.instruction.contains(&b.question(&t.question_id).unwrap().stem));
    }

    let (all, r2) = flywheel_dataset(&batch.traces, b, FlywheelConfig { include_incorrect: true }, 3);
    assert_eq!(all.pairs.len(), batch.traces.len());
    assert_eq!(r2.excluded_incorrect, 0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flywheel.jsonl");
    export_training_file(&ds, &path, &ManifestContext::default()).unwrap();
    assert_eq!(read_training_file(&path).unwrap(), ds.pairs);

    let back = parse_traces_jsonl(&batch.traces_jsonl()).unwrap();
    assert_eq!(back, batch.traces);
}

#[test]
fn workflow_and_direct_rates_match_script() {
    let b = composite();
    let strategy = PromptStrategy::zero_shot();
    // Direct answers: correct on every third question in benchmark order.
    let order: BTreeMap<&str, usize> = b.questions.iter().enumerate().map(|(i, q)| (q.question_id.as_str(), i)).collect();
    let mut script = oracle_script(b);
    for (q, (req, _)) in b.questions.iter().zip(build_requests(b, &strategy, None, 0).unwrap()) {
        let right = order[q.question_id.as_str()] % 3 == 0;
        let idx = if right { q.correct_index } else { (q.correct_index + 1) % q.options.len() };
        script.insert(&req, letter(idx).to_string());
    }
    let gw = Gateway::new();
    let ep = gw.configure_mock("scripted", script);

    let direct = score_run(&evaluate_model(&gw, b, &ep, &strategy, None, 4, 0).unwrap(), b).unwrap();
    let expected_direct = b.questions.len().div_ceil(3) as f64 / b.questions.len() as f64 * 100.0;
    let direct_all: f64 = direct.tasks.values().map(|t| t.correct).sum::<usize>() as f64 / b.questions.len() as f64 * 100.0;
    assert_eq!(direct_all, expected_direct);

    let batch = run_workflows(&gw, &ep, b, None, &WorkflowOptions::default()).unwrap();
    for (id, s) in &batch.summaries {
        assert_eq!(s.accuracy, 100.0, "{id}");
        assert_eq!(direct.tasks[id.as_str()].total, s.questions);
    }
}

#[test]
fn similar_profile_stats_count_peers() {
    let bundle = fixture_bundle();
    let user = bundle.users.iter().next().unwrap();
    let stats = similar_profile_stats(bundle, &user.user_id, 2).unwrap();
    let peers: Vec<_> = bundle
        .users
        .iter()
        .filter(|u| {
            u.user_id != user.user_id
                && u.city == user.city
                && user.profile.iter().filter(|(k, v)| u.profile.get(*k).is_some_and(|w| w.eq_ignore_ascii_case(v))).count() >= 2
        })
        .collect();
    assert_eq!(stats.similar_users, peers.len());
    let n: usize = peers.iter().map(|p| bundle.interactions_of_user(&p.user_id).len()).sum();
    assert_eq!(stats.interactions, n);
    assert_eq!(stats.actions.values().sum::<usize>(), n);
    assert!(stats.top_categories.windows(2).all(|w| w[0].1 >= w[1].1));
    assert!(similar_profile_stats(bundle, "nobody", 2).is_none());
}

// ---- appliers

fn fixed(text: &'static str) -> MockScript {
    MockScript::responder(move |_, _| MockReply::Text(text.into()))
}

#[test]
fn function_tags_parse_truncate_dedup() {
    let m = fixture_bundle().merchants.iter().next().unwrap();
    let gw = Gateway::new();
    let ep = gw.configure_mock("t", fixed("suitable for family outing; group dining"));
    let r = generate_function_tags(m, &gw, &ep).unwrap();
    assert_eq!(r.ok().unwrap().tags, vec!["suitable for family outing", "group dining"]);

    let fifteen: String = (1..=15).map(|i| format!("tag {i}")).collect::<Vec<_>>().join("; ");
    let ep = gw.configure_mock("t15", MockScript::responder(move |_, _| MockReply::Text(fifteen.clone())));
    let r = generate_function_tags(m, &gw, &ep).unwrap();
    let set = r.ok().unwrap();
    assert_eq!(set.tags.len(), 10);
    assert_eq!(set.truncated_from, Some(15));

    let ep = gw.configure_mock("dup", fixed("group dining; Group dining; quiet"));
    assert_eq!(generate_function_tags(m, &gw, &ep).unwrap().ok().unwrap().tags, vec!["group dining", "quiet"]);

    let before = gw.total_requests();
    let ep = gw.configure_mock("bad", fixed(" ; ; "));
    let merchants: Vec<_> = fixture_bundle().merchants.iter().take(3).collect();
    let out = generate_function_tags_batch(&merchants, &gw, &ep, 2).unwrap();
    assert_eq!(out.len(), 3);
    for r in &out {
        assert_eq!(r.failure().unwrap().attempts, APPLY_MAX_ATTEMPTS);
    }
    assert_eq!(gw.total_requests() - before, 3 * APPLY_MAX_ATTEMPTS as usize);
}

#[test]
fn query_suggestions_with_prefixes() {
    let item = QueryItem::from_merchant(fixture_bundle().merchants.iter().next().unwrap());
    let gw = Gateway::new();
    let ep = gw.configure_mock("q", fixed("ketoconazole ointment\nketo diet plan"));
    let set = generate_query_suggestions(&item, &gw, &ep).unwrap().ok().unwrap().clone();
    let got: Vec<(&str, &str)> = set.suggestions.iter().map(|s| (s.query.as_str(), s.prefix.as_str())).collect();
    assert_eq!(got, vec![("ketoconazole ointment", "ketoc"), ("keto diet plan", "keto ")]);

    let ep = gw.configure_mock("one", fixed("hotpot"));
    let set = generate_query_suggestions(&item, &gw, &ep).unwrap();
    assert_eq!(set.ok().unwrap().suggestions[0].prefix, "h");

    let ep = gw.configure_mock("dups", fixed("spa day\nSpa  day\nspa night"));
    let set = generate_query_suggestions(&item, &gw, &ep).unwrap();
    let got: Vec<(&str, &str)> = set.ok().unwrap().suggestions.iter().map(|s| (s.query.as_str(), s.prefix.as_str())).collect();
    assert_eq!(got, vec![("spa day", "spa d"), ("spa night", "spa n")]);

    let ep = gw.configure_mock("empty", fixed("\n \n"));
    assert!(generate_query_suggestions(&item, &gw, &ep).unwrap().failure().is_some());
}

#[test]
fn review_scorecards_validate() {
    let review = fixture_bundle().reviews.iter().next().unwrap();
    let gw = Gateway::new();
    let full = "in_depth_content: 4\nactionable_suggestions: 3\nnatural_expression: 5\ncredible_engaging_language: 2\nnon_promotional: 1\nnon_ai_generated: 0\noverall_usefulness: 4";
    let ep = gw.configure_mock("ok", fixed(full));
    let card = score_review_dimensions(review, &gw, &ep).unwrap();
    assert_eq!(card.ok().unwrap().scores(), [4, 3, 5, 2, 1, 0, 4]);

    let six = "in_depth_content: 4\nactionable_suggestions: 3\nnatural_expression: 5\ncredible_engaging_language: 2\nnon_promotional: 1\nnon_ai_generated: 0";
    let before = gw.total_requests();
    let ep = gw.configure_mock("six", fixed(six));
    let r = score_review_dimensions(review, &gw, &ep).unwrap();
    assert!(r.failure().unwrap().error.contains("overall_usefulness"));
    assert_eq!(gw.total_requests() - before, APPLY_MAX_ATTEMPTS as usize);

    let nine = "in_depth_content: 9\nactionable_suggestions: 3\nnatural_expression: 5\ncredible_engaging_language: 2\nnon_promotional: 1\nnon_ai_generated: 0\noverall_usefulness: 4";
    let ep = gw.configure_mock("nine", fixed(nine));
    assert!(score_review_dimensions(review, &gw, &ep).unwrap().failure().unwrap().error.contains("in_depth_content"));

    // second attempt fixes it
    let ep = gw.configure_mock(
        "retry",
        MockScript::responder(move |req, _| {
            let attempt2 = req.last_user_content().contains("Attempt: 2");
            MockReply::Text(if attempt2 { full.into() } else { six.into() })
        }),
    );
    let r = score_review_dimensions(review, &gw, &ep).unwrap();
    assert_eq!(r.ok().unwrap().attempts, 2);
}

#[test]
fn appliers_over_fixture_with_agent_mock() {
    let b = fixture_bundle();
    let gw = Gateway::new();
    let ep = gw.configure_mock("agent", agent_script());
    let merchants: Vec<_> = b.merchants.iter().take(20).collect();
    let tags = generate_function_tags_batch(&merchants, &gw, &ep, 4).unwrap();
    assert!(tags.iter().all(|r| r.ok().is_some_and(|t| (1..=10).contains(&t.tags.len()))));
    let items: Vec<_> = merchants.iter().map(|m| QueryItem::from_merchant(m)).collect();
    let qs = generate_query_suggestions_batch(&items, &gw, &ep, 4).unwrap();
    assert!(qs.iter().all(|r| r.ok().is_some()));
    let reviews: Vec<_> = b.reviews.iter().take(20).collect();
    let cards = score_review_dimensions_batch(&reviews, &gw, &ep, 4).unwrap();
    assert!(cards.iter().all(|r| r.ok().is_some()));
    let text = records_jsonl(&cards);
    assert_eq!(text.lines().count(), 20);
    let back: Vec<ApplyRecord<ReviewScoreCard>> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back, cards);
    assert_eq!(summarize_records(&cards, 20).ok, 20);
}
