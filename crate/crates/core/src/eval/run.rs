//! Running an endpoint over a benchmark.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use super::parse::{letter, parse_answer, Parsed};
use super::strategy::{render_prompt, select_exemplars, PromptStrategy, StrategyKind};
use super::EvalError;
use crate::benchmark::{BenchmarkFile, BenchmarkQuestion};
use crate::gateway::{ChatRequest, EndpointConfig, EndpointKind, Gateway, GatewayError, MockScript};

/// Share of transport failures above which a run is marked degraded.
pub const DEGRADED_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelAnswer {
    pub question_id: String,
    pub raw_text: String,
    pub parsed: Parsed,
    pub correct: bool,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exemplar_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub questions: usize,
    pub correct: usize,
    pub unparsed: usize,
    pub transport_failures: usize,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRun {
    pub endpoint_id: String,
    pub model_name: String,
    pub benchmark_id: String,
    pub benchmark_version: String,
    pub city: String,
    pub strategy: PromptStrategy,
    pub seed: u64,
    /// RFC 3339 wall-clock times; absent for mock endpoints so that mock runs
    /// are byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    pub summary: RunSummary,
    pub answers: Vec<ModelAnswer>,
}

impl ModelRun {
    /// `endpoint_id` plus the strategy label, e.g. `gpt-4o/zero_shot`.
    pub fn label(&self) -> String {
        format!("{}/{}", self.endpoint_id, self.strategy.label())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let run: ModelRun = serde_json::from_str(text).map_err(|e| EvalError::Parse(e.to_string()))?;
        if run.answers.len() != run.summary.questions {
            return Err(EvalError::Parse(format!(
                "run has {} answers but its summary counts {} questions",
                run.answers.len(),
                run.summary.questions
            )));
        }
        Ok(run)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_json(&text)
    }
}

fn summarize(answers: &[ModelAnswer]) -> RunSummary {
    let questions = answers.len();
    let transport_failures = answers.iter().filter(|a| a.error.is_some()).count();
    RunSummary {
        questions,
        correct: answers.iter().filter(|a| a.correct).count(),
        unparsed: answers.iter().filter(|a| a.parsed == Parsed::Unparsed).count(),
        transport_failures,
        degraded: questions > 0 && transport_failures as f64 > DEGRADED_SHARE * questions as f64,
    }
}

fn now() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_default()
}

/// Requests for every question in benchmark order, with the exemplar ids
/// each one embeds.
pub fn build_requests(
    benchmark: &BenchmarkFile,
    strategy: &PromptStrategy,
    pool: Option<&BenchmarkFile>,
    seed: u64,
) -> Result<Vec<(ChatRequest, Vec<String>)>, EvalError> {
    strategy.validate()?;
    let eval: Vec<&BenchmarkQuestion> = benchmark.questions.iter().collect();
    let mut out = Vec::with_capacity(eval.len());
    for q in &eval {
        let exemplars = if strategy.kind == StrategyKind::KShot {
            let pool = pool.ok_or_else(|| EvalError::InvalidStrategy("k_shot needs an exemplar pool".into()))?;
            select_exemplars(pool, &eval, q, strategy.k, seed)?
        } else {
            Vec::new()
        };
        let request = render_prompt(q, strategy, &exemplars, seed)?;
        out.push((request, exemplars.iter().map(|e| e.question_id.clone()).collect()));
    }
    let eval_ids: BTreeSet<&str> = eval.iter().map(|q| q.question_id.as_str()).collect();
    let leaked: BTreeSet<String> = out
        .iter()
        .flat_map(|(_, ids): &(ChatRequest, Vec<String>)| ids.iter())
        .filter(|id| eval_ids.contains(id.as_str()))
        .cloned()
        .collect();
    if !leaked.is_empty() {
        return Err(EvalError::ExemplarLeak { ids: leaked.into_iter().collect() });
    }
    Ok(out)
}

/// Ask `endpoint` every question of `benchmark` once.
///
/// Transport failures become `Unparsed` answers carrying the error; only
/// configuration problems (missing credentials, unknown mock) abort the run.
pub fn evaluate_model(
    gateway: &Gateway,
    benchmark: &BenchmarkFile,
    endpoint: &EndpointConfig,
    strategy: &PromptStrategy,
    pool: Option<&BenchmarkFile>,
    max_parallel: usize,
    seed: u64,
) -> Result<ModelRun, EvalError> {
    let mock = endpoint.kind == EndpointKind::Mock;
    let started_at = (!mock).then(now);
    let requests = build_requests(benchmark, strategy, pool, seed)?;
    let plain: Vec<ChatRequest> = requests.iter().map(|(r, _)| r.clone()).collect();
    let responses = if plain.is_empty() {
        Vec::new()
    } else {
        match gateway.complete_batch(&plain, endpoint, max_parallel) {
            Ok(r) => r,
            Err(GatewayError::BatchFailed { failures }) => {
                failures.into_iter().map(|(_, m)| Err(GatewayError::InvalidRequest(m))).collect()
            }
            Err(e) => return Err(EvalError::Gateway(e)),
        }
    };
    let mut answers = Vec::with_capacity(benchmark.questions.len());
    for ((q, (_, exemplar_ids)), response) in benchmark.questions.iter().zip(requests).zip(responses) {
        let answer = match response {
            Ok(r) => {
                let parsed = parse_answer(&r.text, &q.options);
                ModelAnswer {
                    question_id: q.question_id.clone(),
                    correct: parsed == Parsed::Index(q.correct_index),
                    raw_text: r.text,
                    parsed,
                    latency_ms: r.latency_ms,
                    error: None,
                    exemplar_ids,
                }
            }
            Err(e) if e.is_configuration() => return Err(EvalError::Gateway(e)),
            Err(e) => ModelAnswer {
                question_id: q.question_id.clone(),
                raw_text: String::new(),
                parsed: Parsed::Unparsed,
                correct: false,
                latency_ms: 0,
                error: Some(e.to_string()),
                exemplar_ids,
            },
        };
        answers.push(answer);
    }
    let summary = summarize(&answers);
    if summary.degraded {
        log::warn!(
            "{}: {} of {} requests failed in transport; run marked degraded",
            endpoint.endpoint_id,
            summary.transport_failures,
            summary.questions
        );
    }
    Ok(ModelRun {
        endpoint_id: endpoint.endpoint_id.clone(),
        model_name: endpoint.model_name.clone(),
        benchmark_id: benchmark.benchmark_id(),
        benchmark_version: benchmark.version.clone(),
        city: benchmark.city.clone(),
        strategy: strategy.clone(),
        seed,
        started_at,
        finished_at: (!mock).then(now),
        summary,
        answers,
    })
}

/// Mock script that answers each question of `benchmark` correctly when
/// `correct(question)` holds and with the next letter otherwise. The
/// fixtures are keyed by the exact requests [`evaluate_model`] sends.
pub fn scripted_script(
    benchmark: &BenchmarkFile,
    strategy: &PromptStrategy,
    pool: Option<&BenchmarkFile>,
    seed: u64,
    correct: impl Fn(&BenchmarkQuestion) -> bool,
) -> Result<MockScript, EvalError> {
    let mut script = MockScript::default();
    for (q, (request, _)) in benchmark.questions.iter().zip(build_requests(benchmark, strategy, pool, seed)?) {
        let idx = if correct(q) { q.correct_index } else { (q.correct_index + 1) % q.options.len() };
        script.insert(&request, letter(idx).to_string());
    }
    Ok(script)
}

/// Replace selected answers with `Unparsed` (used to probe scoring).
pub fn mark_unparsed(run: &ModelRun, ids: &BTreeSet<String>) -> ModelRun {
    let mut out = run.clone();
    for a in &mut out.answers {
        if ids.contains(&a.question_id) {
            a.parsed = Parsed::Unparsed;
            a.correct = false;
        }
    }
    out.summary = summarize(&out.answers);
    out
}
