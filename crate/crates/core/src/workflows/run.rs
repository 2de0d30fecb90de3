//! Executing workflows and collecting traces.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::profile::{similar_profile_stats, SimilarProfileStats, DEFAULT_MIN_SHARED};
use super::spec::WorkflowSpec;
use super::WorkflowError;
use crate::benchmark::{BenchmarkFile, BenchmarkQuestion, Category};
use crate::eval::{letter_list, parse_answer, question_block, Parsed, COT_MAX_TOKENS};
use crate::gateway::{ChatMessage, ChatRequest, EndpointConfig, Gateway};
use crate::platform::StoreBundle;
use crate::prompts::{fill, PromptCatalog};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub name: String,
    pub prompt_fingerprint: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowTrace {
    pub workflow_id: String,
    pub question_id: String,
    pub steps: Vec<StepRecord>,
    pub prediction: Parsed,
    pub correct: bool,
    pub total_tokens: u64,
    /// Set when a step failed and the trace stops there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl WorkflowTrace {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

/// The prompt for step `index` given the responses of the earlier steps.
pub fn step_request(
    spec: &WorkflowSpec,
    index: usize,
    question: &BenchmarkQuestion,
    stats: Option<&SimilarProfileStats>,
    prior: &[StepRecord],
) -> ChatRequest {
    let eval = &PromptCatalog::builtin().eval;
    let step = &spec.steps[index];
    let last = index + 1 == spec.steps.len();
    let mut body = format!("Step {} of {}: {}\n\n", index + 1, spec.steps.len(), step.instruction.trim());
    body.push_str(&question_block(eval, question));
    body.push_str("\n\n");
    if index == 0 {
        if let Some(s) = stats {
            body.push_str("Users with similar profiles:\n");
            body.push_str(&s.render());
            body.push_str("\n\n");
        }
    }
    if !prior.is_empty() {
        body.push_str("Earlier analysis:\n");
        for r in prior {
            body.push_str(&format!("[{}]\n{}\n\n", r.name, r.response.trim()));
        }
    }
    if last {
        body.push_str(&fill(&eval.cot_directive, &[("letters", &letter_list(question.options.len()))]));
    } else {
        body.push_str("Write the analysis for this step only. Do not choose an option yet.");
    }
    let input = json!({
        "workflow": spec.workflow_id,
        "question_id": question.question_id,
        "step": step.name,
        "final": last,
        "n_options": question.options.len(),
    });
    body.push_str(&format!("\nINPUT: {input}"));
    ChatRequest::new(vec![ChatMessage::system(spec.system.clone()), ChatMessage::user(body)], COT_MAX_TOKENS)
        .with_tag(format!("workflow.{}", spec.workflow_id))
}

/// Run every step of `spec` on `question`, strictly in order.
///
/// A step that still fails after the gateway's retries ends the trace: the
/// failed step is recorded with its error and the prediction is `Unparsed`.
/// Configuration errors (missing credentials, unknown mock) are returned.
pub fn run_workflow(
    spec: &WorkflowSpec,
    question: &BenchmarkQuestion,
    stats: Option<&SimilarProfileStats>,
    gateway: &Gateway,
    endpoint: &EndpointConfig,
) -> Result<WorkflowTrace, WorkflowError> {
    let task = question.task().ok_or_else(|| WorkflowError::ScenarioMismatch {
        question_id: question.question_id.clone(),
        workflow_id: spec.workflow_id.clone(),
    })?;
    if task.category != Category::Composite || task.id != spec.workflow_id {
        return Err(WorkflowError::ScenarioMismatch {
            question_id: question.question_id.clone(),
            workflow_id: spec.workflow_id.clone(),
        });
    }
    let mut steps: Vec<StepRecord> = Vec::with_capacity(spec.steps.len());
    let mut total_tokens = 0;
    let mut error = None;
    for i in 0..spec.steps.len() {
        let request = step_request(spec, i, question, stats, &steps);
        let fingerprint = request.fingerprint();
        match gateway.complete(&request, endpoint) {
            Ok(r) => {
                total_tokens += r.usage.prompt_tokens + r.usage.completion_tokens;
                steps.push(StepRecord { name: spec.steps[i].name.clone(), prompt_fingerprint: fingerprint, response: r.text, error: None });
            }
            Err(e) if e.is_configuration() => return Err(WorkflowError::Gateway(e)),
            Err(e) => {
                let msg = e.to_string();
                steps.push(StepRecord {
                    name: spec.steps[i].name.clone(),
                    prompt_fingerprint: fingerprint,
                    response: String::new(),
                    error: Some(msg.clone()),
                });
                error = Some(format!("step {} ({}) failed: {msg}", i + 1, spec.steps[i].name));
                break;
            }
        }
    }
    let prediction = match (&error, steps.last()) {
        (None, Some(last)) => parse_answer(&last.response, &question.options),
        _ => Parsed::Unparsed,
    };
    Ok(WorkflowTrace {
        workflow_id: spec.workflow_id.clone(),
        question_id: question.question_id.clone(),
        steps,
        correct: prediction == Parsed::Index(question.correct_index),
        prediction,
        total_tokens,
        error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowOptions {
    /// Workflows to run; each runs on the composite questions of its own task.
    pub workflows: Vec<String>,
    pub min_shared: usize,
    pub max_parallel: usize,
}

impl Default for WorkflowOptions {
    fn default() -> Self {
        Self {
            workflows: super::WORKFLOW_IDS.iter().map(|s| s.to_string()).collect(),
            min_shared: DEFAULT_MIN_SHARED,
            max_parallel: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkflowSummary {
    pub questions: usize,
    pub correct: usize,
    pub unparsed: usize,
    pub truncated: usize,
    pub calls: usize,
    /// Percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowBatch {
    pub benchmark_id: String,
    pub endpoint_id: String,
    pub summaries: BTreeMap<String, WorkflowSummary>,
    pub traces: Vec<WorkflowTrace>,
}

impl WorkflowBatch {
    /// One trace per line.
    pub fn traces_jsonl(&self) -> String {
        self.traces.iter().map(|t| serde_json::to_string(t).expect("trace serializes") + "\n").collect()
    }
}

pub fn parse_traces_jsonl(text: &str) -> Result<Vec<WorkflowTrace>, WorkflowError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| WorkflowError::Parse(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn load_traces(path: &Path) -> Result<Vec<WorkflowTrace>, WorkflowError> {
    let text = std::fs::read_to_string(path).map_err(|e| WorkflowError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_traces_jsonl(&text)
}

/// Run the selected workflows over the matching composite questions of
/// `benchmark`. Questions run in parallel (at most `max_parallel` at once);
/// the steps of one question never overlap. Traces come back in benchmark
/// order.
pub fn run_workflows(
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    benchmark: &BenchmarkFile,
    bundle: Option<&StoreBundle>,
    options: &WorkflowOptions,
) -> Result<WorkflowBatch, WorkflowError> {
    let specs: Vec<WorkflowSpec> = options.workflows.iter().map(|id| WorkflowSpec::builtin(id)).collect::<Result<_, _>>()?;
    let jobs: Vec<(&WorkflowSpec, &BenchmarkQuestion, Option<SimilarProfileStats>)> = benchmark
        .questions
        .iter()
        .filter_map(|q| specs.iter().find(|s| s.workflow_id == q.task_type).map(|s| (s, q)))
        .map(|(s, q)| {
            let stats = bundle
                .zip(q.construction.source_ids.first())
                .and_then(|(b, user)| similar_profile_stats(b, user, options.min_shared));
            (s, q, stats)
        })
        .collect();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<WorkflowTrace, WorkflowError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = options.max_parallel.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((spec, q, stats)) = jobs.get(i) else { break };
                let out = run_workflow(spec, q, stats.as_ref(), gateway, endpoint);
                let stop = matches!(out, Err(_));
                slots.lock().expect("slots lock")[i] = Some(out);
                if stop {
                    next.store(jobs.len(), Ordering::SeqCst);
                }
            });
        }
    });
    let mut traces = Vec::with_capacity(jobs.len());
    for slot in slots.into_inner().expect("slots lock") {
        match slot {
            Some(Ok(t)) => traces.push(t),
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    let mut summaries: BTreeMap<String, WorkflowSummary> =
        specs.iter().map(|s| (s.workflow_id.clone(), WorkflowSummary::default())).collect();
    for t in &traces {
        let s = summaries.get_mut(&t.workflow_id).expect("known workflow");
        s.questions += 1;
        s.correct += t.correct as usize;
        s.unparsed += (t.prediction == Parsed::Unparsed) as usize;
        s.truncated += (!t.is_complete()) as usize;
        s.calls += t.steps.len();
    }
    for s in summaries.values_mut() {
        s.accuracy = if s.questions == 0 { 0.0 } else { 100.0 * s.correct as f64 / s.questions as f64 };
    }
    Ok(WorkflowBatch { benchmark_id: benchmark.benchmark_id(), endpoint_id: endpoint.endpoint_id.clone(), summaries, traces })
}
