//! Turning workflow traces into training pairs.
//!
//! The instruction is the original question; the output is every step's
//! reasoning verbatim, in step order, followed by the final answer letter.

use serde::{Deserialize, Serialize};

use super::run::WorkflowTrace;
use super::WorkflowError;
use crate::benchmark::{BenchmarkFile, BenchmarkQuestion};
use crate::eval::{letter, question_block, Parsed};
use crate::prompts::PromptCatalog;
use crate::synthesis::{validate_training_value, Agent, Dataset, InstructionPair, Provenance, SynthesisMode};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlywheelConfig {
    /// Keep traces whose prediction was wrong. Off by default: only
    /// reasoning that reached the right answer is worth training on.
    pub include_incorrect: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlywheelReport {
    pub traces: usize,
    pub converted: usize,
    pub excluded_incorrect: usize,
    pub excluded_incomplete: usize,
    pub missing_questions: usize,
}

/// Training pair for one complete trace.
pub fn trace_to_instruction(trace: &WorkflowTrace, question: &BenchmarkQuestion) -> Result<InstructionPair, WorkflowError> {
    if trace.question_id != question.question_id {
        return Err(WorkflowError::InvalidTrace(format!(
            "trace is for {} but the question is {}",
            trace.question_id, question.question_id
        )));
    }
    if let Some(e) = &trace.error {
        return Err(WorkflowError::InvalidTrace(format!("{}: truncated trace ({e})", trace.question_id)));
    }
    let Parsed::Index(choice) = trace.prediction else {
        return Err(WorkflowError::InvalidTrace(format!("{}: prediction is unparsed", trace.question_id)));
    };
    if choice >= question.options.len() {
        return Err(WorkflowError::InvalidTrace(format!("{}: prediction out of range", trace.question_id)));
    }
    let mut output = String::new();
    for s in &trace.steps {
        output.push_str(&format!("[{}]\n{}\n\n", s.name, s.response.trim()));
    }
    output.push_str(&format!("Answer: {}", letter(choice)));
    let pair = InstructionPair {
        instruction: question_block(&PromptCatalog::builtin().eval, question),
        output,
        provenance: Provenance {
            mode: SynthesisMode::MultiAgent,
            agent: Agent::Flywheel,
            source_ids: vec![question.question_id.clone()],
            template_id: Some(trace.workflow_id.clone()),
            narrative_fingerprint: trace.steps.last().map(|s| s.prompt_fingerprint.clone()),
        },
    };
    validate_training_value(&serde_json::to_value(&pair).expect("pair serializes"))
        .map_err(|reason| WorkflowError::InvalidTrace(format!("{}: {reason}", trace.question_id)))
}

/// Convert a batch of traces, skipping incomplete ones and (by default)
/// wrong ones. The result exports with the ordinary training-file writer.
pub fn flywheel_dataset(
    traces: &[WorkflowTrace],
    benchmark: &BenchmarkFile,
    config: FlywheelConfig,
    seed: u64,
) -> (Dataset, FlywheelReport) {
    let mut report = FlywheelReport { traces: traces.len(), ..FlywheelReport::default() };
    let mut pairs = Vec::new();
    for t in traces {
        let Some(q) = benchmark.question(&t.question_id) else {
            report.missing_questions += 1;
            continue;
        };
        if !t.is_complete() || t.prediction == Parsed::Unparsed {
            report.excluded_incomplete += 1;
            continue;
        }
        if !t.correct && !config.include_incorrect {
            report.excluded_incorrect += 1;
            continue;
        }
        match trace_to_instruction(t, q) {
            Ok(p) => pairs.push(p),
            Err(e) => {
                log::warn!("{e}");
                report.excluded_incomplete += 1;
            }
        }
    }
    report.converted = pairs.len();
    (Dataset { mode: SynthesisMode::MultiAgent, seed, pairs }, report)
}
