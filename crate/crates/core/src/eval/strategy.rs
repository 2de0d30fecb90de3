//! Prompt rendering for the evaluation protocol and its prompting variants.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::parse::{letter, letter_list};
use super::EvalError;
use crate::benchmark::{BenchmarkFile, BenchmarkQuestion};
use crate::gateway::{ChatMessage, ChatRequest};
use crate::prompts::{fill, EvalPrompts, PromptCatalog};
use crate::rng::{derive_seed, SplitMix64};

pub const ANSWER_MAX_TOKENS: u32 = 64;
pub const COT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    ZeroShot,
    RolePlay,
    Cot,
    KShot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptStrategy {
    pub kind: StrategyKind,
    /// Exemplars per question (`k_shot` only).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub k: usize,
    /// System text for `role_play`; the catalog default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    /// Where `k_shot` exemplars come from (a benchmark file path or id).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplar_pool: Option<String>,
}

fn is_zero(k: &usize) -> bool {
    *k == 0
}

impl PromptStrategy {
    pub fn zero_shot() -> Self {
        Self { kind: StrategyKind::ZeroShot, k: 0, role: None, exemplar_pool: None }
    }

    pub fn role_play(role: Option<String>) -> Self {
        Self { kind: StrategyKind::RolePlay, role, ..Self::zero_shot() }
    }

    pub fn cot() -> Self {
        Self { kind: StrategyKind::Cot, ..Self::zero_shot() }
    }

    pub fn k_shot(k: usize, pool: impl Into<String>) -> Self {
        Self { kind: StrategyKind::KShot, k, exemplar_pool: Some(pool.into()), ..Self::zero_shot() }
    }

    /// `zero_shot`, `role_play`, `cot` or `5_shot`.
    pub fn label(&self) -> String {
        match self.kind {
            StrategyKind::ZeroShot => "zero_shot".into(),
            StrategyKind::RolePlay => "role_play".into(),
            StrategyKind::Cot => "cot".into(),
            StrategyKind::KShot => format!("{}_shot", self.k),
        }
    }

    /// Parse `zero_shot`, `role_play`, `cot` or `<k>_shot`.
    pub fn from_label(label: &str) -> Result<Self, EvalError> {
        match label {
            "zero_shot" | "zero-shot" => Ok(Self::zero_shot()),
            "role_play" | "role-play" => Ok(Self::role_play(None)),
            "cot" => Ok(Self::cot()),
            other => {
                let k = other
                    .strip_suffix("_shot")
                    .or_else(|| other.strip_suffix("-shot"))
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| EvalError::InvalidStrategy(format!("unknown strategy `{other}`")))?;
                let mut s = Self::k_shot(k, "");
                s.exemplar_pool = None;
                s.validate()?;
                Ok(s)
            }
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        match self.kind {
            StrategyKind::KShot if self.k == 0 => {
                Err(EvalError::InvalidStrategy("k_shot needs k >= 1".into()))
            }
            StrategyKind::KShot => Ok(()),
            _ if self.k != 0 => Err(EvalError::InvalidStrategy(format!("k is only valid for k_shot, got {}", self.k))),
            StrategyKind::RolePlay => match &self.role {
                Some(r) if r.trim().is_empty() => Err(EvalError::InvalidStrategy("role text is empty".into())),
                _ => Ok(()),
            },
            _ if self.role.is_some() => Err(EvalError::InvalidStrategy("role is only valid for role_play".into())),
            _ => Ok(()),
        }
    }

    pub fn max_output_tokens(&self) -> u32 {
        if self.kind == StrategyKind::Cot {
            COT_MAX_TOKENS
        } else {
            ANSWER_MAX_TOKENS
        }
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Question stem followed by the lettered options.
pub fn question_block(p: &EvalPrompts, q: &BenchmarkQuestion) -> String {
    let mut out = format!("{}{}", p.question_prefix, q.stem);
    for (i, o) in q.options.iter().enumerate() {
        out.push_str(&format!("\n{}. {}", letter(i), o));
    }
    out
}

fn same_question(a: &BenchmarkQuestion, b: &BenchmarkQuestion) -> bool {
    a.question_id == b.question_id || (a.task_type == b.task_type && a.stem == b.stem)
}

/// Render one evaluation request with the built-in prompt catalog.
pub fn render_prompt(
    question: &BenchmarkQuestion,
    strategy: &PromptStrategy,
    exemplars: &[&BenchmarkQuestion],
    seed: u64,
) -> Result<ChatRequest, EvalError> {
    render_prompt_with(PromptCatalog::builtin(), question, strategy, exemplars, seed)
}

pub fn render_prompt_with(
    catalog: &PromptCatalog,
    question: &BenchmarkQuestion,
    strategy: &PromptStrategy,
    exemplars: &[&BenchmarkQuestion],
    seed: u64,
) -> Result<ChatRequest, EvalError> {
    strategy.validate()?;
    let p = &catalog.eval;
    let letters = letter_list(question.options.len());
    let mut messages = Vec::new();
    if strategy.kind == StrategyKind::RolePlay {
        messages.push(ChatMessage::system(strategy.role.clone().unwrap_or_else(|| p.default_role.clone())));
    }
    let mut body = String::new();
    if strategy.kind == StrategyKind::KShot {
        if exemplars.len() != strategy.k {
            return Err(EvalError::InvalidStrategy(format!(
                "{}: expected {} exemplars, got {}",
                question.question_id,
                strategy.k,
                exemplars.len()
            )));
        }
        for e in exemplars {
            if same_question(e, question) {
                return Err(EvalError::ExemplarLeak { ids: vec![e.question_id.clone()] });
            }
            if e.task_type != question.task_type {
                return Err(EvalError::InvalidStrategy(format!(
                    "exemplar {} is a {} question, target is {}",
                    e.question_id, e.task_type, question.task_type
                )));
            }
        }
        let mut order: Vec<&BenchmarkQuestion> = exemplars.to_vec();
        SplitMix64::new(derive_seed(seed, &format!("exemplars|{}", question.question_id))).shuffle(&mut order);
        for e in order {
            body.push_str(&question_block(p, e));
            body.push_str(&format!("\n{}{}\n\n", p.exemplar_answer_prefix, letter(e.correct_index)));
        }
    } else if !exemplars.is_empty() {
        return Err(EvalError::InvalidStrategy(format!("{} takes no exemplars", strategy.label())));
    }
    body.push_str(&question_block(p, question));
    body.push_str("\n\n");
    if strategy.kind == StrategyKind::Cot {
        body.push_str(&fill(&p.cot_directive, &[("letters", &letters)]));
    } else {
        body.push_str(&fill(&p.format_instruction, &[("letters", &letters)]));
    }
    messages.push(ChatMessage::user(body));
    Ok(ChatRequest::new(messages, strategy.max_output_tokens())
        .with_tag(format!("eval.{}", strategy.label())))
}

/// Per-question exemplar choice for `k_shot`.
///
/// Candidates are pool questions of the same task type that do not coincide
/// with any evaluated question (same id, or same task and stem). `k` of them
/// are drawn with a seed derived from the target question id.
pub fn select_exemplars<'p>(
    pool: &'p BenchmarkFile,
    eval: &[&BenchmarkQuestion],
    target: &BenchmarkQuestion,
    k: usize,
    seed: u64,
) -> Result<Vec<&'p BenchmarkQuestion>, EvalError> {
    let ids: BTreeSet<&str> = eval.iter().map(|q| q.question_id.as_str()).collect();
    let stems: BTreeSet<(&str, &str)> = eval.iter().map(|q| (q.task_type.as_str(), q.stem.as_str())).collect();
    let candidates: Vec<&BenchmarkQuestion> = pool
        .questions
        .iter()
        .filter(|q| q.task_type == target.task_type)
        .filter(|q| !ids.contains(q.question_id.as_str()) && !stems.contains(&(q.task_type.as_str(), q.stem.as_str())))
        .collect();
    if candidates.len() < k {
        return Err(EvalError::InsufficientExemplars {
            task: target.task_type.clone(),
            needed: k,
            available: candidates.len(),
        });
    }
    let mut rng = SplitMix64::new(derive_seed(seed, &format!("pool|{}", target.question_id)));
    Ok(rng.sample_indices(candidates.len(), k).into_iter().map(|i| candidates[i]).collect())
}
