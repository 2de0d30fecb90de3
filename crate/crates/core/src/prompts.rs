//! Versioned prompt catalog shared by the synthesis agents, the evaluation
//! harness and the expert workflows.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::gateway::ChatMessage;

const BUILTIN: &str = include_str!("../assets/prompts.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
}

impl PromptPair {
    /// System and user messages with every `{{key}}` slot filled.
    pub fn render(&self, vars: &[(&str, &str)]) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system(fill(&self.system, vars)),
            ChatMessage::user(fill(self.user.trim(), vars)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisPrompts {
    pub template: PromptPair,
    pub merchant: PromptPair,
    pub user: PromptPair,
    pub interaction: PromptPair,
    pub instruction: PromptPair,
    pub direct: PromptPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalPrompts {
    pub question_prefix: String,
    pub format_instruction: String,
    pub cot_directive: String,
    pub default_role: String,
    pub exemplar_answer_prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepPrompt {
    pub name: String,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowPrompts {
    pub system: String,
    pub steps: Vec<StepPrompt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplyPrompts {
    pub tags: PromptPair,
    pub queries: PromptPair,
    pub review: PromptPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptCatalog {
    pub version: String,
    pub synthesis: SynthesisPrompts,
    pub eval: EvalPrompts,
    pub workflows: BTreeMap<String, WorkflowPrompts>,
    pub apply: ApplyPrompts,
}

impl PromptCatalog {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// The catalog compiled into the library.
    pub fn builtin() -> &'static PromptCatalog {
        static CATALOG: OnceLock<PromptCatalog> = OnceLock::new();
        CATALOG.get_or_init(|| PromptCatalog::parse(BUILTIN).expect("built-in prompt catalog parses"))
    }

    pub fn builtin_text() -> &'static str {
        BUILTIN
    }
}

/// Replace every `{{key}}` in `text`. Unknown slots are left as they are.
pub fn fill(text: &str, vars: &[(&str, &str)]) -> String {
    let mut out = text.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

/// Structured input carried on the last `INPUT:` line of a prompt.
pub fn input_of(prompt: &str) -> Option<serde_json::Value> {
    prompt
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix("INPUT: "))
        .and_then(|json| serde_json::from_str(json).ok())
}
