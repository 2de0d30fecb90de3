//! Workflow step plans.

use serde::{Deserialize, Serialize};

use super::WorkflowError;
use crate::prompts::PromptCatalog;

pub const WORKFLOW_IDS: [&str; 3] = ["recommendation", "search", "content_marketing"];

/// Required step names per workflow, in execution order.
pub fn required_steps(workflow_id: &str) -> Option<&'static [&'static str]> {
    match workflow_id {
        "recommendation" => {
            Some(&["similar_profile_patterns", "behavior_sequence_preference", "context_adjustment", "prediction"])
        }
        "search" => Some(&["similar_profile_patterns", "query_intent_analysis", "context_adjustment", "click_prediction"]),
        "content_marketing" => {
            Some(&["similar_profile_preferences", "topic_sentiment_parsing", "quality_evaluation", "final_choice"])
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    pub name: String,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowSpec {
    pub workflow_id: String,
    pub system: String,
    pub steps: Vec<StepSpec>,
}

impl WorkflowSpec {
    /// Spec for `workflow_id` from `catalog`, checked against the fixed step
    /// order. A catalog may reword instructions but not reorder, rename,
    /// add or drop steps.
    pub fn from_catalog(catalog: &PromptCatalog, workflow_id: &str) -> Result<Self, WorkflowError> {
        let required = required_steps(workflow_id).ok_or_else(|| WorkflowError::UnknownWorkflow(workflow_id.into()))?;
        let prompts = catalog
            .workflows
            .get(workflow_id)
            .ok_or_else(|| WorkflowError::InvalidSpec(format!("prompt catalog has no `{workflow_id}` workflow")))?;
        let names: Vec<&str> = prompts.steps.iter().map(|s| s.name.as_str()).collect();
        if names != required {
            return Err(WorkflowError::InvalidSpec(format!(
                "{workflow_id}: steps {names:?} differ from the required order {required:?}"
            )));
        }
        if let Some(s) = prompts.steps.iter().find(|s| s.instruction.trim().is_empty()) {
            return Err(WorkflowError::InvalidSpec(format!("{workflow_id}: step `{}` has no instruction", s.name)));
        }
        Ok(Self {
            workflow_id: workflow_id.into(),
            system: prompts.system.clone(),
            steps: prompts.steps.iter().map(|s| StepSpec { name: s.name.clone(), instruction: s.instruction.clone() }).collect(),
        })
    }

    pub fn builtin(workflow_id: &str) -> Result<Self, WorkflowError> {
        Self::from_catalog(PromptCatalog::builtin(), workflow_id)
    }

    pub fn all_builtin() -> Vec<WorkflowSpec> {
        WORKFLOW_IDS.iter().map(|id| Self::builtin(id).expect("built-in workflows are valid")).collect()
    }

    pub fn step_names(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.name.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_orders() {
        for id in WORKFLOW_IDS {
            let s = WorkflowSpec::builtin(id).unwrap();
            assert_eq!(s.step_names(), required_steps(id).unwrap());
        }
        assert!(matches!(WorkflowSpec::builtin("ranking"), Err(WorkflowError::UnknownWorkflow(_))));
    }

    #[test]
    fn reordered_catalog_rejected() {
        let mut c = PromptCatalog::builtin().clone();
        c.workflows.get_mut("search").unwrap().steps.swap(1, 2);
        assert!(matches!(WorkflowSpec::from_catalog(&c, "search"), Err(WorkflowError::InvalidSpec(_))));
    }
}
