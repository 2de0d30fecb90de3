//! Expert-agent workflows over composite questions, the data flywheel that
//! turns their traces into training pairs, and the batch appliers.

mod apply;
mod flywheel;
mod profile;
mod run;
mod spec;

use thiserror::Error;

use crate::gateway::GatewayError;

pub use apply::*;
pub use flywheel::*;
pub use profile::*;
pub use run::*;
pub use spec::*;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("unknown workflow `{0}` (recommendation, search, content_marketing)")]
    UnknownWorkflow(String),
    #[error("invalid workflow spec: {0}")]
    InvalidSpec(String),
    #[error("question {question_id} is not a `{workflow_id}` composite question")]
    ScenarioMismatch { question_id: String, workflow_id: String },
    #[error("cannot convert trace: {0}")]
    InvalidTrace(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0}")]
    Parse(String),
}
