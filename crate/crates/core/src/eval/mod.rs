//! Multiple-choice evaluation: prompting, answer extraction, scoring,
//! ranking, correlation analysis and reports.

mod correlation;
mod parse;
mod report;
mod run;
mod score;
mod strategy;
mod table1;

use thiserror::Error;

use crate::gateway::GatewayError;

pub use correlation::*;
pub use parse::*;
pub use report::*;
pub use run::*;
pub use score::*;
pub use strategy::*;
pub use table1::*;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("invalid prompt strategy: {0}")]
    InvalidStrategy(String),
    #[error("exemplars overlap the evaluated questions: {}", ids.join(", "))]
    ExemplarLeak { ids: Vec<String> },
    #[error("task {task}: need {needed} exemplars, pool has {available}")]
    InsufficientExemplars { task: String, needed: usize, available: usize },
    #[error("run was made on a different benchmark: run {run}, benchmark {benchmark}")]
    VersionMismatch { run: String, benchmark: String },
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0}")]
    Parse(String),
}
