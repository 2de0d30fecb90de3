//! Exit codes and the error type every command returns.

use std::fmt;

use serde_json::Value;

use localeval::benchmark::BenchmarkError;
use localeval::eval::{CorrelationError, EvalError};
use localeval::gateway::GatewayError;
use localeval::platform::IngestError;
use localeval::synthesis::{ExportError, SynthesisError};
use localeval::workflows::WorkflowError;

/// Process exit codes. These values are part of the interface and do not
/// change between versions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Usage = 1,
    Data = 2,
    Endpoint = 3,
    Internal = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
    /// Printed on stdout even though the command failed, e.g. a table
    /// verification whose rows did not all pass.
    pub summary: Option<Value>,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        Self { status: ExitStatus::Usage, message: m.into(), summary: None }
    }
    pub fn data(m: impl Into<String>) -> Self {
        Self { status: ExitStatus::Data, message: m.into(), summary: None }
    }
    pub fn endpoint(m: impl Into<String>) -> Self {
        Self { status: ExitStatus::Endpoint, message: m.into(), summary: None }
    }
    pub fn with_summary(mut self, summary: Value) -> Self {
        self.summary = Some(summary);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        Self::endpoint(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Gateway(g) => g.into(),
            other => Self::data(other.to_string()),
        }
    }
}

impl From<WorkflowError> for CliError {
    fn from(e: WorkflowError) -> Self {
        match e {
            WorkflowError::Gateway(g) => g.into(),
            other => Self::data(other.to_string()),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Gateway(g) => g.into(),
            other => Self::data(other.to_string()),
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::data(e.to_string())
            }
        }
    )*};
}

data_errors!(BenchmarkError, IngestError, ExportError, CorrelationError);
