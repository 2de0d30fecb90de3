//! TOML run configuration.
//!
//! Unknown keys are a usage error (exit 1) listing every offending path.
//! Values that parse but break an invariant are a data error (exit 2).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use localeval::benchmark::{BuildOptions, DistanceBuckets, QCConfig};
use localeval::gateway::{EndpointConfig, EndpointKind, RetryPolicy};
use localeval::platform::Hemisphere;
use localeval::synthesis::{Budget, SynthesisMode};
use localeval::workflows::{DEFAULT_MIN_SHARED, WORKFLOW_IDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub city: Option<String>,
    /// Refuse QC thresholds below the floor values.
    pub strict: bool,
    pub paths: Paths,
    pub ingest: IngestSection,
    pub qc: QCConfig,
    pub benchmark: BenchmarkSection,
    pub synthesis: SynthesisSection,
    pub eval: EvalSection,
    pub workflow: WorkflowSection,
    pub apply: ApplySection,
    pub endpoints: Vec<EndpointSection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            city: None,
            strict: false,
            paths: Paths::default(),
            ingest: IngestSection::default(),
            qc: QCConfig::default(),
            benchmark: BenchmarkSection::default(),
            synthesis: SynthesisSection::default(),
            eval: EvalSection::default(),
            workflow: WorkflowSection::default(),
            apply: ApplySection::default(),
            endpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Canonical store directory written by `ingest` and read by the rest.
    pub stores: Option<PathBuf>,
    pub output: PathBuf,
    pub denylist: Option<PathBuf>,
    /// Append-only JSONL log of every LLM call.
    pub call_log: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self { stores: None, output: PathBuf::from("out"), denylist: None, call_log: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    pub utc_offset_minutes: Option<i32>,
    pub hemisphere: Hemisphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSection {
    pub questions_per_task: usize,
    pub group_attribute: String,
    pub tasks: Vec<String>,
    pub distance_edges_m: Vec<f64>,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        let d = BuildOptions::default();
        Self {
            questions_per_task: d.questions_per_task,
            group_attribute: d.group_attribute,
            tasks: d.tasks,
            distance_edges_m: d.distance_buckets.edges_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisSection {
    pub mode: SynthesisMode,
    pub n_merchants: usize,
    pub n_users: usize,
    pub n_interactions: usize,
    pub target_pairs: Option<usize>,
    pub max_parallel: usize,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        Self {
            mode: SynthesisMode::MultiAgent,
            n_merchants: 50,
            n_users: 100,
            n_interactions: 500,
            target_pairs: None,
            max_parallel: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// `zero_shot`, `role_play`, `cot` or `<k>_shot`.
    pub strategy: String,
    pub role: Option<String>,
    /// Benchmark file the k-shot exemplars are drawn from.
    pub pool: Option<PathBuf>,
    pub max_parallel: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { strategy: "zero_shot".into(), role: None, pool: None, max_parallel: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkflowSection {
    pub workflows: Vec<String>,
    pub min_shared: usize,
    pub include_incorrect: bool,
    pub max_parallel: usize,
}

impl Default for WorkflowSection {
    fn default() -> Self {
        Self {
            workflows: WORKFLOW_IDS.iter().map(|s| s.to_string()).collect(),
            min_shared: DEFAULT_MIN_SHARED,
            include_incorrect: false,
            max_parallel: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApplySection {
    /// Process only the first `limit` records.
    pub limit: Option<usize>,
    pub max_parallel: usize,
}

impl Default for ApplySection {
    fn default() -> Self {
        Self { limit: None, max_parallel: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointSection {
    pub id: String,
    #[serde(default)]
    pub kind: EndpointKind,
    #[serde(default)]
    pub base_url: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub max_parallel: Option<usize>,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
    #[serde(default)]
    pub max_attempts: Option<u32>,
    #[serde(default)]
    pub backoff_ms: Option<u64>,
    /// Mock behaviour: `agent` (default), `letter`, or a JSON file mapping
    /// request fingerprints to replies.
    #[serde(default)]
    pub mock: Option<String>,
}

impl EndpointSection {
    pub fn to_endpoint(&self) -> EndpointConfig {
        let mut e = EndpointConfig::remote(&self.id, &self.base_url, &self.model);
        e.kind = self.kind;
        e.auth_env = self.auth_env.clone();
        if let Some(p) = self.max_parallel {
            e.max_parallel = p;
        }
        if let Some(t) = self.timeout_ms {
            e.timeout_ms = t;
        }
        let d = RetryPolicy::default();
        e.retry = RetryPolicy {
            max_attempts: self.max_attempts.unwrap_or(d.max_attempts),
            base_backoff_ms: self.backoff_ms.unwrap_or(d.base_backoff_ms),
        };
        if e.model_name.is_empty() && e.kind == EndpointKind::Mock {
            e.model_name = format!("mock:{}", self.id);
        }
        e
    }
}

/// Values given on the command line; each one wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub city: Option<String>,
    pub strict: bool,
    pub output: Option<PathBuf>,
    pub stores: Option<PathBuf>,
}

/// Parse `text`, collecting unknown keys instead of silently dropping them.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut value: toml::Value = toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
    let mut unknown = Vec::new();
    // `qc` rejects unknown keys on its own, which would stop at the first
    // one; check it against the known fields first so all are reported.
    if let Some(toml::Value::Table(qc)) = value.get_mut("qc") {
        let known = toml::Value::try_from(QCConfig::default()).expect("qc defaults serialize");
        let known = known.as_table().expect("qc is a table");
        let stray: Vec<String> = qc.keys().filter(|k| !known.contains_key(*k)).cloned().collect();
        for k in stray {
            qc.remove(&k);
            unknown.push(format!("qc.{k}"));
        }
    }
    let config: RunConfig =
        serde_ignored::deserialize(value, |path| unknown.push(path.to_string())).map_err(|e| CliError::usage(format!("config: {e}")))?;
    if !unknown.is_empty() {
        return Err(CliError::usage(format!("config: unknown key(s): {}", unknown.join(", "))));
    }
    Ok(config)
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = overrides.seed {
        config.seed = Some(s);
    }
    if let Some(c) = &overrides.city {
        config.city = Some(c.clone());
    }
    if overrides.strict {
        config.strict = true;
    }
    if let Some(o) = &overrides.output {
        config.paths.output = o.clone();
    }
    if let Some(s) = &overrides.stores {
        config.paths.stores = Some(s.clone());
    }
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Invariant checks; violations exit with code 2.
    pub fn validate(&self) -> Result<(), CliError> {
        self.qc.validate().map_err(CliError::data)?;
        if self.strict {
            let v = self.qc.strict_violations();
            if !v.is_empty() {
                return Err(CliError::data(format!("strict mode: {}", v.join("; "))));
            }
        }
        self.build_options().distance_buckets.validate().map_err(CliError::data)?;
        if self.benchmark.questions_per_task == 0 {
            return Err(CliError::data("benchmark.questions_per_task must be >= 1"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for e in &self.endpoints {
            if !ids.insert(e.id.as_str()) {
                return Err(CliError::data(format!("endpoint `{}` is declared twice", e.id)));
            }
            e.to_endpoint().validate().map_err(CliError::data)?;
        }
        for w in &self.workflow.workflows {
            if !WORKFLOW_IDS.contains(&w.as_str()) {
                return Err(CliError::data(format!("workflow.workflows: unknown workflow `{w}`")));
            }
        }
        Ok(())
    }

    /// The seed, which synthesis, building and evaluation cannot run without.
    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::data("a seed is required: set `seed` in the config or pass --seed"))
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            qc: self.qc.clone(),
            distance_buckets: DistanceBuckets { edges_m: self.benchmark.distance_edges_m.clone() },
            group_attribute: self.benchmark.group_attribute.clone(),
            questions_per_task: self.benchmark.questions_per_task,
            tasks: self.benchmark.tasks.clone(),
        }
    }

    pub fn budget(&self) -> Budget {
        Budget {
            n_merchants: self.synthesis.n_merchants,
            n_users: self.synthesis.n_users,
            n_interactions: self.synthesis.n_interactions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ExitStatus;

    #[test]
    fn unknown_keys_are_listed() {
        let err = parse_config("seed = 1\ncolour = 'red'\n[qc]\nmin_dayz = 3\n").unwrap_err();
        assert_eq!(err.status, ExitStatus::Usage);
        assert!(err.message.contains("colour") && err.message.contains("qc.min_dayz"), "{}", err.message);
    }

    #[test]
    fn flag_beats_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 7\n").unwrap();
        let c = load_config(Some(&p), &Overrides { seed: Some(9), ..Overrides::default() }).unwrap();
        assert_eq!(c.seed, Some(9));
        let c = load_config(Some(&p), &Overrides::default()).unwrap();
        assert_eq!(c.seed, Some(7));
    }

    #[test]
    fn strict_floor() {
        let mut c = parse_config("[qc]\nmin_days = 3\n").unwrap();
        assert!(c.validate().is_ok());
        c.strict = true;
        assert_eq!(c.validate().unwrap_err().status, ExitStatus::Data);
    }

    #[test]
    fn missing_file_is_usage() {
        let err = load_config(Some(Path::new("/nonexistent/c.toml")), &Overrides::default()).unwrap_err();
        assert_eq!(err.status, ExitStatus::Usage);
    }
}
