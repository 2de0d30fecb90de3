//! Multiple-choice benchmark construction for local life services.

mod context;
mod generators;
mod geo;
mod options;
mod qc;
mod registry;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use context::{BuildContext, BuildOptions};
pub use generators::composite::{context_line, merchant_option};
pub use generators::context_tasks::{
    period_of_hour, ratio_bucket, ratio_labels, season_label, DISTANCE_EDGE_MARGIN, PERIODS, RAIN_LABELS,
    RATIO_EDGES, RATIO_EDGE_MARGIN,
};
pub use generators::interaction::{canonical_label, INFORMATION_POINT_LABELS};
pub use generators::{NO, YES};
pub use geo::*;
pub use options::*;
pub use qc::*;
pub use registry::*;

use crate::digest::{json_hash, sha256_hex};
use crate::manifest::TOOL_VERSION;
use crate::platform::StoreBundle;
use crate::rng::{derive_seed, SplitMix64};

pub const BENCHMARK_VERSION: &str = "1";
pub const MIN_OPTIONS: usize = 2;
pub const MAX_OPTIONS: usize = 20;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("unknown task type `{0}`")]
    UnknownTask(String),
    #[error("no review carries annotations for `{dimension}`")]
    MissingAnnotations { dimension: String },
    #[error("invalid build options: {0}")]
    InvalidOptions(String),
    #[error("question {question_id}: {reason}")]
    Invalid { question_id: String, reason: String },
    #[error("city `{0}` has no merchants")]
    EmptyCity(String),
    #[error("cannot read benchmark {path}: {reason}")]
    Read { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Construction {
    pub source_ids: Vec<String>,
    pub params: Value,
    /// Gate evidence; always carries `"passed": true` for emitted questions.
    pub qc: Value,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkQuestion {
    pub question_id: String,
    pub task_type: String,
    pub category: Category,
    pub stem: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub construction: Construction,
}

impl BenchmarkQuestion {
    pub fn task(&self) -> Option<&'static TaskType> {
        task_by_id(&self.task_type)
    }

    pub fn correct_option(&self) -> &str {
        &self.options[self.correct_index]
    }

    /// Structural checks shared by assembly and loading.
    pub fn validate(&self, distance_buckets: usize) -> Result<(), String> {
        let task = self.task().ok_or_else(|| format!("unknown task type `{}`", self.task_type))?;
        if task.category != self.category {
            return Err(format!("category {} does not match task {}", self.category, task.id));
        }
        let n = self.options.len();
        if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&n) {
            return Err(format!("{n} options outside {MIN_OPTIONS}..={MAX_OPTIONS}"));
        }
        let expected = task.option_count(distance_buckets);
        if n != expected {
            return Err(format!("{n} options but task {} expects {expected}", task.id));
        }
        if self.options.iter().any(|o| o.trim().is_empty()) {
            return Err("empty option".into());
        }
        if self.options.iter().collect::<BTreeSet<_>>().len() != n {
            return Err("duplicate options".into());
        }
        if self.correct_index >= n {
            return Err(format!("correct_index {} out of range", self.correct_index));
        }
        if self.stem.trim().is_empty() {
            return Err("empty stem".into());
        }
        if self.construction.qc.get("passed") != Some(&Value::Bool(true)) {
            return Err("question did not pass its quality gate".into());
        }
        Ok(())
    }
}

/// Content-derived id: stable under option shuffling.
pub fn question_id(task_id: &str, stem: &str, options: &[String], correct: &str) -> String {
    let mut sorted: Vec<&str> = options.iter().map(String::as_str).collect();
    sorted.sort_unstable();
    let digest = sha256_hex(format!("{task_id}\n{stem}\n{}\n{correct}", sorted.join("\n")).as_bytes());
    format!("{task_id}-{}", &digest[..12])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortfall {
    pub requested: usize,
    pub produced: usize,
    pub candidates: usize,
    /// Skip reason → number of candidates.
    pub skipped: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBuild {
    pub task_type: String,
    pub questions: Vec<BenchmarkQuestion>,
    pub candidates: usize,
    /// Candidates dropped by a quality gate.
    pub qc_rejected: usize,
    pub shortfall: Option<Shortfall>,
}

/// Reasons are bucketed so reports stay short: numbers are stripped.
fn reason_bucket(reason: &str) -> String {
    let cut = reason.find(|c: char| c.is_ascii_digit()).unwrap_or(reason.len());
    let head = reason[..cut].trim_end_matches([' ', ':', '(']).to_string();
    if head.is_empty() { reason.to_string() } else { head }
}

/// Up to `n` questions of one task type. Candidates are visited in a
/// seed-shuffled order and each gets its own derived seed, so the result is
/// a deterministic function of (bundle, options, n, seed).
pub fn build_task_questions(
    task: &TaskType,
    ctx: &BuildContext,
    n: usize,
    seed: u64,
) -> Result<TaskBuild, BenchmarkError> {
    if n == 0 {
        return Err(BenchmarkError::InvalidOptions("question count must be >= 1".into()));
    }
    let gen = generators::generator(task.id).ok_or_else(|| BenchmarkError::UnknownTask(task.id.to_string()))?;
    let mut keys = (gen.candidates)(ctx)?;
    keys.sort();
    keys.dedup();
    SplitMix64::new(derive_seed(seed, task.id)).shuffle(&mut keys);
    let buckets = ctx.options.distance_buckets.count();
    let mut questions = Vec::new();
    let mut ids = BTreeSet::new();
    let mut skipped: BTreeMap<String, usize> = BTreeMap::new();
    let mut qc_rejected = 0;
    for key in &keys {
        if questions.len() == n {
            break;
        }
        let qseed = derive_seed(seed, &format!("{}|{key}", task.id));
        let mut rng = SplitMix64::new(qseed);
        let draft = match (gen.build)(ctx, key, &mut rng) {
            Ok(d) => d,
            Err(reason) => {
                if reason.starts_with("qc:") {
                    qc_rejected += 1;
                }
                *skipped.entry(reason_bucket(&reason)).or_insert(0) += 1;
                continue;
            }
        };
        let correct = draft.options[draft.correct_index].clone();
        let id = question_id(task.id, &draft.stem, &draft.options, &correct);
        if !ids.insert(id.clone()) {
            *skipped.entry("duplicate question".into()).or_insert(0) += 1;
            continue;
        }
        let mut qc = draft.qc;
        qc["passed"] = json!(true);
        let q = BenchmarkQuestion {
            question_id: id,
            task_type: task.id.to_string(),
            category: task.category,
            stem: draft.stem,
            options: draft.options,
            correct_index: draft.correct_index,
            construction: Construction { source_ids: draft.source_ids, params: draft.params, qc, seed: qseed },
        };
        if let Err(reason) = q.validate(buckets) {
            *skipped.entry(format!("invalid draft: {reason}")).or_insert(0) += 1;
            continue;
        }
        questions.push(q);
    }
    let shortfall = (questions.len() < n).then(|| Shortfall {
        requested: n,
        produced: questions.len(),
        candidates: keys.len(),
        skipped: skipped.clone(),
    });
    Ok(TaskBuild { task_type: task.id.to_string(), questions, candidates: keys.len(), qc_rejected, shortfall })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkCounts {
    pub total: usize,
    pub by_category: BTreeMap<Category, usize>,
    pub by_task: BTreeMap<String, usize>,
}

impl BenchmarkCounts {
    pub fn of(questions: &[BenchmarkQuestion]) -> Self {
        let mut by_category: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
        let mut by_task = BTreeMap::new();
        for q in questions {
            *by_category.entry(q.category).or_insert(0) += 1;
            *by_task.entry(q.task_type.clone()).or_insert(0) += 1;
        }
        Self { total: questions.len(), by_category, by_task }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildManifest {
    pub seed: u64,
    pub qc: QCConfig,
    pub distance_buckets: DistanceBuckets,
    pub group_attribute: String,
    pub questions_per_task: usize,
    pub store_hash: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkFile {
    pub version: String,
    pub city: String,
    pub counts: BenchmarkCounts,
    pub manifest: BuildManifest,
    /// Grouped by category, then task type in registry order.
    pub questions: Vec<BenchmarkQuestion>,
}

impl BenchmarkFile {
    /// Hash of the question content; identifies the benchmark in run files.
    pub fn benchmark_id(&self) -> String {
        json_hash(&json!({"version": self.version, "city": self.city, "questions": self.questions}))
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        let buckets = self.manifest.distance_buckets.count();
        let mut ids = BTreeSet::new();
        for q in &self.questions {
            q.validate(buckets).map_err(|reason| BenchmarkError::Invalid {
                question_id: q.question_id.clone(),
                reason,
            })?;
            if !ids.insert(q.question_id.as_str()) {
                return Err(BenchmarkError::Invalid {
                    question_id: q.question_id.clone(),
                    reason: "duplicate question id".into(),
                });
            }
        }
        if BenchmarkCounts::of(&self.questions) != self.counts {
            return Err(BenchmarkError::Invalid {
                question_id: "-".into(),
                reason: "header counts do not match questions".into(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("benchmark serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, BenchmarkError> {
        let file: BenchmarkFile = serde_json::from_str(text).map_err(|e| BenchmarkError::Read {
            path: "<text>".into(),
            reason: e.to_string(),
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, BenchmarkError> {
        let err = |reason: String| BenchmarkError::Read { path: path.display().to_string(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_json(&text).map_err(|e| match e {
            BenchmarkError::Read { reason, .. } => err(reason),
            other => other,
        })
    }

    pub fn question(&self, id: &str) -> Option<&BenchmarkQuestion> {
        self.questions.iter().find(|q| q.question_id == id)
    }
}

/// Validate every question, shuffle multi-option questions with a seed
/// derived from the question id, order by registry and compute the header.
/// A question that fails validation is a builder bug and aborts assembly.
pub fn assemble_benchmark(
    questions: Vec<BenchmarkQuestion>,
    city: &str,
    seed: u64,
    options: &BuildOptions,
    store_hash: &str,
) -> Result<BenchmarkFile, BenchmarkError> {
    let buckets = options.distance_buckets.count();
    let mut out = Vec::with_capacity(questions.len());
    for mut q in questions {
        q.validate(buckets).map_err(|reason| BenchmarkError::Invalid { question_id: q.question_id.clone(), reason })?;
        if q.task().map(|t| t.arity) != Some(Arity::Binary)
            && q.task().map(|t| t.arity) != Some(Arity::DistanceBuckets)
            && !is_ordinal(&q)
        {
            q.correct_index = shuffle_options(&mut q.options, q.correct_index, derive_seed(seed, &q.question_id));
        }
        out.push(q);
    }
    out.sort_by(|a, b| {
        (a.category, task_index(&a.task_type), &a.question_id).cmp(&(b.category, task_index(&b.task_type), &b.question_id))
    });
    let file = BenchmarkFile {
        version: BENCHMARK_VERSION.to_string(),
        city: city.to_string(),
        counts: BenchmarkCounts::of(&out),
        manifest: BuildManifest {
            seed,
            qc: options.qc.clone(),
            distance_buckets: options.distance_buckets.clone(),
            group_attribute: options.group_attribute.clone(),
            questions_per_task: options.questions_per_task,
            store_hash: store_hash.to_string(),
            tool_version: TOOL_VERSION.to_string(),
        },
        questions: out,
    };
    file.validate()?;
    Ok(file)
}

/// Questions whose options form a fixed ordinal scale keep that order.
fn is_ordinal(q: &BenchmarkQuestion) -> bool {
    matches!(
        q.task_type.as_str(),
        "weather_impact_quantitative" | "seasonal_impact_quantitative" | "seasonal_impact_qualitative"
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub city: String,
    pub seed: u64,
    pub tasks: Vec<TaskReport>,
    pub shortfalls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_type: String,
    pub category: Category,
    pub requested: usize,
    pub produced: usize,
    pub candidates: usize,
    pub qc_rejected: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shortfall: Option<Shortfall>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkBuild {
    pub file: BenchmarkFile,
    pub report: BuildReport,
}

pub fn validate_options(options: &BuildOptions) -> Result<(), BenchmarkError> {
    options.qc.validate().map_err(BenchmarkError::InvalidOptions)?;
    options.distance_buckets.validate().map_err(BenchmarkError::InvalidOptions)?;
    if options.questions_per_task == 0 {
        return Err(BenchmarkError::InvalidOptions("questions_per_task must be >= 1".into()));
    }
    for t in &options.tasks {
        task_by_id(t).ok_or_else(|| BenchmarkError::UnknownTask(t.clone()))?;
    }
    Ok(())
}

/// Build a benchmark for one city. Task generators run in parallel; the
/// result does not depend on scheduling.
pub fn build_benchmark(
    bundle: &StoreBundle,
    city: &str,
    options: &BuildOptions,
    seed: u64,
) -> Result<BenchmarkBuild, BenchmarkError> {
    validate_options(options)?;
    let local = bundle.filter_city(city);
    if local.merchants.is_empty() {
        return Err(BenchmarkError::EmptyCity(city.to_string()));
    }
    let ctx = BuildContext::new(&local, options);
    let tasks: Vec<&TaskType> = if options.tasks.is_empty() {
        REGISTRY.iter().collect()
    } else {
        REGISTRY.iter().filter(|t| options.tasks.iter().any(|x| x == t.id)).collect()
    };
    let n = options.questions_per_task;
    let results: Vec<Result<TaskBuild, BenchmarkError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = tasks
            .iter()
            .map(|t| {
                let ctx = &ctx;
                scope.spawn(move || build_task_questions(t, ctx, n, seed))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("generator thread panicked")).collect()
    });
    let mut questions = Vec::new();
    let mut reports = Vec::new();
    for (task, res) in tasks.iter().zip(results) {
        let build = res?;
        reports.push(TaskReport {
            task_type: task.id.to_string(),
            category: task.category,
            requested: n,
            produced: build.questions.len(),
            candidates: build.candidates,
            qc_rejected: build.qc_rejected,
            shortfall: build.shortfall,
        });
        questions.extend(build.questions);
    }
    let file = assemble_benchmark(questions, city, seed, options, &local.content_hash())?;
    let shortfalls = reports.iter().filter(|r| r.shortfall.is_some()).count();
    Ok(BenchmarkBuild { file, report: BuildReport { city: city.to_string(), seed, tasks: reports, shortfalls } })
}
