//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "localeval", version, about = "Benchmark building, instruction synthesis, evaluation and expert workflows for local-life-service LLMs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// City filter (overrides the config).
    #[arg(long, global = true)]
    pub city: Option<String>,
    /// Enforce the floor QC thresholds.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Output directory (overrides `paths.output`).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Canonical store directory (overrides `paths.stores`).
    #[arg(long, global = true)]
    pub stores: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate raw JSONL records (or generate a fixture) into the canonical store directory.
    Ingest(IngestArgs),
    /// Generate an instruction-tuning dataset from the stores.
    Synthesize(SynthesizeArgs),
    #[command(subcommand)]
    Bench(BenchCommand),
    #[command(subcommand)]
    Eval(EvalCommand),
    #[command(subcommand)]
    Workflow(WorkflowCommand),
    #[command(subcommand)]
    Flywheel(FlywheelCommand),
    #[command(subcommand)]
    Apply(ApplyCommand),
    /// Render score tables as Markdown or CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureSize {
    Small,
    Benchmark,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory holding merchants/users/interactions/reviews/calendar(.jsonl) and optionally lexicon.jsonl.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    pub input: Option<PathBuf>,
    /// Write a generated fixture instead of reading files.
    #[arg(long, value_enum)]
    pub fixture: Option<FixtureSize>,
    /// Denylist file, one term per line (overrides `paths.denylist`).
    #[arg(long)]
    pub denylist: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub n_merchants: Option<usize>,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long)]
    pub n_interactions: Option<usize>,
    /// Output JSONL path (default `<output>/training_<mode>.jsonl`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Build a benchmark file for one city.
    Build(BenchBuildArgs),
}

#[derive(Debug, Args)]
pub struct BenchBuildArgs {
    #[arg(long)]
    pub questions_per_task: Option<usize>,
    /// Restrict to these task ids (repeatable).
    #[arg(long = "task")]
    pub tasks: Vec<String>,
    /// Output path (default `<output>/benchmark.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Ask one endpoint every benchmark question.
    Run(EvalRunArgs),
    /// Score model runs against their benchmark.
    Score(EvalScoreArgs),
    /// Check a published results table for arithmetic consistency.
    VerifyTable(VerifyTableArgs),
    /// Correlate task and category scores across runs.
    Correlate(CorrelateArgs),
}

#[derive(Debug, Args)]
pub struct EvalRunArgs {
    #[arg(long)]
    pub benchmark: PathBuf,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// zero_shot, role_play, cot or <k>_shot.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Exemplar pool benchmark for k-shot.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalScoreArgs {
    #[arg(long)]
    pub benchmark: PathBuf,
    /// Run files (repeatable).
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyTableArgs {
    /// CSV with model, SF, SwC, USI, Comp, Overall columns; the bundled table when omitted.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, default_value_t = localeval::eval::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Category weights, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [18.0, 10.0, 10.0, 3.0])]
    pub weights: Vec<f64>,
    /// Also write the verdicts to this JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Score files (at least three, repeatable).
    #[arg(long = "score", required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum WorkflowCommand {
    /// Run the expert workflows over the composite questions of a benchmark.
    Run(WorkflowRunArgs),
}

#[derive(Debug, Args)]
pub struct WorkflowRunArgs {
    #[arg(long)]
    pub benchmark: PathBuf,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Workflow ids (repeatable); all three when omitted.
    #[arg(long = "workflow")]
    pub workflows: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum FlywheelCommand {
    /// Convert workflow traces into a training file.
    Export(FlywheelExportArgs),
}

#[derive(Debug, Args)]
pub struct FlywheelExportArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub benchmark: PathBuf,
    /// Keep traces whose prediction was wrong.
    #[arg(long)]
    pub include_incorrect: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ApplyCommand {
    /// Function tags for merchants.
    Tags(ApplyArgs),
    /// Search query suggestions for merchants.
    Queries(ApplyArgs),
    /// Seven-dimension review score cards.
    ReviewScores(ApplyArgs),
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Only the first N records.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Score files (repeatable).
    #[arg(long = "score", required = true)]
    pub scores: Vec<PathBuf>,
    /// markdown or csv.
    #[arg(long, default_value = "markdown")]
    pub format: String,
    /// Label of the run the others are compared against.
    #[arg(long)]
    pub baseline: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
