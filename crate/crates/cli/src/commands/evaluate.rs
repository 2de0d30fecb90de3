//! `eval run|score|verify-table|correlate` and `report`.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::{file_hash, require_file, Ctx};
use crate::cli::{CorrelateArgs, EvalRunArgs, EvalScoreArgs, ReportArgs, VerifyTableArgs};
use crate::error::CliError;
use localeval::benchmark::BenchmarkFile;
use localeval::eval::{
    builtin_table1, compare, correlation_analysis, evaluate_model, load_table1, rank_tables, render_report,
    score_run, verify_published_table, ModelRun, PromptStrategy, ReportFormat, ScoreTable, StrategyKind,
};

fn load_benchmark(path: &Path) -> Result<BenchmarkFile, CliError> {
    require_file(path)?;
    Ok(BenchmarkFile::load(path)?)
}

fn load_score(path: &Path) -> Result<ScoreTable, CliError> {
    require_file(path)?;
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: not a score table: {e}", path.display())))
}

/// File-name-safe form of a run label.
fn slug(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("value serializes") + "\n"
}

pub fn run(ctx: &Ctx, args: &EvalRunArgs) -> Result<Value, CliError> {
    let seed = ctx.seed()?;
    let bench = load_benchmark(&args.benchmark)?;
    let label = args.strategy.as_deref().unwrap_or(&ctx.config.eval.strategy);
    let mut strategy = PromptStrategy::from_label(label).map_err(|e| CliError::usage(e.to_string()))?;
    if strategy.kind == StrategyKind::RolePlay {
        strategy.role = ctx.config.eval.role.clone();
    }
    let pool_path = args.pool.clone().or_else(|| ctx.config.eval.pool.clone());
    let pool = match (&pool_path, strategy.kind) {
        (Some(p), StrategyKind::KShot) => Some(load_benchmark(p)?),
        (None, StrategyKind::KShot) => return Err(CliError::usage(format!("{label} needs an exemplar pool (--pool)"))),
        _ => None,
    };
    if let Some(p) = &pool {
        strategy.exemplar_pool = Some(p.benchmark_id());
    }
    let endpoint = ctx.endpoint(args.endpoint.as_deref())?;
    let run = evaluate_model(&ctx.gateway, &bench, &endpoint, &strategy, pool.as_ref(), ctx.config.eval.max_parallel, seed)?;
    let path = ctx.output(&format!("runs/{}.json", slug(&run.label())), args.out.as_ref());
    let mut inputs = vec![("benchmark", bench.benchmark_id())];
    if let Some(p) = &pool {
        inputs.push(("pool", p.benchmark_id()));
    }
    ctx.write_artifact(&path, &run.to_json(), Some(seed), &inputs, json!({"kind": "model_run", "label": run.label()}))?;
    Ok(json!({
        "run": path,
        "label": run.label(),
        "benchmark_id": run.benchmark_id,
        "summary": run.summary,
        "accuracy": if run.summary.questions == 0 { 0.0 } else { run.summary.correct as f64 / run.summary.questions as f64 },
    }))
}

pub fn score(ctx: &Ctx, args: &EvalScoreArgs) -> Result<Value, CliError> {
    let bench = load_benchmark(&args.benchmark)?;
    let mut tables = Vec::new();
    let mut run_hashes = Vec::new();
    for p in &args.runs {
        require_file(p)?;
        let run = ModelRun::load(p)?;
        tables.push(score_run(&run, &bench)?);
        run_hashes.push(file_hash(p)?);
    }
    rank_tables(&mut tables);
    let mut written = Vec::new();
    for t in &tables {
        let path = ctx.output(&format!("scores/{}.json", slug(&t.label)), None);
        let mut inputs = vec![("benchmark", bench.benchmark_id())];
        inputs.extend(run_hashes.iter().map(|h| ("run", h.clone())));
        ctx.write_artifact(&path, &t.to_json(), ctx.config.seed, &inputs, json!({"kind": "score_table", "label": t.label}))?;
        written.push(json!({"label": t.label, "rank": t.rank, "overall": t.overall, "categories": t.categories, "file": path}));
    }
    Ok(json!({"benchmark_id": bench.benchmark_id(), "scores": written}))
}

pub fn verify_table(ctx: &Ctx, args: &VerifyTableArgs) -> Result<Value, CliError> {
    let rows = match &args.fixture {
        Some(p) => {
            require_file(p)?;
            load_table1(p)?
        }
        None => builtin_table1(),
    };
    let weights: [f64; 4] = args
        .weights
        .as_slice()
        .try_into()
        .map_err(|_| CliError::usage(format!("--weights needs 4 values, got {}", args.weights.len())))?;
    if !(args.tolerance >= 0.0) {
        return Err(CliError::usage("--tolerance must be non-negative"));
    }
    let verdict = verify_published_table(&rows, weights, args.tolerance);
    if let Some(out) = &args.out {
        let source = match &args.fixture {
            Some(p) => file_hash(p)?,
            None => "builtin".to_string(),
        };
        ctx.write_artifact(out, &pretty(&verdict), None, &[("table", source)], json!({"kind": "table_verification"}))?;
    }
    let summary = json!({
        "command": "eval verify-table",
        "passed": verdict.passed(),
        "rows": verdict.rows.len(),
        "failed": verdict.failed,
        "verification": verdict,
    });
    if verdict.passed() {
        Ok(summary)
    } else {
        let worst = verdict.worst.as_ref().map(|w| format!("; worst {} deviates by {:.3}", w.model, w.deviation)).unwrap_or_default();
        Err(CliError::data(format!(
            "{} of {} rows exceed tolerance {}{worst}",
            verdict.failed,
            verdict.rows.len(),
            args.tolerance
        ))
        .with_summary(summary))
    }
}

pub fn correlate(ctx: &Ctx, args: &CorrelateArgs) -> Result<Value, CliError> {
    let tables = args.scores.iter().map(|p| load_score(p)).collect::<Result<Vec<_>, _>>()?;
    let analysis = correlation_analysis(&tables)?;
    let path = ctx.output("correlation.json", args.out.as_ref());
    let inputs = args.scores.iter().map(|p| file_hash(p).map(|h| ("score", h))).collect::<Result<Vec<_>, _>>()?;
    ctx.write_artifact(&path, &pretty(&analysis), ctx.config.seed, &inputs, json!({"kind": "correlation"}))?;
    Ok(json!({
        "correlation": path,
        "runs": analysis.runs,
        "tasks": analysis.tasks.len(),
        "excluded_tasks": analysis.excluded_tasks,
        "task_stats": analysis.task_stats,
        "categories": analysis.categories,
        "category_matrix": analysis.category_matrix,
    }))
}

pub fn report(ctx: &Ctx, args: &ReportArgs) -> Result<Value, CliError> {
    let format: ReportFormat = args.format.parse().map_err(CliError::usage)?;
    let mut tables = args.scores.iter().map(|p| load_score(p)).collect::<Result<Vec<_>, _>>()?;
    rank_tables(&mut tables);
    let comparisons = match &args.baseline {
        Some(b) => {
            let base = tables
                .iter()
                .find(|t| &t.label == b)
                .ok_or_else(|| CliError::usage(format!("baseline `{b}` is not among the score files")))?;
            tables.iter().filter(|t| &t.label != b).map(|t| compare(t, base)).collect()
        }
        None => Vec::new(),
    };
    let text = render_report(&tables, &comparisons, format);
    let ext = match format {
        ReportFormat::Markdown => "md",
        ReportFormat::Csv => "csv",
    };
    let path: PathBuf = ctx.output(&format!("report.{ext}"), args.out.as_ref());
    let inputs = args.scores.iter().map(|p| file_hash(p).map(|h| ("score", h))).collect::<Result<Vec<_>, _>>()?;
    ctx.write_artifact(&path, &text, ctx.config.seed, &inputs, json!({"kind": "report", "format": format}))?;
    Ok(json!({
        "report": path,
        "format": format,
        "ranking": tables.iter().map(|t| json!({"label": t.label, "rank": t.rank, "overall": t.overall})).collect::<Vec<_>>(),
        "comparisons": comparisons,
    }))
}
