//! `workflow run`, `flywheel export` and the `apply` family.

use serde::Serialize;
use serde_json::{json, Value};

use super::{file_hash, require_file, Ctx};
use crate::cli::{ApplyArgs, FlywheelExportArgs, WorkflowRunArgs};
use crate::error::CliError;
use localeval::benchmark::BenchmarkFile;
use localeval::synthesis::export_training_file;
use localeval::workflows::{
    flywheel_dataset, generate_function_tags_batch, generate_query_suggestions_batch, load_traces, records_jsonl,
    run_workflows, score_review_dimensions_batch, summarize_records, ApplyRecord, FlywheelConfig, QueryItem,
    WorkflowOptions,
};

pub fn workflow_run(ctx: &Ctx, args: &WorkflowRunArgs) -> Result<Value, CliError> {
    require_file(&args.benchmark)?;
    let bench = BenchmarkFile::load(&args.benchmark)?;
    let section = &ctx.config.workflow;
    let options = WorkflowOptions {
        workflows: if args.workflows.is_empty() { section.workflows.clone() } else { args.workflows.clone() },
        min_shared: section.min_shared,
        max_parallel: section.max_parallel,
    };
    // Similar-profile statistics need the stores; without them the first
    // step only sees the question.
    let bundle = match ctx.config.paths.stores.as_deref() {
        Some(dir) if dir.is_dir() => Some(ctx.load_stores()?),
        _ => {
            log::warn!("no store directory; workflows run without similar-profile statistics");
            None
        }
    };
    let endpoint = ctx.endpoint(args.endpoint.as_deref())?;
    let batch = run_workflows(&ctx.gateway, &endpoint, &bench, bundle.as_ref(), &options)?;
    let path = ctx.output("workflows/traces.jsonl", args.out.as_ref());
    let mut inputs = vec![("benchmark", bench.benchmark_id())];
    if let Some(b) = &bundle {
        inputs.push(("stores", b.content_hash()));
    }
    ctx.write_artifact(
        &path,
        &batch.traces_jsonl(),
        ctx.config.seed,
        &inputs,
        json!({"kind": "workflow_traces", "endpoint": batch.endpoint_id, "summaries": batch.summaries}),
    )?;
    Ok(json!({
        "traces": path,
        "benchmark_id": batch.benchmark_id,
        "endpoint": batch.endpoint_id,
        "summaries": batch.summaries,
    }))
}

pub fn flywheel_export(ctx: &Ctx, args: &FlywheelExportArgs) -> Result<Value, CliError> {
    require_file(&args.traces)?;
    require_file(&args.benchmark)?;
    let traces = load_traces(&args.traces)?;
    let bench = BenchmarkFile::load(&args.benchmark)?;
    let config = FlywheelConfig {
        include_incorrect: args.include_incorrect || ctx.config.workflow.include_incorrect,
    };
    // The conversion draws nothing at random; the seed is recorded only.
    let seed = ctx.config.seed.unwrap_or(bench.manifest.seed);
    let (dataset, report) = flywheel_dataset(&traces, &bench, config, seed);
    let path = ctx.output("training_flywheel.jsonl", args.out.as_ref());
    let inputs = [("traces", file_hash(&args.traces)?), ("benchmark", bench.benchmark_id())];
    let export = export_training_file(&dataset, &path, &ctx.manifest_context(&inputs))?;
    Ok(json!({
        "training_file": path,
        "pairs": export.pairs_written,
        "include_incorrect": config.include_incorrect,
        "report": report,
    }))
}

fn limited<T>(items: Vec<T>, limit: Option<usize>) -> Vec<T> {
    match limit {
        Some(n) => items.into_iter().take(n).collect(),
        None => items,
    }
}

fn write_records<T: Serialize>(
    ctx: &Ctx,
    kind: &str,
    args: &ApplyArgs,
    records: &[ApplyRecord<T>],
    stores_hash: String,
    calls_before: usize,
) -> Result<Value, CliError> {
    let path = ctx.output(&format!("apply/{kind}.jsonl"), args.out.as_ref());
    let summary = summarize_records(records, ctx.gateway.total_requests() - calls_before);
    ctx.write_artifact(
        &path,
        &records_jsonl(records),
        ctx.config.seed,
        &[("stores", stores_hash)],
        json!({"kind": format!("apply_{kind}"), "summary": summary}),
    )?;
    if summary.failed > 0 {
        log::warn!("{kind}: {} of {} items failed validation; see {}", summary.failed, summary.items, path.display());
    }
    Ok(json!({"output": path, "summary": summary}))
}

pub fn apply_tags(ctx: &Ctx, args: &ApplyArgs) -> Result<Value, CliError> {
    let bundle = ctx.load_city_stores()?;
    let endpoint = ctx.endpoint(args.endpoint.as_deref())?;
    let merchants = limited(bundle.merchants.iter().collect(), args.limit.or(ctx.config.apply.limit));
    let before = ctx.gateway.total_requests();
    let records = generate_function_tags_batch(&merchants, &ctx.gateway, &endpoint, ctx.config.apply.max_parallel)?;
    write_records(ctx, "tags", args, &records, bundle.content_hash(), before)
}

pub fn apply_queries(ctx: &Ctx, args: &ApplyArgs) -> Result<Value, CliError> {
    let bundle = ctx.load_city_stores()?;
    let endpoint = ctx.endpoint(args.endpoint.as_deref())?;
    let items: Vec<QueryItem> = bundle.merchants.iter().map(QueryItem::from_merchant).collect();
    let items = limited(items, args.limit.or(ctx.config.apply.limit));
    let before = ctx.gateway.total_requests();
    let records = generate_query_suggestions_batch(&items, &ctx.gateway, &endpoint, ctx.config.apply.max_parallel)?;
    write_records(ctx, "queries", args, &records, bundle.content_hash(), before)
}

pub fn apply_reviews(ctx: &Ctx, args: &ApplyArgs) -> Result<Value, CliError> {
    let bundle = ctx.load_city_stores()?;
    let endpoint = ctx.endpoint(args.endpoint.as_deref())?;
    let reviews = limited(bundle.reviews.iter().collect(), args.limit.or(ctx.config.apply.limit));
    let before = ctx.gateway.total_requests();
    let records = score_review_dimensions_batch(&reviews, &ctx.gateway, &endpoint, ctx.config.apply.max_parallel)?;
    write_records(ctx, "review_scores", args, &records, bundle.content_hash(), before)
}
