//! `ingest`, `synthesize` and `bench build`.

use serde_json::{json, Value};

use super::Ctx;
use crate::cli::{BenchBuildArgs, FixtureSize, IngestArgs, SynthesizeArgs};
use crate::error::CliError;
use localeval::benchmark::build_benchmark;
use localeval::fixtures::{generate_fixture, FixtureSpec};
use localeval::manifest::write_manifest;
use localeval::platform::{EntityKind, StoreBundle};
use localeval::synthesis::{export_training_file, synthesize_dataset, SynthesisMode, SynthesisOptions};

const KINDS: [EntityKind; 6] = [
    EntityKind::Merchants,
    EntityKind::Users,
    EntityKind::Interactions,
    EntityKind::Reviews,
    EntityKind::Calendar,
    EntityKind::Lexicon,
];

fn record_counts(b: &StoreBundle) -> Value {
    json!({
        "merchants": b.merchants.len(),
        "users": b.users.len(),
        "interactions": b.interactions.len(),
        "reviews": b.reviews.len(),
        "calendar": b.calendar.len(),
    })
}

pub fn ingest(ctx: &Ctx, args: &IngestArgs) -> Result<Value, CliError> {
    let dest = ctx
        .config
        .paths
        .stores
        .clone()
        .ok_or_else(|| CliError::data("no store directory: set `paths.stores` or pass --stores"))?;
    let (bundle, reports, source) = match (&args.input, args.fixture) {
        (Some(dir), _) => {
            if !dir.is_dir() {
                return Err(CliError::data(format!("input directory {} does not exist", dir.display())));
            }
            let denylist = ctx.denylist(args.denylist.as_ref())?;
            let (bundle, reports) = StoreBundle::load_dir(dir, &denylist, &ctx.bundle_options())?;
            (bundle, reports, json!({"input": dir}))
        }
        (None, Some(size)) => {
            let mut spec = match size {
                FixtureSize::Small => FixtureSpec::small(),
                FixtureSize::Benchmark => FixtureSpec::benchmark(),
            };
            if let Some(s) = ctx.config.seed {
                spec.seed = s;
            }
            if let Some(c) = &ctx.config.city {
                spec.city = c.clone();
            }
            let source = json!({"fixture": spec});
            (generate_fixture(&spec), Vec::new(), source)
        }
        (None, None) => return Err(CliError::usage("ingest needs --input or --fixture")),
    };
    bundle.export_dir(&dest)?;
    let content_hash = bundle.content_hash();
    let context = ctx.manifest_context(&[("stores", content_hash.clone())]);
    for kind in KINDS {
        let path = dest.join(kind.file_name());
        if path.is_file() {
            write_manifest(&path, ctx.config.seed, &context, json!({"kind": kind, "source": source}))
                .map_err(|e| CliError::data(format!("manifest for {}: {e}", path.display())))?;
        }
    }
    let rejected: usize = reports.iter().map(|r| r.rejected()).sum();
    let report_path = ctx.output("ingest_report.json", None);
    let report = json!({"source": source, "content_hash": content_hash, "records": record_counts(&bundle), "files": reports});
    ctx.write_artifact(
        &report_path,
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
        ctx.config.seed,
        &[("stores", content_hash.clone())],
        json!({"kind": "ingest_report"}),
    )?;
    Ok(json!({
        "stores": dest,
        "content_hash": content_hash,
        "records": record_counts(&bundle),
        "rejected_lines": rejected,
        "report": report_path,
    }))
}

pub fn synthesize(ctx: &Ctx, args: &SynthesizeArgs) -> Result<Value, CliError> {
    let seed = ctx.seed()?;
    let mode: SynthesisMode = match &args.mode {
        Some(m) => m.parse().map_err(CliError::usage)?,
        None => ctx.config.synthesis.mode,
    };
    let mut budget = ctx.config.budget();
    budget.n_merchants = args.n_merchants.unwrap_or(budget.n_merchants);
    budget.n_users = args.n_users.unwrap_or(budget.n_users);
    budget.n_interactions = args.n_interactions.unwrap_or(budget.n_interactions);
    let bundle = ctx.load_city_stores()?;
    let endpoint = ctx.endpoint(args.endpoint.as_deref())?;
    let options = SynthesisOptions {
        max_parallel: ctx.config.synthesis.max_parallel,
        target_pairs: ctx.config.synthesis.target_pairs,
        ..SynthesisOptions::default()
    };
    let outcome = synthesize_dataset(mode, &bundle, budget, &ctx.gateway, &endpoint, seed, &options)?;
    let path = ctx.output(&format!("training_{mode}.jsonl"), args.out.as_ref());
    let inputs = [("stores", bundle.content_hash())];
    let export = export_training_file(&outcome.dataset, &path, &ctx.manifest_context(&inputs))?;
    let report_path = path.with_file_name(format!("synthesis_report_{mode}.json"));
    ctx.write_artifact(
        &report_path,
        &(serde_json::to_string_pretty(&outcome.report).expect("report serializes") + "\n"),
        Some(seed),
        &inputs,
        json!({"kind": "synthesis_report", "mode": mode}),
    )?;
    Ok(json!({
        "mode": mode,
        "seed": seed,
        "training_file": path,
        "pairs": export.pairs_written,
        "pairs_by_agent": outcome.report.pairs_by_agent,
        "llm_calls_by_tag": outcome.report.llm_calls,
        "errors": outcome.report.errors.len(),
        "report": report_path,
    }))
}

pub fn bench_build(ctx: &Ctx, args: &BenchBuildArgs) -> Result<Value, CliError> {
    let seed = ctx.seed()?;
    let city = ctx.config.city.clone().ok_or_else(|| CliError::data("a city is required: set `city` or pass --city"))?;
    let mut options = ctx.config.build_options();
    if let Some(n) = args.questions_per_task {
        options.questions_per_task = n;
    }
    if !args.tasks.is_empty() {
        options.tasks = args.tasks.clone();
    }
    let bundle = ctx.load_stores()?;
    let build = build_benchmark(&bundle, &city, &options, seed)?;
    let path = ctx.output("benchmark.json", args.out.as_ref());
    let inputs = [("stores", bundle.content_hash())];
    let file = &build.file;
    ctx.write_artifact(
        &path,
        &file.to_json(),
        Some(seed),
        &inputs,
        json!({"kind": "benchmark", "benchmark_id": file.benchmark_id(), "counts": file.counts}),
    )?;
    let report_path = path.with_file_name(format!(
        "{}_report.json",
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "benchmark".into())
    ));
    ctx.write_artifact(
        &report_path,
        &(serde_json::to_string_pretty(&build.report).expect("report serializes") + "\n"),
        Some(seed),
        &inputs,
        json!({"kind": "benchmark_report"}),
    )?;
    if build.report.shortfalls > 0 {
        log::warn!("{} task(s) fell short of the requested question count; see {}", build.report.shortfalls, report_path.display());
    }
    Ok(json!({
        "benchmark": path,
        "benchmark_id": file.benchmark_id(),
        "city": file.city,
        "seed": seed,
        "questions": file.counts.total,
        "by_category": file.counts.by_category,
        "shortfalls": build.report.shortfalls,
        "report": report_path,
    }))
}
