//! Command handlers. Each returns the JSON summary printed on success.

mod agents;
mod data;
mod evaluate;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::cli::{ApplyCommand, BenchCommand, Cli, Command, EvalCommand, FlywheelCommand, WorkflowCommand};
use crate::config::{load_config, Overrides, RunConfig};
use crate::error::CliError;
use localeval::digest::{json_hash, sha256_hex};
use localeval::gateway::{EndpointConfig, EndpointKind, Gateway, MockScript};
use localeval::manifest::{write_manifest, ManifestContext};
use localeval::platform::{BundleOptions, Denylist, IngestOptions, StoreBundle};
use localeval::simulate::agent_script;

pub struct Ctx {
    pub config: RunConfig,
    pub config_hash: String,
    pub gateway: Gateway,
}

impl Ctx {
    fn new(config: RunConfig) -> Result<Self, CliError> {
        let config_hash = json_hash(&config);
        let mut gateway = Gateway::new();
        if let Some(p) = &config.paths.call_log {
            gateway = gateway.with_log_file(p).map_err(|e| CliError::data(format!("call log {}: {e}", p.display())))?;
        }
        Ok(Self { config, config_hash, gateway })
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.config.require_seed()
    }

    pub fn output(&self, default_name: &str, explicit: Option<&PathBuf>) -> PathBuf {
        explicit.cloned().unwrap_or_else(|| self.config.paths.output.join(default_name))
    }

    /// Endpoint by id, or the first configured one. Mock endpoints are
    /// registered with the gateway here.
    pub fn endpoint(&self, id: Option<&str>) -> Result<EndpointConfig, CliError> {
        let section = match id {
            Some(id) => self
                .config
                .endpoints
                .iter()
                .find(|e| e.id == id)
                .ok_or_else(|| CliError::usage(format!("no endpoint `{id}` in the config")))?,
            None => self
                .config
                .endpoints
                .first()
                .ok_or_else(|| CliError::data("no endpoints configured ([[endpoints]] in the config)"))?,
        };
        let endpoint = section.to_endpoint();
        if endpoint.kind == EndpointKind::Mock {
            let script = match section.mock.as_deref().unwrap_or("agent") {
                "agent" => agent_script(),
                "letter" => MockScript::default(),
                path => {
                    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("mock fixtures {path}: {e}")))?;
                    let fixtures: BTreeMap<String, String> =
                        serde_json::from_str(&text).map_err(|e| CliError::data(format!("mock fixtures {path}: {e}")))?;
                    MockScript::with_fixtures(fixtures)
                }
            };
            let mut registered = self.gateway.configure_mock(&endpoint.endpoint_id, script);
            registered.model_name = endpoint.model_name.clone();
            registered.max_parallel = endpoint.max_parallel;
            return Ok(registered);
        }
        Ok(endpoint)
    }

    pub fn stores_dir(&self) -> Result<&Path, CliError> {
        let dir = self
            .config
            .paths
            .stores
            .as_deref()
            .ok_or_else(|| CliError::data("no store directory: set `paths.stores` or pass --stores"))?;
        if !dir.is_dir() {
            return Err(CliError::data(format!("store directory {} does not exist", dir.display())));
        }
        Ok(dir)
    }

    pub fn bundle_options(&self) -> BundleOptions {
        BundleOptions {
            ingest: IngestOptions { hemisphere: self.config.ingest.hemisphere },
            utc_offset_minutes: self.config.ingest.utc_offset_minutes,
        }
    }

    pub fn denylist(&self, explicit: Option<&PathBuf>) -> Result<Denylist, CliError> {
        match explicit.or(self.config.paths.denylist.as_ref()) {
            Some(p) => Ok(Denylist::load(p)?),
            None => Ok(Denylist::default()),
        }
    }

    /// Canonical stores as written by `ingest`.
    pub fn load_stores(&self) -> Result<StoreBundle, CliError> {
        let (bundle, _) = StoreBundle::load_dir(self.stores_dir()?, &Denylist::default(), &self.bundle_options())?;
        Ok(bundle)
    }

    /// Stores restricted to the configured city when one is set.
    pub fn load_city_stores(&self) -> Result<StoreBundle, CliError> {
        let bundle = self.load_stores()?;
        Ok(match &self.config.city {
            Some(c) => bundle.filter_city(c),
            None => bundle,
        })
    }

    pub fn manifest_context(&self, inputs: &[(&str, String)]) -> ManifestContext {
        ManifestContext {
            config_hash: Some(self.config_hash.clone()),
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    /// Write `text` to `path` and its manifest beside it. The resolved
    /// config is echoed into the manifest details.
    pub fn write_artifact(
        &self,
        path: &Path,
        text: &str,
        seed: Option<u64>,
        inputs: &[(&str, String)],
        mut details: Value,
    ) -> Result<(), CliError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CliError::data(format!("{}: {e}", parent.display())))?;
        }
        fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if let Value::Object(m) = &mut details {
            m.insert("config".into(), serde_json::to_value(&self.config).expect("config serializes"));
        }
        write_manifest(path, seed, &self.manifest_context(inputs), details)
            .map_err(|e| CliError::data(format!("manifest for {}: {e}", path.display())))?;
        Ok(())
    }
}

/// SHA-256 of a file's bytes.
pub fn file_hash(path: &Path) -> Result<String, CliError> {
    fs::read(path).map(sha256_hex).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::data(format!("{} does not exist", path.display())))
    }
}

pub fn dispatch(cli: Cli) -> Result<Value, CliError> {
    let g = &cli.global;
    let overrides = Overrides {
        seed: g.seed,
        city: g.city.clone(),
        strict: g.strict,
        output: g.output.clone(),
        stores: g.stores.clone(),
    };
    let config = load_config(g.config.as_deref(), &overrides)?;
    let ctx = Ctx::new(config)?;
    let (name, mut summary) = match &cli.command {
        Command::Ingest(a) => ("ingest", data::ingest(&ctx, a)?),
        Command::Synthesize(a) => ("synthesize", data::synthesize(&ctx, a)?),
        Command::Bench(BenchCommand::Build(a)) => ("bench build", data::bench_build(&ctx, a)?),
        Command::Eval(EvalCommand::Run(a)) => ("eval run", evaluate::run(&ctx, a)?),
        Command::Eval(EvalCommand::Score(a)) => ("eval score", evaluate::score(&ctx, a)?),
        Command::Eval(EvalCommand::VerifyTable(a)) => ("eval verify-table", evaluate::verify_table(&ctx, a)?),
        Command::Eval(EvalCommand::Correlate(a)) => ("eval correlate", evaluate::correlate(&ctx, a)?),
        Command::Report(a) => ("report", evaluate::report(&ctx, a)?),
        Command::Workflow(WorkflowCommand::Run(a)) => ("workflow run", agents::workflow_run(&ctx, a)?),
        Command::Flywheel(FlywheelCommand::Export(a)) => ("flywheel export", agents::flywheel_export(&ctx, a)?),
        Command::Apply(ApplyCommand::Tags(a)) => ("apply tags", agents::apply_tags(&ctx, a)?),
        Command::Apply(ApplyCommand::Queries(a)) => ("apply queries", agents::apply_queries(&ctx, a)?),
        Command::Apply(ApplyCommand::ReviewScores(a)) => ("apply review-scores", agents::apply_reviews(&ctx, a)?),
    };
    if let Value::Object(m) = &mut summary {
        m.insert("command".into(), json!(name));
        m.insert("config_hash".into(), json!(ctx.config_hash));
        m.insert("llm_calls".into(), json!(ctx.gateway.total_requests()));
    }
    Ok(summary)
}
