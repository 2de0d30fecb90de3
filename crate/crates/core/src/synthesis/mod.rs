//! Instruction-data synthesis: template agent, merchant/user/interaction
//! narrative agents and the instruction-generation agent, plus the
//! template-only and single-LLM baseline modes.

mod agents;
mod export;
mod fields;
mod templates;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use agents::*;
pub use export::*;
pub use fields::*;
pub use templates::*;

use crate::gateway::{validated_batch, ChatRequest, EndpointConfig, Gateway, GatewayError};
use crate::platform::{sample_entities, SampleError, StoreBundle};
use crate::prompts::PromptCatalog;
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    MultiAgent,
    TemplateOnly,
    SingleLlm,
}

impl SynthesisMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthesisMode::MultiAgent => "multi_agent",
            SynthesisMode::TemplateOnly => "template_only",
            SynthesisMode::SingleLlm => "single_llm",
        }
    }
}

impl fmt::Display for SynthesisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynthesisMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multi_agent" => Ok(SynthesisMode::MultiAgent),
            "template_only" => Ok(SynthesisMode::TemplateOnly),
            "single_llm" => Ok(SynthesisMode::SingleLlm),
            other => Err(format!("unknown synthesis mode `{other}` (multi_agent, template_only, single_llm)")),
        }
    }
}

/// Which generator produced a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    Template,
    Merchant,
    User,
    Interaction,
    /// Single-LLM baseline.
    Direct,
    /// Converted expert-workflow trace.
    Flywheel,
}

impl Agent {
    pub fn as_str(self) -> &'static str {
        match self {
            Agent::Template => "template",
            Agent::Merchant => "merchant",
            Agent::User => "user",
            Agent::Interaction => "interaction",
            Agent::Direct => "direct",
            Agent::Flywheel => "flywheel",
        }
    }
}

impl FromStr for Agent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(json!(s)).map_err(|_| format!("unknown agent `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: SynthesisMode,
    pub agent: Agent,
    pub source_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narrative_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPair {
    pub instruction: String,
    pub output: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub mode: SynthesisMode,
    pub seed: u64,
    pub pairs: Vec<InstructionPair>,
}

impl Dataset {
    /// Copy without the pairs of one agent, for ablation studies.
    pub fn without_agent(&self, agent: Agent) -> Dataset {
        Dataset {
            mode: self.mode,
            seed: self.seed,
            pairs: self.pairs.iter().filter(|p| p.provenance.agent != agent).cloned().collect(),
        }
    }

    pub fn counts_by_agent(&self) -> BTreeMap<Agent, usize> {
        let mut out = BTreeMap::new();
        for p in &self.pairs {
            *out.entry(p.provenance.agent).or_default() += 1;
        }
        out
    }
}

/// Drop exact `(instruction, output)` repeats, keeping the first copy.
/// Returns the number removed.
pub fn dedup_pairs(pairs: &mut Vec<InstructionPair>) -> usize {
    let mut seen = BTreeSet::new();
    let before = pairs.len();
    pairs.retain(|p| seen.insert((p.instruction.clone(), p.output.clone())));
    before - pairs.len()
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid field combination: {0}")]
    InvalidCombination(String),
    #[error("invalid agent input: {0}")]
    InvalidInput(String),
    #[error("no valid template for {combination} after 3 rounds ({rejected} candidate(s) rejected)")]
    NoValidTemplates { combination: String, rejected: usize },
    #[error("budget exceeds store: {0}")]
    Budget(#[from] SampleError),
    #[error(transparent)]
    Gateway(GatewayError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub n_merchants: usize,
    pub n_users: usize,
    pub n_interactions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub combinations: Vec<FieldCombination>,
    pub max_parallel: usize,
    /// When set, the deduplicated dataset is down-sampled (seeded, order
    /// preserving) to this many pairs so that modes can be compared at equal
    /// size.
    pub target_pairs: Option<usize>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { combinations: default_combinations(), max_parallel: 4, target_pairs: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub mode: Option<SynthesisMode>,
    pub seed: u64,
    pub budget: Budget,
    /// Pairs per agent in the final dataset.
    pub pairs_by_agent: BTreeMap<String, usize>,
    pub rejections_by_agent: BTreeMap<String, usize>,
    pub templates_by_combination: BTreeMap<String, usize>,
    pub skipped_pairings: usize,
    pub duplicates_removed: usize,
    pub trimmed_to_target: usize,
    /// LLM requests per tag, retries included.
    pub llm_calls: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub rejections: Vec<RejectionRecord>,
    pub total_pairs: usize,
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub dataset: Dataset,
    pub report: SynthesisReport,
}

const CALL_TAGS: [&str; 6] = [
    "synth.template",
    "synth.merchant",
    "synth.user",
    "synth.interaction",
    "synth.instruction",
    "synth.direct",
];

/// Build a training dataset from a store bundle.
///
/// Records are sampled per kind with seeds derived from `seed`. Only
/// gateway configuration errors and over-sized budgets abort; every other
/// failure is counted in the report.
pub fn synthesize_dataset(
    mode: SynthesisMode,
    bundle: &StoreBundle,
    budget: Budget,
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    seed: u64,
    options: &SynthesisOptions,
) -> Result<SynthesisOutcome, SynthesisError> {
    let calls_before: BTreeMap<&str, usize> =
        CALL_TAGS.iter().map(|t| (*t, gateway.requests_with_tag_prefix(t))).collect();
    let merchants = sample_entities(bundle.merchants.records(), budget.n_merchants, derive_seed(seed, "synth.merchants"))?;
    let users = sample_entities(bundle.users.records(), budget.n_users, derive_seed(seed, "synth.users"))?;
    let interactions = sample_entities(
        bundle.interactions.records(),
        budget.n_interactions,
        derive_seed(seed, "synth.interactions"),
    )?;

    let mut report = SynthesisReport { mode: Some(mode), seed, budget, ..Default::default() };
    let mut pairs: Vec<InstructionPair> = Vec::new();

    let mut records: Vec<FieldRecord> = Vec::new();
    records.extend(merchants.iter().map(|m| merchant_fields(m)));
    records.extend(users.iter().map(|u| user_fields(u)));
    records.extend(interactions.iter().filter_map(|it| interaction_fields(bundle, it)));

    match mode {
        SynthesisMode::MultiAgent | SynthesisMode::TemplateOnly => {
            for combo in &options.combinations {
                if !records.iter().any(|r| r.kind == combo.kind) {
                    continue;
                }
                match generate_templates(combo, gateway, endpoint, seed) {
                    Ok(batch) => {
                        report.templates_by_combination.insert(combo.id(), batch.templates.len());
                        report.warnings.extend(batch.warnings);
                        let (p, skipped) = instantiate_templates(&batch.templates, &records, mode);
                        report.skipped_pairings += skipped.len();
                        pairs.extend(p);
                    }
                    Err(SynthesisError::Gateway(e)) if e.is_configuration() => return Err(SynthesisError::Gateway(e)),
                    Err(e) => report.errors.push(e.to_string()),
                }
            }
        }
        SynthesisMode::SingleLlm => {}
    }

    match mode {
        SynthesisMode::MultiAgent => {
            let inputs = narrative_inputs(bundle, &merchants, &users, &interactions, seed, &mut report);
            let mut narratives = Vec::new();
            for kind in SourceKind::ALL {
                let of_kind: Vec<NarrativeInput> = inputs.iter().filter(|i| i.kind == kind).cloned().collect();
                for r in run_narrative_batch(&of_kind, gateway, endpoint, options.max_parallel)? {
                    match r {
                        Ok(n) => narratives.push(n),
                        Err(rej) => report.rejections.push(rej),
                    }
                }
            }
            for r in generate_instruction_batch(&narratives, mode, gateway, endpoint, options.max_parallel)? {
                match r {
                    Ok(p) => pairs.push(p),
                    Err(rej) => report.rejections.push(rej),
                }
            }
        }
        SynthesisMode::SingleLlm => {
            let (p, rejections) = direct_pairs(&records, gateway, endpoint, options.max_parallel)?;
            pairs.extend(p);
            report.rejections.extend(rejections);
        }
        SynthesisMode::TemplateOnly => {}
    }

    report.duplicates_removed = dedup_pairs(&mut pairs);
    if let Some(target) = options.target_pairs {
        if pairs.len() > target {
            let mut keep = SplitMix64::new(derive_seed(seed, "synth.target")).sample_indices(pairs.len(), target);
            keep.sort_unstable();
            report.trimmed_to_target = pairs.len() - target;
            pairs = keep.into_iter().map(|i| pairs[i].clone()).collect();
        } else if pairs.len() < target {
            report
                .warnings
                .push(format!("generated {} pair(s), short of the target {target}", pairs.len()));
        }
    }

    let dataset = Dataset { mode, seed, pairs };
    for (agent, n) in dataset.counts_by_agent() {
        report.pairs_by_agent.insert(agent.as_str().to_string(), n);
    }
    for r in &report.rejections {
        *report.rejections_by_agent.entry(r.agent.as_str().to_string()).or_default() += 1;
    }
    for tag in CALL_TAGS {
        let n = gateway.requests_with_tag_prefix(tag) - calls_before[tag];
        if n > 0 {
            report.llm_calls.insert(tag.to_string(), n);
        }
    }
    report.total_pairs = dataset.pairs.len();
    Ok(SynthesisOutcome { dataset, report })
}

/// Narrative-agent inputs for the sampled records. Users are paired with one
/// of their interactions, chosen by a seeded draw; interactions need a
/// calendar entry for their weather.
fn narrative_inputs(
    bundle: &StoreBundle,
    merchants: &[&crate::platform::MerchantRecord],
    users: &[&crate::platform::UserRecord],
    interactions: &[&crate::platform::InteractionRecord],
    seed: u64,
    report: &mut SynthesisReport,
) -> Vec<NarrativeInput> {
    let mut out = Vec::new();
    for m in merchants {
        let input = NarrativeInput::merchant(m);
        match input.validate() {
            Ok(()) => out.push(input),
            Err(e) => report.warnings.push(format!("merchant {} skipped: {e}", m.merchant_id)),
        }
    }
    for u in users {
        let history = bundle.interactions_of_user(&u.user_id);
        if history.is_empty() {
            report.warnings.push(format!("user {} skipped: no interactions", u.user_id));
            continue;
        }
        let pick = SplitMix64::new(derive_seed(seed, &format!("synth.user.{}", u.user_id))).below_usize(history.len());
        let it = history[pick];
        let Some(m) = bundle.merchants.get(&it.merchant_id) else { continue };
        let input = NarrativeInput::user(bundle, u, it, m);
        match input.validate() {
            Ok(()) => out.push(input),
            Err(e) => report.warnings.push(format!("user {} skipped: {e}", u.user_id)),
        }
    }
    for it in interactions {
        let (Some(u), Some(m)) = (bundle.users.get(&it.user_id), bundle.merchants.get(&it.merchant_id)) else {
            continue;
        };
        let date = bundle.local_date(it);
        let Some(day) = bundle.calendar_for(&m.city).get(&date).copied() else {
            report.warnings.push(format!("interaction {} skipped: no calendar entry for {date}", it.key()));
            continue;
        };
        let input = NarrativeInput::interaction(bundle, u, m, it, day.weather.as_str());
        match input.validate() {
            Ok(()) => out.push(input),
            Err(e) => report.warnings.push(format!("interaction {} skipped: {e}", it.key())),
        }
    }
    out
}

#[derive(Deserialize)]
struct DirectPair {
    instruction: String,
    output: String,
}

pub fn direct_request(record: &FieldRecord) -> ChatRequest {
    let input = json!({"kind": record.kind, "values": record.values}).to_string();
    ChatRequest::new(
        PromptCatalog::builtin()
            .synthesis
            .direct
            .render(&[("kind", record.kind.as_str()), ("input", &input)]),
        TEMPLATE_MAX_TOKENS,
    )
    .with_temperature(AGENT_TEMPERATURE)
    .with_tag("synth.direct")
}

fn parse_direct(text: &str) -> Result<DirectPair, String> {
    let start = text.find('{').ok_or("no JSON object in response")?;
    let end = text.rfind('}').ok_or("no JSON object in response")?;
    let p: DirectPair = serde_json::from_str(&text[start..=end.max(start)]).map_err(|e| e.to_string())?;
    if p.instruction.trim().is_empty() || p.output.trim().is_empty() {
        return Err("empty instruction or output".into());
    }
    Ok(p)
}

/// Single-LLM baseline: exactly one call per record, no retries.
fn direct_pairs(
    records: &[FieldRecord],
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    max_parallel: usize,
) -> Result<(Vec<InstructionPair>, Vec<RejectionRecord>), SynthesisError> {
    if records.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let out = validated_batch(
        gateway,
        endpoint,
        max_parallel,
        records.len(),
        1,
        |i, _| direct_request(&records[i]),
        |_, resp| parse_direct(&resp.text),
    )
    .map_err(SynthesisError::Gateway)?;
    let mut pairs = Vec::new();
    let mut rejections = Vec::new();
    for (v, r) in out.into_iter().zip(records) {
        match v.outcome {
            Ok(p) => pairs.push(InstructionPair {
                instruction: p.instruction.trim().to_string(),
                output: p.output.trim().to_string(),
                provenance: Provenance {
                    mode: SynthesisMode::SingleLlm,
                    agent: Agent::Direct,
                    source_ids: r.source_ids.clone(),
                    template_id: None,
                    narrative_fingerprint: Some(v.fingerprint),
                },
            }),
            Err(rej) => rejections.push(RejectionRecord {
                agent: Agent::Direct,
                source_ids: r.source_ids.clone(),
                reason: rej.reason,
                output: rej.output,
            }),
        }
    }
    Ok((pairs, rejections))
}
