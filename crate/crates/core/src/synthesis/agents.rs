use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::fields::{interaction_time_text, SourceKind};
use super::templates::{AGENT_TEMPERATURE, MAX_ROUNDS, TEMPLATE_MAX_TOKENS};
use super::{Agent, InstructionPair, Provenance, SynthesisError, SynthesisMode};
use crate::gateway::{validated_batch, ChatRequest, EndpointConfig, Gateway};
use crate::platform::{InteractionRecord, MerchantRecord, StoreBundle, UserRecord};
use crate::prompts::{PromptCatalog, PromptPair};

pub const NARRATIVE_MAX_TOKENS: u32 = 1024;

/// Values handed to a narrative agent. Every value must reappear verbatim in
/// the generated text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeInput {
    pub kind: SourceKind,
    pub source_ids: Vec<String>,
    pub values: BTreeMap<String, String>,
}

impl NarrativeInput {
    pub fn merchant(m: &MerchantRecord) -> Self {
        let mut values = BTreeMap::new();
        values.insert("name".to_string(), m.name.clone());
        values.insert("introduction".to_string(), m.introduction.clone());
        values.insert("category".to_string(), m.leaf_category().to_string());
        Self { kind: SourceKind::Merchant, source_ids: vec![m.merchant_id.clone()], values }
    }

    /// A user with one of their interactions and the merchant it involves.
    pub fn user(bundle: &StoreBundle, u: &UserRecord, it: &InteractionRecord, m: &MerchantRecord) -> Self {
        let mut values = BTreeMap::new();
        values.insert("profile".to_string(), u.profile_text());
        values.insert("merchant".to_string(), m.name.clone());
        values.insert("time".to_string(), interaction_time_text(bundle, it));
        values.insert("address".to_string(), m.location.address.clone());
        Self {
            kind: SourceKind::User,
            source_ids: vec![u.user_id.clone(), it.key(), m.merchant_id.clone()],
            values,
        }
    }

    pub fn interaction(
        bundle: &StoreBundle,
        u: &UserRecord,
        m: &MerchantRecord,
        it: &InteractionRecord,
        weather: &str,
    ) -> Self {
        let mut values = BTreeMap::new();
        values.insert("profile".to_string(), u.profile_text());
        values.insert("merchant".to_string(), m.name.clone());
        values.insert("category".to_string(), m.leaf_category().to_string());
        values.insert("address".to_string(), m.location.address.clone());
        values.insert("time".to_string(), interaction_time_text(bundle, it));
        values.insert("weather".to_string(), weather.to_string());
        Self {
            kind: SourceKind::Interaction,
            source_ids: vec![it.key(), u.user_id.clone(), m.merchant_id.clone()],
            values,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.values.iter().find(|(_, v)| v.trim().is_empty()) {
            Some((k, _)) => Err(format!("input field `{k}` is empty")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeText {
    pub kind: SourceKind,
    pub text: String,
    pub source_ids: Vec<String>,
    /// Fingerprint of the request that produced the accepted text.
    pub fingerprint: String,
}

/// A generation given up on after the retry limit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub agent: Agent,
    pub source_ids: Vec<String>,
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Verbatim-inclusion rule for narrative texts.
pub fn check_narrative(input: &NarrativeInput, text: &str) -> Result<(), String> {
    if text.trim().is_empty() {
        return Err("empty narrative".into());
    }
    let missing: Vec<&str> = input
        .values
        .iter()
        .filter(|(_, v)| !text.contains(v.as_str()))
        .map(|(k, _)| k.as_str())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(format!("narrative omits the verbatim value of {}", missing.join(", ")))
    }
}

fn agent_prompt(kind: SourceKind) -> &'static PromptPair {
    let s = &PromptCatalog::builtin().synthesis;
    match kind {
        SourceKind::Merchant => &s.merchant,
        SourceKind::User => &s.user,
        SourceKind::Interaction => &s.interaction,
    }
}

pub(crate) fn agent_of(kind: SourceKind) -> Agent {
    match kind {
        SourceKind::Merchant => Agent::Merchant,
        SourceKind::User => Agent::User,
        SourceKind::Interaction => Agent::Interaction,
    }
}

pub fn narrative_request(input: &NarrativeInput, attempt: u32) -> ChatRequest {
    let payload = json!({"kind": input.kind, "values": input.values}).to_string();
    let attempt = attempt.to_string();
    ChatRequest::new(
        agent_prompt(input.kind).render(&[("attempt", &attempt), ("input", &payload)]),
        NARRATIVE_MAX_TOKENS,
    )
    .with_temperature(AGENT_TEMPERATURE)
    .with_tag(format!("synth.{}", input.kind))
}

/// Run one narrative agent over many inputs with bounded parallelism.
pub fn run_narrative_batch(
    inputs: &[NarrativeInput],
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    max_parallel: usize,
) -> Result<Vec<Result<NarrativeText, RejectionRecord>>, SynthesisError> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let out = validated_batch(
        gateway,
        endpoint,
        max_parallel,
        inputs.len(),
        MAX_ROUNDS,
        |i, attempt| narrative_request(&inputs[i], attempt),
        |i, resp| check_narrative(&inputs[i], &resp.text).map(|_| resp.text.clone()),
    )
    .map_err(SynthesisError::Gateway)?;
    Ok(out
        .into_iter()
        .zip(inputs)
        .map(|(v, input)| match v.outcome {
            Ok(text) => Ok(NarrativeText {
                kind: input.kind,
                text,
                source_ids: input.source_ids.clone(),
                fingerprint: v.fingerprint,
            }),
            Err(rej) => Err(RejectionRecord {
                agent: agent_of(input.kind),
                source_ids: input.source_ids.clone(),
                reason: rej.reason,
                output: rej.output,
            }),
        })
        .collect())
}

/// Single-input form of [`run_narrative_batch`].
pub fn run_narrative_agent(
    input: &NarrativeInput,
    gateway: &Gateway,
    endpoint: &EndpointConfig,
) -> Result<Result<NarrativeText, RejectionRecord>, SynthesisError> {
    input.validate().map_err(SynthesisError::InvalidInput)?;
    Ok(run_narrative_batch(std::slice::from_ref(input), gateway, endpoint, 1)?
        .pop()
        .expect("one result per input"))
}

pub fn instruction_request(narrative: &NarrativeText, attempt: u32) -> ChatRequest {
    let payload = json!({"kind": narrative.kind, "text": narrative.text}).to_string();
    let attempt = attempt.to_string();
    ChatRequest::new(
        PromptCatalog::builtin().synthesis.instruction.render(&[
            ("attempt", &attempt),
            ("text", &narrative.text),
            ("input", &payload),
        ]),
        TEMPLATE_MAX_TOKENS,
    )
    .with_temperature(AGENT_TEMPERATURE)
    .with_tag("synth.instruction")
}

/// Turn narratives into pairs whose output is the narrative text, unchanged.
pub fn generate_instruction_batch(
    narratives: &[NarrativeText],
    mode: SynthesisMode,
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    max_parallel: usize,
) -> Result<Vec<Result<InstructionPair, RejectionRecord>>, SynthesisError> {
    if narratives.is_empty() {
        return Ok(Vec::new());
    }
    let out = validated_batch(
        gateway,
        endpoint,
        max_parallel,
        narratives.len(),
        MAX_ROUNDS,
        |i, attempt| instruction_request(&narratives[i], attempt),
        |_, resp| {
            let q = resp.text.trim();
            if q.is_empty() {
                Err("empty question".to_string())
            } else {
                Ok(q.to_string())
            }
        },
    )
    .map_err(SynthesisError::Gateway)?;
    Ok(out
        .into_iter()
        .zip(narratives)
        .map(|(v, n)| match v.outcome {
            Ok(instruction) => Ok(InstructionPair {
                instruction,
                output: n.text.clone(),
                provenance: Provenance {
                    mode,
                    agent: agent_of(n.kind),
                    source_ids: n.source_ids.clone(),
                    template_id: None,
                    narrative_fingerprint: Some(n.fingerprint.clone()),
                },
            }),
            Err(rej) => Err(RejectionRecord {
                agent: agent_of(n.kind),
                source_ids: n.source_ids.clone(),
                reason: format!("instruction generation: {}", rej.reason),
                output: rej.output,
            }),
        })
        .collect())
}

pub fn generate_instruction(
    narrative: &NarrativeText,
    gateway: &Gateway,
    endpoint: &EndpointConfig,
) -> Result<Result<InstructionPair, RejectionRecord>, SynthesisError> {
    Ok(
        generate_instruction_batch(std::slice::from_ref(narrative), SynthesisMode::MultiAgent, gateway, endpoint, 1)?
            .pop()
            .expect("one result per narrative"),
    )
}
