use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::fields::{FieldCombination, FieldRecord};
use super::{Agent, InstructionPair, Provenance, SynthesisError, SynthesisMode};
use crate::gateway::{validated_batch, ChatRequest, EndpointConfig, EndpointKind, Gateway};
use crate::prompts::PromptCatalog;

pub const MIN_TEMPLATES: usize = 10;
pub const MAX_ROUNDS: u32 = 3;
pub const TEMPLATE_MAX_TOKENS: u32 = 512;
pub const AGENT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub template_id: String,
    pub combination: FieldCombination,
    pub instruction_template: String,
    pub output_template: String,
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("valid regex"))
}

/// Placeholder names in order of first appearance.
pub fn placeholders(text: &str) -> Vec<String> {
    let mut seen = Vec::new();
    for c in placeholder_re().captures_iter(text) {
        let name = c[1].to_string();
        if !seen.contains(&name) {
            seen.push(name);
        }
    }
    seen
}

/// Check a candidate template against its combination.
pub fn validate_template(combination: &FieldCombination, instruction: &str, output: &str) -> Result<(), String> {
    if instruction.trim().is_empty() || output.trim().is_empty() {
        return Err("empty template text".into());
    }
    let mut used = BTreeSet::new();
    for name in placeholders(instruction).into_iter().chain(placeholders(output)) {
        if !combination.contains(&name) {
            return Err(format!("unknown placeholder {{{name}}}"));
        }
        used.insert(name);
    }
    let missing: Vec<&str> = combination
        .fields
        .iter()
        .filter(|f| !used.contains(*f))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(format!("missing placeholder(s) {}", missing.join(", ")));
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateBatch {
    pub templates: Vec<TemplateSpec>,
    /// Candidates discarded by validation, with reasons.
    pub rejected: Vec<String>,
    pub warnings: Vec<String>,
    pub rounds: u32,
}

#[derive(Deserialize)]
struct Candidate {
    instruction: String,
    output: String,
}

fn parse_candidates(text: &str) -> Result<Vec<Candidate>, String> {
    let start = text.find('[').ok_or("no JSON array in response")?;
    let end = text.rfind(']').ok_or("no JSON array in response")?;
    if end < start {
        return Err("no JSON array in response".into());
    }
    let values: Vec<serde_json::Value> =
        serde_json::from_str(&text[start..=end]).map_err(|e| format!("response is not a JSON array: {e}"))?;
    Ok(values
        .into_iter()
        .filter_map(|v| serde_json::from_value::<Candidate>(v).ok())
        .collect())
}

/// Ask the template agent for at least [`MIN_TEMPLATES`] templates.
///
/// Up to [`MAX_ROUNDS`] rounds are run while the validated count is short.
/// A persistent shortfall is reported as a warning; no valid template at
/// all is an error. `seed` is sent as a variation hint to remote endpoints
/// only, so mock runs depend on the combination alone.
pub fn generate_templates(
    combination: &FieldCombination,
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    seed: u64,
) -> Result<TemplateBatch, SynthesisError> {
    combination.validate().map_err(SynthesisError::InvalidCombination)?;
    let prompt = &PromptCatalog::builtin().synthesis.template;
    let mut batch = TemplateBatch::default();
    let mut seen = BTreeSet::new();
    for round in 1..=MAX_ROUNDS {
        if batch.templates.len() >= MIN_TEMPLATES {
            break;
        }
        batch.rounds = round;
        let mut input = json!({
            "kind": combination.kind,
            "fields": combination.fields,
            "have": batch.templates.len(),
            "round": round,
        });
        if endpoint.kind == EndpointKind::Remote {
            input["variation"] = json!(seed);
        }
        let input = input.to_string();
        let fields = combination.fields.join(", ");
        let min = MIN_TEMPLATES.to_string();
        let round_text = round.to_string();
        let request = ChatRequest::new(
            prompt.render(&[
                ("min_templates", &min),
                ("kind", combination.kind.as_str()),
                ("fields", &fields),
                ("round", &round_text),
                ("input", &input),
            ]),
            TEMPLATE_MAX_TOKENS,
        )
        .with_temperature(AGENT_TEMPERATURE)
        .with_tag("synth.template");
        let out = validated_batch(gateway, endpoint, 1, 1, 1, |_, _| request.clone(), |_, r| parse_candidates(&r.text))
            .map_err(SynthesisError::Gateway)?;
        let candidates = match out.into_iter().next().map(|v| v.outcome) {
            Some(Ok(c)) => c,
            Some(Err(rej)) => {
                batch.rejected.push(format!("round {round}: {}", rej.reason));
                continue;
            }
            None => continue,
        };
        for c in candidates {
            match validate_template(combination, &c.instruction, &c.output) {
                Ok(()) => {
                    if seen.insert((c.instruction.clone(), c.output.clone())) {
                        let template_id = format!("{}#{}", combination.id(), batch.templates.len() + 1);
                        batch.templates.push(TemplateSpec {
                            template_id,
                            combination: combination.clone(),
                            instruction_template: c.instruction,
                            output_template: c.output,
                        });
                    }
                }
                Err(reason) => batch.rejected.push(format!("round {round}: {reason}")),
            }
        }
    }
    if batch.templates.is_empty() {
        return Err(SynthesisError::NoValidTemplates {
            combination: combination.id(),
            rejected: batch.rejected.len(),
        });
    }
    if batch.templates.len() < MIN_TEMPLATES {
        batch.warnings.push(format!(
            "{}: only {} valid template(s) after {} round(s); {} candidate(s) rejected",
            combination.id(),
            batch.templates.len(),
            batch.rounds,
            batch.rejected.len()
        ));
    } else if !batch.rejected.is_empty() {
        batch.warnings.push(format!(
            "{}: {} candidate(s) rejected",
            combination.id(),
            batch.rejected.len()
        ));
    }
    Ok(batch)
}

/// Substitute `record` into `text`. All placeholders are replaced in one
/// pass, so braces inside values are never re-expanded.
pub fn substitute(text: &str, record: &FieldRecord) -> String {
    placeholder_re()
        .replace_all(text, |c: &regex::Captures| record.get(&c[1]).to_string())
        .into_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPairing {
    pub template_id: String,
    pub source_ids: Vec<String>,
    pub reason: String,
}

/// Cross every template with every record of the same kind.
pub fn instantiate_templates(
    templates: &[TemplateSpec],
    records: &[FieldRecord],
    mode: SynthesisMode,
) -> (Vec<InstructionPair>, Vec<SkippedPairing>) {
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for t in templates {
        for r in records.iter().filter(|r| r.kind == t.combination.kind) {
            let empty: Vec<&str> = t
                .combination
                .fields
                .iter()
                .filter(|f| r.get(f).trim().is_empty())
                .map(String::as_str)
                .collect();
            if !empty.is_empty() {
                let reason = format!("empty field(s) {}", empty.join(", "));
                log::debug!("skip {} on {:?}: {reason}", t.template_id, r.source_ids);
                skipped.push(SkippedPairing {
                    template_id: t.template_id.clone(),
                    source_ids: r.source_ids.clone(),
                    reason,
                });
                continue;
            }
            let instruction = substitute(&t.instruction_template, r);
            let output = substitute(&t.output_template, r);
            if let Some(f) = t
                .combination
                .fields
                .iter()
                .find(|f| instruction.contains(&format!("{{{f}}}")) || output.contains(&format!("{{{f}}}")))
            {
                skipped.push(SkippedPairing {
                    template_id: t.template_id.clone(),
                    source_ids: r.source_ids.clone(),
                    reason: format!("value leaves placeholder {{{f}}} unresolved"),
                });
                continue;
            }
            pairs.push(InstructionPair {
                instruction,
                output,
                provenance: Provenance {
                    mode,
                    agent: Agent::Template,
                    source_ids: r.source_ids.clone(),
                    template_id: Some(t.template_id.clone()),
                    narrative_fingerprint: None,
                },
            });
        }
    }
    (pairs, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::fields::SourceKind;
    use std::collections::BTreeMap;

    fn combo() -> FieldCombination {
        FieldCombination::new(SourceKind::Merchant, &["name", "introduction", "category"]).unwrap()
    }

    #[test]
    fn validation_rules() {
        let c = combo();
        assert!(validate_template(&c, "A merchant named {name} with self-description {introduction}, what is their business category?", "The merchant belongs to {category}.").is_ok());
        assert!(validate_template(&c, "{name} {introduction} {price}", "{category}").unwrap_err().contains("{price}"));
        assert!(validate_template(&c, "{name}", "{category}").unwrap_err().contains("introduction"));
        assert!(validate_template(&c, "", "{name}").is_err());
    }

    #[test]
    fn substitution_is_single_pass() {
        let mut values = BTreeMap::new();
        values.insert("name".to_string(), "Odd {category} Shop".to_string());
        values.insert("category".to_string(), "Spa".to_string());
        let r = FieldRecord { kind: SourceKind::Merchant, source_ids: vec!["m1".into()], values };
        assert_eq!(substitute("{name} / {category}", &r), "Odd {category} Shop / Spa");
    }

    #[test]
    fn empty_fields_are_skipped() {
        let t = TemplateSpec {
            template_id: "t#1".into(),
            combination: combo(),
            instruction_template: "A merchant named {name}: {introduction}".into(),
            output_template: "{category}".into(),
        };
        let mk = |intro: &str| {
            let mut values = BTreeMap::new();
            values.insert("name".to_string(), "Lakeview Spa".to_string());
            values.insert("introduction".to_string(), intro.to_string());
            values.insert("category".to_string(), "Spa".to_string());
            FieldRecord { kind: SourceKind::Merchant, source_ids: vec!["m".into()], values }
        };
        let (pairs, skipped) = instantiate_templates(&[t], &[mk("quiet rooms"), mk("")], SynthesisMode::TemplateOnly);
        assert_eq!(pairs.len(), 1);
        assert!(pairs[0].instruction.contains("Lakeview Spa"));
        assert!(!pairs[0].instruction.contains('{'));
        assert_eq!(skipped.len(), 1);
    }
}
