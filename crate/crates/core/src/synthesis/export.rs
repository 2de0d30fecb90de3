use std::fs;
use std::io;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::fields::all_field_names;
use super::{dedup_pairs, Dataset, InstructionPair};
use crate::manifest::{write_manifest, ArtifactManifest, ManifestContext};

/// Reference fine-tuning settings recorded for external trainers. The
/// toolkit itself does not train.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingHyperparameters {
    pub learning_rate: String,
    pub per_device_batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub epochs: u32,
    pub lr_schedule: String,
    pub loss: String,
}

impl Default for TrainingHyperparameters {
    fn default() -> Self {
        Self {
            learning_rate: "6e-6".to_string(),
            per_device_batch_size: 4,
            gradient_accumulation_steps: 4,
            epochs: 2,
            lr_schedule: "cosine".to_string(),
            loss: "output_tokens_only".to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("dataset is empty")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("line {line}: {reason}")]
    Schema { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExport {
    pub pairs_written: usize,
    pub duplicates_removed: usize,
    pub manifest: ArtifactManifest,
}

fn placeholder_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let names = all_field_names().join("|");
        Regex::new(&format!(r"\{{({names})\}}")).expect("valid regex")
    })
}

/// True when `text` still carries a `{field}` slot of any known field.
pub fn has_unresolved_placeholder(text: &str) -> bool {
    placeholder_pattern().is_match(text)
}

/// Schema check for one parsed training line.
pub fn validate_training_value(value: &Value) -> Result<InstructionPair, String> {
    let obj = value.as_object().ok_or("line is not a JSON object")?;
    for key in obj.keys() {
        if !["instruction", "output", "provenance"].contains(&key.as_str()) {
            return Err(format!("unexpected key `{key}`"));
        }
    }
    let pair: InstructionPair = serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
    if pair.instruction.trim().is_empty() {
        return Err("empty instruction".into());
    }
    if pair.output.trim().is_empty() {
        return Err("empty output".into());
    }
    if has_unresolved_placeholder(&pair.instruction) || has_unresolved_placeholder(&pair.output) {
        return Err("unresolved placeholder".into());
    }
    Ok(pair)
}

/// Write `{"instruction", "output", "provenance"}` JSONL plus a manifest.
pub fn export_training_file(
    dataset: &Dataset,
    path: &Path,
    context: &ManifestContext,
) -> Result<TrainingExport, ExportError> {
    if dataset.pairs.is_empty() {
        return Err(ExportError::Empty);
    }
    let mut pairs = dataset.pairs.clone();
    let duplicates_removed = dedup_pairs(&mut pairs);
    let mut text = String::new();
    for p in &pairs {
        text.push_str(&serde_json::to_string(p).expect("pairs serialize"));
        text.push('\n');
    }
    let write_err = |source| ExportError::Write { path: path.display().to_string(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(write_err)?;
    }
    fs::write(path, text).map_err(write_err)?;
    let mut by_agent = std::collections::BTreeMap::new();
    for p in &pairs {
        *by_agent.entry(p.provenance.agent.as_str()).or_insert(0usize) += 1;
    }
    let details = json!({
        "kind": "training_file",
        "mode": dataset.mode,
        "pairs": pairs.len(),
        "pairs_by_agent": by_agent,
        "duplicates_removed": duplicates_removed,
        "format": {"fields": ["instruction", "output", "provenance"], "loss_on": "output"},
        "hyperparameters": TrainingHyperparameters::default(),
    });
    let manifest = write_manifest(path, Some(dataset.seed), context, details).map_err(write_err)?;
    Ok(TrainingExport { pairs_written: pairs.len(), duplicates_removed, manifest })
}

/// Read and schema-check a training file.
pub fn read_training_file(path: &Path) -> Result<Vec<InstructionPair>, ExportError> {
    let text = fs::read_to_string(path).map_err(|source| ExportError::Read { path: path.display().to_string(), source })?;
    parse_training_jsonl(&text)
}

pub fn parse_training_jsonl(text: &str) -> Result<Vec<InstructionPair>, ExportError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| ExportError::Schema { line: i + 1, reason: e.to_string() })?;
        out.push(validate_training_value(&value).map_err(|reason| ExportError::Schema { line: i + 1, reason })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{Agent, Provenance, SynthesisMode};

    fn pair(i: &str, o: &str) -> InstructionPair {
        InstructionPair {
            instruction: i.into(),
            output: o.into(),
            provenance: Provenance {
                mode: SynthesisMode::TemplateOnly,
                agent: Agent::Template,
                source_ids: vec!["m1".into()],
                template_id: Some("t#1".into()),
                narrative_fingerprint: None,
            },
        }
    }

    #[test]
    fn export_dedups_and_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        let ds = Dataset {
            mode: SynthesisMode::TemplateOnly,
            seed: 3,
            pairs: vec![pair("q1", "a1"), pair("q2", "a2"), pair("q1", "a1")],
        };
        let out = export_training_file(&ds, &path, &ManifestContext::default()).unwrap();
        assert_eq!(out.duplicates_removed, 1);
        assert_eq!(out.manifest.details["hyperparameters"]["learning_rate"], "6e-6");
        assert_eq!(out.manifest.details["hyperparameters"]["epochs"], 2);
        let back = read_training_file(&path).unwrap();
        assert_eq!(back, vec![pair("q1", "a1"), pair("q2", "a2")]);
    }

    #[test]
    fn schema_rejects_placeholders_and_extra_keys() {
        let v = serde_json::to_value(pair("About {name}", "x")).unwrap();
        assert!(validate_training_value(&v).is_err());
        let mut v = serde_json::to_value(pair("q", "a")).unwrap();
        v["extra"] = json!(1);
        assert!(validate_training_value(&v).is_err());
        assert!(export_training_file(
            &Dataset { mode: SynthesisMode::MultiAgent, seed: 0, pairs: vec![] },
            Path::new("/nonexistent/x.jsonl"),
            &ManifestContext::default()
        )
        .is_err());
    }
}
