//! Provenance records written beside every artifact.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::digest::sha256_hex;

pub const TOOL_NAME: &str = "localeval";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Caller-supplied context folded into a manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestContext {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Input name → SHA-256 of its content.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub tool: String,
    pub tool_version: String,
    pub artifact: String,
    pub artifact_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub inputs: BTreeMap<String, String>,
    pub details: Value,
}

/// `<artifact>.manifest.json`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

/// Hash the artifact as written on disk and store its manifest beside it.
pub fn write_manifest(
    artifact: &Path,
    seed: Option<u64>,
    context: &ManifestContext,
    details: Value,
) -> io::Result<ArtifactManifest> {
    let bytes = fs::read(artifact)?;
    let manifest = ArtifactManifest {
        tool: TOOL_NAME.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        artifact: artifact
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        artifact_sha256: sha256_hex(&bytes),
        seed,
        config_hash: context.config_hash.clone(),
        inputs: context.inputs.clone(),
        details,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    fs::write(manifest_path(artifact), text + "\n")?;
    Ok(manifest)
}

pub fn read_manifest(artifact: &Path) -> io::Result<ArtifactManifest> {
    let text = fs::read_to_string(manifest_path(artifact))?;
    serde_json::from_str(&text).map_err(io::Error::other)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_beside_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("run.json");
        fs::write(&a, "{}").unwrap();
        let m = write_manifest(&a, Some(7), &ManifestContext::default(), serde_json::json!({"k": 1})).unwrap();
        assert_eq!(manifest_path(&a), dir.path().join("run.json.manifest.json"));
        assert_eq!(read_manifest(&a).unwrap(), m);
        assert_eq!(m.artifact_sha256, sha256_hex(b"{}"));
    }
}
