//! Run manifests. Content that must be reproducible goes in the manifest;
//! the wall-clock timestamp lives in a `.time` sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    /// File name only, so manifests do not depend on the output directory.
    pub name: String,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
    /// Set when inputs with a different config hash were accepted via --force.
    #[serde(default)]
    pub forced: bool,
    pub stats: serde_json::Value,
}

/// `dir/clips.jsonl` → `dir/clips.manifest.json`.
pub fn manifest_path(data: &Path) -> PathBuf {
    let stem = data.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    data.with_file_name(format!("{stem}.manifest.json"))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn file_name(path: &Path) -> String {
    path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

pub fn file_ref(path: &Path, config_hash: Option<String>) -> Result<FileRef, CliError> {
    Ok(FileRef { name: file_name(path), sha256: sha256_file(path)?, config_hash })
}

/// The manifest written next to `data`, if any.
pub fn read_manifest(data: &Path) -> Result<Option<Manifest>, CliError> {
    let path = manifest_path(data);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError::Parse { path, line: e.line(), message: e.to_string() })
}

/// Refuses inputs produced under a different config unless `force`.
/// Returns the input refs and whether a mismatch was overridden.
pub fn check_inputs(inputs: &[&Path], config_hash: &str, force: bool) -> Result<(Vec<FileRef>, bool), CliError> {
    let mut refs = Vec::new();
    let mut mismatched = Vec::new();
    for path in inputs {
        let hash = read_manifest(path)?.map(|m| m.config_hash);
        if let Some(h) = &hash {
            if h != config_hash {
                mismatched.push(format!("{} ({})", path.display(), &h[..12.min(h.len())]));
            }
        }
        refs.push(file_ref(path, hash)?);
    }
    if !mismatched.is_empty() && !force {
        return Err(CliError::Validation(format!(
            "inputs were produced under a different config (current {}): {}; rerun with --force to accept",
            &config_hash[..12],
            mismatched.join(", ")
        )));
    }
    if !mismatched.is_empty() {
        eprintln!("warning: accepting mismatched config hashes: {}", mismatched.join(", "));
    }
    Ok((refs, !mismatched.is_empty()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

/// Writes `<stem>.manifest.json` and its timestamp sidecar next to `data`.
pub fn write_manifest(data: &Path, manifest: &Manifest) -> Result<PathBuf, CliError> {
    let path = manifest_path(data);
    write_json(&path, manifest)?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let sidecar = path.with_extension("time");
    fs::write(&sidecar, format!("{{\"written_unix\": {secs}}}\n")).map_err(CliError::io(&sidecar))?;
    Ok(path)
}
