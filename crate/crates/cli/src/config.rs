//! Pipeline configuration: TOML file, then environment, then flags.

use std::path::{Path, PathBuf};

use deixis_core::hint::dataset::AblationConfig;
use deixis_core::qa::QaConfig;
use deixis_core::{GenConfig, ResolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RephraserKind {
    Rule,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RephraserConfig {
    pub mode: RephraserKind,
    pub endpoint: String,
    pub timeout_s: f64,
    pub retries: usize,
    pub max_inflight: usize,
    /// Fall back to rule rephrasing when the service fails.
    pub fallback: bool,
}

impl Default for RephraserConfig {
    fn default() -> Self {
        RephraserConfig {
            mode: RephraserKind::Rule,
            endpoint: "http://127.0.0.1:8080".into(),
            timeout_s: 10.0,
            retries: 2,
            max_inflight: 4,
            fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub n_clips: usize,
    /// Hand-token confidence gate.
    pub tau: f64,
    pub gen: GenConfig,
    pub resolver: ResolverConfig,
    pub qa: QaConfig,
    pub rephraser: RephraserConfig,
    pub adapter: AblationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            n_clips: 500,
            tau: 0.5,
            gen: GenConfig::default(),
            resolver: ResolverConfig::default(),
            qa: QaConfig::default(),
            rephraser: RephraserConfig::default(),
            adapter: AblationConfig::default(),
        }
    }
}

/// Dotted paths present in `input` but absent from `known`.
fn unknown_keys(input: &toml::Value, known: &toml::Value, prefix: &str, out: &mut Vec<String>) {
    if let (toml::Value::Table(a), toml::Value::Table(b)) = (input, known) {
        for (k, v) in a {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match b.get(k) {
                Some(kv) => unknown_keys(v, kv, &path, out),
                None => out.push(path),
            }
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig, CliError> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let config: PipelineConfig =
            raw.clone().try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let known = toml::Value::try_from(&config).map_err(|e| CliError::Config(e.to_string()))?;
        let mut unknown = Vec::new();
        unknown_keys(&raw, &known, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(CliError::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        Ok(config)
    }

    pub fn load(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
        match path {
            Some(p) => PipelineConfig::from_toml(&std::fs::read_to_string(p).map_err(CliError::io(p))?),
            None => Ok(PipelineConfig::default()),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_clips == 0 {
            return Err(CliError::Config("n_clips must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(CliError::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        self.gen.validate()?;
        self.resolver.validate().map_err(CliError::Config)?;
        self.qa.validate().map_err(CliError::Config)?;
        if self.rephraser.max_inflight == 0 || !(self.rephraser.timeout_s > 0.0) {
            return Err(CliError::Config("rephraser needs max_inflight ≥ 1 and a positive timeout".into()));
        }
        Ok(())
    }

    /// Ablation settings with the pipeline-level seed and gate applied.
    pub fn ablation(&self) -> AblationConfig {
        AblationConfig { tau: self.tau, ..self.adapter.clone() }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(canonical.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Loaded config plus the global flags every command sees.
pub struct Settings {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub force: bool,
}
