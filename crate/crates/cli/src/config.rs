//! Run configuration: one JSON document, overridable key by key from flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use sedtalker_core::animator::{AnimatorConfig, AnimatorTrainConfig, SynthConfig};
use sedtalker_core::corpus::{EmotionClass, SplitRatios};
use sedtalker_core::diarization::TimelineConfig;
use sedtalker_core::io::Dtype;
use sedtalker_core::sed::{SedHeadConfig, SedTrainConfig, SyntheticSetConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub sed: SedSection,
    #[serde(default)]
    pub diarization: TimelineConfig,
    #[serde(default)]
    pub animator: AnimatorSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub split: SplitRatios,
    /// Raw label → class, applied on top of the mapping file for every source.
    pub label_overrides: BTreeMap<String, EmotionClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SedSection {
    pub head: SedHeadConfig,
    pub train: SedTrainConfig,
    /// Used by `synth-sed` only.
    pub synthetic: SyntheticSetConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnimatorSection {
    pub model: AnimatorConfig,
    pub train: AnimatorTrainConfig,
    pub synth: SynthConfig,
    pub checkpoint_dtype: Dtype,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub bootstrap_resamples: usize,
    pub ci_level: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { bootstrap_resamples: 1000, ci_level: 0.95 }
    }
}

impl RunConfig {
    /// Builds the config from an optional file, then `--seed`, then each
    /// `key.path=value` override in order. Values parse as JSON and fall back
    /// to plain strings.
    pub fn load(path: Option<&Path>, seed: Option<u64>, overrides: &[String]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", p.display()))?
            }
            None => Value::Object(Map::new()),
        };
        if let Some(s) = seed {
            set_path(&mut doc, "seed", Value::from(s))?;
        }
        for o in overrides {
            let Some((key, raw)) = o.split_once('=') else {
                bail!("override `{o}` is not of the form key.path=value");
            };
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key.trim(), value)?;
        }
        let config: RunConfig = serde_json::from_value(doc).context("invalid run configuration")?;
        config.diarization.validate()?;
        Ok(config)
    }

    /// SHA-256 of the resolved config in canonical (sorted-key) JSON.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&serde_json::to_value(self).expect("config serializes")).expect("value serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("malformed config key `{key}`");
    }
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            bail!("config key `{key}`: `{}` is not a section", parts[..i].join("."));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("loop returns on the last key part")
}
