//! JSON documents with the shared reproducibility header.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use sedtalker_core::io::write_atomic;

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
const HEADER_KEYS: [&str; 3] = ["format_version", "tool_version", "config_hash"];

/// Serializes `body` (a JSON object) with the header keys merged in.
pub fn render<T: Serialize>(body: &T, config_hash: &str) -> Result<Vec<u8>> {
    let Value::Object(fields) = serde_json::to_value(body)? else {
        bail!("output body must be a JSON object");
    };
    let mut doc = Map::new();
    doc.insert("format_version".into(), FORMAT_VERSION.into());
    doc.insert("tool_version".into(), TOOL_VERSION.into());
    doc.insert("config_hash".into(), config_hash.into());
    for (k, v) in fields {
        if HEADER_KEYS.contains(&k.as_str()) {
            bail!("output body uses reserved key `{k}`");
        }
        doc.insert(k, v);
    }
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(doc))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, body: &T, config_hash: &str) -> Result<()> {
    let bytes = render(body, config_hash)?;
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn read_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))
}

/// Reads a document written by [`write_json`], or a bare body without header.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut v = read_value(path)?;
    if let Value::Object(map) = &mut v {
        if let Some(version) = map.get("format_version") {
            if version.as_u64() != Some(FORMAT_VERSION as u64) {
                bail!("{}: unsupported format_version {version}", path.display());
            }
        }
        for k in HEADER_KEYS {
            map.remove(k);
        }
    }
    serde_json::from_value(v).with_context(|| format!("{} does not match the expected schema", path.display()))
}
