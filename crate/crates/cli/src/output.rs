//! Output helpers: run directories, manifests and timing sidecars.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// An input file recorded in the manifest.
#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub role: String,
    pub source: String,
    pub sha256: String,
}

impl InputRecord {
    pub fn new(role: &str, source: &str, content: &[u8]) -> Self {
        Self { role: role.into(), source: source.into(), sha256: sha256_hex(content) }
    }
}

/// Everything needed to rerun a command bit-exactly. The thread count is
/// left out on purpose: it never changes results.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub inputs: Vec<InputRecord>,
}

pub fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    seed: u64,
    config: &C,
    inputs: Vec<InputRecord>,
) -> Result<(), CliError> {
    let m = Manifest { command, version: env!("CARGO_PKG_VERSION"), seed, config, inputs };
    write_json(&dir.join("manifest.json"), &m)
}

/// Wall-clock figures live apart from the deterministic outputs.
pub fn write_timing(dir: &Path, seconds: f64, extra: serde_json::Value) -> Result<(), CliError> {
    let mut v = serde_json::json!({ "wall_clock_seconds": seconds });
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    write_json(&dir.join("timing.json"), &v)
}

/// Shortest round-trip decimal; non-finite values as `inf`, `-inf`, `NaN`.
pub fn num(x: f64) -> String {
    x.to_string()
}
