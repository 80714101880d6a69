//! Run manifests written next to each command's primary output.

use anyhow::{Context, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    /// Seconds since the epoch, UTC.
    pub started_at: f64,
    pub finished_at: f64,
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// `<output>.manifest.json`, or `manifest.json` inside a directory output.
pub fn manifest_path(primary: &Path) -> PathBuf {
    if primary.is_dir() {
        return primary.join("manifest.json");
    }
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

impl RunManifest {
    pub fn write(&self) -> Result<()> {
        let primary = self.outputs.first().context("manifest without outputs")?;
        let path = manifest_path(primary);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}
