//! Run manifest: a JSON record of what a command did, written beside the
//! outputs on success *and* on failure.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// One timed pipeline stage.
#[derive(Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything needed to audit a run: the command, its resolved
/// configuration, the files it read and wrote, and per-stage wall-clock
/// timings. The timing values are the only fields that vary between
/// otherwise identical runs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub timings: Vec<StageTiming>,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
            error: None,
        }
    }

    pub fn record_input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn record_output(&mut self, path: &Path) {
        let entry = path.display().to_string();
        if !self.outputs.contains(&entry) {
            self.outputs.push(entry);
        }
    }

    /// Write `manifest.json` into `out_dir`. Never touches other outputs.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self).context("serializing manifest")?;
        std::fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
