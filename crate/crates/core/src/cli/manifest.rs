use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::sha256_hex;
use super::CliError;
use crate::container::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one command run. Everything except `timings_ms` is a
/// deterministic function of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_fingerprint: String,
    pub artifacts: Vec<ArtifactEntry>,
    pub timings_ms: Vec<(String, u128)>,
}

/// Writes artifacts atomically under one directory and remembers each.
pub struct ArtifactWriter {
    root: PathBuf,
    manifest: RunManifest,
    started: Instant,
    last: Instant,
}

impl ArtifactWriter {
    pub fn new(root: &Path, command: &str, config_fingerprint: &str) -> Self {
        let now = Instant::now();
        Self {
            root: root.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_fingerprint: config_fingerprint.to_string(),
                artifacts: Vec::new(),
                timings_ms: Vec::new(),
            },
            started: now,
            last: now,
        }
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(rel);
        write_atomic(&path, bytes).map_err(|e| CliError::Data(e.to_string()))?;
        self.manifest.artifacts.push(ArtifactEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Marks the end of a named step for the timing table.
    pub fn lap(&mut self, step: &str) {
        let now = Instant::now();
        self.manifest
            .timings_ms
            .push((step.to_string(), now.duration_since(self.last).as_millis()));
        self.last = now;
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        let total = self.started.elapsed().as_millis();
        self.manifest.timings_ms.push(("total".into(), total));
        let rel = format!("manifest.{}.json", self.manifest.command);
        let mut text =
            serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.root.join(rel), text.as_bytes()).map_err(|e| CliError::Data(e.to_string()))?;
        Ok(self.manifest)
    }
}
