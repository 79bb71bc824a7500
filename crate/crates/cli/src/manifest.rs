//! Run manifests: what was run, from which configuration, and digests of every output.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;
use crate::error::Result;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config_sha256: String,
    /// Digest of the calibration grid, for `calibrate`.
    pub grid_sha256: Option<String>,
    pub seed: u64,
    pub reps: Option<usize>,
    pub threads: Option<usize>,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputEntry>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, config_sha256: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            config_sha256: config_sha256.to_string(),
            grid_sha256: None,
            seed,
            reps: None,
            threads: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    /// Records digests of `files` (relative to `dir`), then writes the manifest itself.
    pub fn finish(mut self, dir: &Path, files: &[String]) -> Result<Self> {
        for f in files {
            let bytes = std::fs::read(dir.join(f))?;
            self.outputs.push(OutputEntry { path: f.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
        self.finished_unix = unix_now();
        std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(dir.join(MANIFEST))?)?)
    }
}
