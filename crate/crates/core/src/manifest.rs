//! Provenance for every output directory: `manifest.jsonl`, one line per run.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::llm::RedactedEndpoint;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_hash: String,
    pub registry_version: Option<String>,
    pub registry_digest: Option<String>,
    pub endpoint: Option<RedactedEndpoint>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, args: Vec<String>, config_hash: impl Into<String>) -> RunManifest {
        RunManifest {
            command: command.into(),
            args,
            config_hash: config_hash.into(),
            registry_version: None,
            registry_digest: None,
            endpoint: None,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: now(),
            finished_at: String::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> RunManifest {
        self.seeds.insert(name.to_string(), value);
        self
    }

    /// Stamps the finish time and appends one line to `dir/manifest.jsonl`.
    pub fn append_to(mut self, dir: &Path) -> std::io::Result<PathBuf> {
        self.finished_at = now();
        std::fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&path)?;
        let line = serde_json::to_string(&self).expect("manifest serializes");
        writeln!(f, "{line}")?;
        f.sync_data()?;
        Ok(path)
    }
}

pub fn read_manifests(dir: &Path) -> std::io::Result<Vec<RunManifest>> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
        .collect()
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
