//! Run configuration: one TOML file with a section per stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::instruct::BuildPlan;
use crate::llm::{EndpointConfig, MockMode};
use crate::metadata::{LargeTablePolicy, MetadataPromptOptions};
use crate::parse::{ParseOptions, DEFAULT_HEADER_MATCH};
use crate::report::RenderOptions;
use crate::utility::{BoostParams, ForestParams, LinearParams, Metric, ModelFamily, ModelSpec, TstrOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetadataSection {
    pub token_budget: usize,
    /// Embed a stratified sample instead of failing when over budget.
    pub sample_large_tables: bool,
    pub sample_rows: usize,
    pub seed: u64,
    /// Metadata JSON used as the in-context example; the built-in one if unset.
    pub exemplar: Option<PathBuf>,
}

impl Default for MetadataSection {
    fn default() -> Self {
        MetadataSection { token_budget: 8000, sample_large_tables: false, sample_rows: 200, seed: 0, exemplar: None }
    }
}

impl MetadataSection {
    pub fn prompt_options(&self) -> MetadataPromptOptions {
        MetadataPromptOptions {
            token_budget: self.token_budget,
            large_table: if self.sample_large_tables {
                LargeTablePolicy::Sample { rows: self.sample_rows }
            } else {
                LargeTablePolicy::Reject
            },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    /// Answer from an offline mock instead of the endpoint.
    pub mock: Option<MockMode>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseSection {
    pub header_match_threshold: f64,
}

impl Default for ParseSection {
    fn default() -> Self {
        ParseSection { header_match_threshold: DEFAULT_HEADER_MATCH }
    }
}

impl ParseSection {
    pub fn options(&self) -> ParseOptions {
        ParseOptions { header_match_threshold: self.header_match_threshold, ..ParseOptions::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelitySection {
    /// Also average scores over each generation separately.
    pub per_instance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilitySection {
    pub test_fraction: f64,
    pub split_seed: u64,
    pub model_seed: u64,
    pub families: Vec<ModelFamily>,
    pub metric: Option<Metric>,
    pub baseline: bool,
    pub linear: LinearParams,
    pub forest: ForestParams,
    pub boost: BoostParams,
}

impl Default for UtilitySection {
    fn default() -> Self {
        UtilitySection {
            test_fraction: 0.2,
            split_seed: 0,
            model_seed: 0,
            families: ModelFamily::ALL.to_vec(),
            metric: None,
            baseline: true,
            linear: LinearParams::default(),
            forest: ForestParams::default(),
            boost: BoostParams::default(),
        }
    }
}

impl UtilitySection {
    pub fn specs(&self) -> Vec<ModelSpec> {
        self.families
            .iter()
            .map(|&family| ModelSpec { family, seed: self.model_seed, linear: self.linear, forest: self.forest, boost: self.boost })
            .collect()
    }

    pub fn options(&self) -> TstrOptions {
        TstrOptions { test_fraction: self.test_fraction, split_seed: self.split_seed, metric: self.metric, baseline: self.baseline }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Registry manifest; relative paths resolve against the config file.
    pub registry: Option<PathBuf>,
    pub build: BuildPlan,
    pub metadata: MetadataSection,
    pub endpoint: EndpointConfig,
    pub generate: GenerateSection,
    pub parse: ParseSection,
    pub fidelity: FidelitySection,
    pub utility: UtilitySection,
    pub report: RenderOptions,
}

impl Config {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Config, ConfigError> {
        let mut cfg: Config =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(r) = cfg.registry.as_mut().filter(|r| r.is_relative()) {
            *r = base.join(&*r);
        }
        if let Some(e) = cfg.metadata.exemplar.as_mut().filter(|e| e.is_relative()) {
            *e = base.join(&*e);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Config::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON form. The API key is never part of it.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Secret;

    #[test]
    fn defaults_round_trip() {
        let cfg = Config::default();
        let back = Config::from_toml_str(&cfg.to_toml_string(), Path::new("c.toml")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.build.n_rows, 20);
        assert_eq!(back.utility.specs().len(), 3);
    }

    #[test]
    fn sections_are_partial_and_strict() {
        let cfg = Config::from_toml_str("registry = \"reg.toml\"\n[build]\nseed = 7\n", Path::new("/cfg/run.toml")).unwrap();
        assert_eq!(cfg.build.seed, 7);
        assert_eq!(cfg.build.train_instances_per_table, 500);
        assert_eq!(cfg.registry.unwrap(), PathBuf::from("/cfg/reg.toml"));
        assert!(Config::from_toml_str("[build]\nsede = 7\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn hash_ignores_key() {
        let a = Config::default();
        let mut b = a.clone();
        b.endpoint.api_key = Some(Secret::new("sk-live"));
        assert_eq!(a.hash(), b.hash());
        b.build.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
