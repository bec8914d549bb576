//! Dataset registry: which tables exist, where their CSVs live, whether they
//! feed training, and (for utility evaluation) their prediction target.
//!
//! The manifest is TOML:
//!
//! ```toml
//! version = "1"
//!
//! [[dataset]]
//! id = "iris"
//! topic = "General Machine Learning Benchmarks"
//! source = "data/iris.csv"     # relative to the manifest
//! train = true
//! target = "species"           # optional; requires `task`
//! task = "classification"      # classification | regression
//! rows = 150                   # optional, checked when loading
//! columns = 5                  # optional, checked when loading
//!
//! [dataset.dtypes]             # optional dtype overrides
//! species = "categorical"
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{load_csv, DataType, Table, TableError};

const BUILTIN_MANIFEST: &str = include_str!("../registry/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "classification" => Ok(Task::Classification),
            "regression" => Ok(Task::Regression),
            other => Err(format!("unknown task {other:?} (classification, regression)")),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRegistryEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub topic: String,
    #[serde(rename = "source")]
    pub source_path: PathBuf,
    #[serde(rename = "train")]
    pub is_train: bool,
    #[serde(default, rename = "target", skip_serializing_if = "Option::is_none")]
    pub target_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub dtypes: BTreeMap<String, DataType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<usize>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read registry {path}: {message}")]
    Io { path: String, message: String },
    #[error("registry parse error: {0}")]
    Parse(String),
    #[error("dataset {id:?}: {message}")]
    Invalid { id: String, message: String },
    #[error("dataset {id:?}: {source}")]
    Table { id: String, source: TableError },
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub version: String,
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<DatasetRegistryEntry>,
    /// Directory that relative `source` paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Registry {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Registry, RegistryError> {
        let mut reg: Registry = toml::from_str(text).map_err(|e| RegistryError::Parse(e.to_string()))?;
        reg.base_dir = base_dir.into();
        reg.validate()?;
        Ok(reg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Registry, RegistryError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| RegistryError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Registry::from_toml_str(&text, base)
    }

    /// The shipped manifest of the 20 source tables (14 train, 6 held out).
    pub fn builtin() -> Registry {
        Registry::from_toml_str(BUILTIN_MANIFEST, ".").expect("builtin registry is valid")
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("registry serializes")
    }

    pub fn get(&self, id: &str) -> Result<&DatasetRegistryEntry, RegistryError> {
        self.datasets.iter().find(|d| d.id == id).ok_or_else(|| RegistryError::UnknownDataset(id.to_string()))
    }

    pub fn resolve(&self, entry: &DatasetRegistryEntry) -> PathBuf {
        if entry.source_path.is_absolute() {
            entry.source_path.clone()
        } else {
            self.base_dir.join(&entry.source_path)
        }
    }

    /// Loads one dataset's CSV with its dtype overrides and checks the entry
    /// against the resulting table.
    pub fn load_table(&self, entry: &DatasetRegistryEntry) -> Result<Table, RegistryError> {
        let overrides: HashMap<String, DataType> = entry.dtypes.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let table = load_csv(self.resolve(entry), if overrides.is_empty() { None } else { Some(&overrides) })
            .map_err(|source| RegistryError::Table { id: entry.id.clone(), source })?;
        entry.check_table(&table)?;
        Ok(table)
    }

    /// Short content digest used as the registry version in run manifests.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let h = Sha256::digest(self.to_toml_string().as_bytes());
        format!("{}:{}", self.version, &hex::encode(h)[..12])
    }

    fn validate(&self) -> Result<(), RegistryError> {
        let mut ids = HashSet::new();
        for d in &self.datasets {
            if d.id.trim().is_empty() {
                return Err(RegistryError::Invalid { id: d.id.clone(), message: "empty id".into() });
            }
            if !ids.insert(d.id.as_str()) {
                return Err(RegistryError::Invalid { id: d.id.clone(), message: "duplicate id".into() });
            }
            if d.target_column.is_some() != d.task.is_some() {
                return Err(RegistryError::Invalid {
                    id: d.id.clone(),
                    message: "`target` and `task` must be given together".into(),
                });
            }
        }
        Ok(())
    }
}

impl DatasetRegistryEntry {
    pub fn check_table(&self, table: &Table) -> Result<(), RegistryError> {
        let invalid = |message: String| RegistryError::Invalid { id: self.id.clone(), message };
        if let Some(target) = &self.target_column {
            if table.column_index(target).is_none() {
                return Err(invalid(format!("target column {target:?} not in table")));
            }
        }
        if let Some(cols) = self.columns {
            if cols != table.n_cols() {
                return Err(invalid(format!("expected {cols} columns, found {}", table.n_cols())));
            }
        }
        if let Some(rows) = self.rows {
            if rows != table.n_rows() {
                return Err(invalid(format!("expected {rows} rows, found {}", table.n_rows())));
            }
        }
        Ok(())
    }
}
