//! Instruction instances and the train/eval/OoD JSONL datasets built from them.
//!
//! An instance pairs an input snapshot of N rows with N different expected
//! rows drawn from the same table. The prompt carries the instruction, the
//! table metadata and the input snapshot. The completion is the expected
//! rows as a CSV block.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metadata::{MetadataError, TableMetadata};
use crate::registry::{DatasetRegistryEntry, Registry, RegistryError};
use crate::seed;
use crate::table::{serialize_rows, RowFormat, Table, TableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
    OodEval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::OodEval => "ood_eval",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.jsonl", self.as_str())
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DEFAULT_TEMPLATE: &str = "conditional-rows-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildPlan {
    pub n_rows: usize,
    pub train_instances_per_table: usize,
    pub eval_instances_per_table: usize,
    pub seed: u64,
    pub prompt_template_id: String,
    /// Lets input and expected rows overlap when a table has fewer than 2N
    /// rows. Tables with at least 2N rows are always sampled disjointly.
    pub allow_overlap: bool,
}

impl Default for BuildPlan {
    fn default() -> Self {
        BuildPlan {
            n_rows: 20,
            train_instances_per_table: 500,
            eval_instances_per_table: 100,
            seed: 0,
            prompt_template_id: DEFAULT_TEMPLATE.to_string(),
            allow_overlap: false,
        }
    }
}

impl BuildPlan {
    pub fn validate(&self) -> Result<(), BuildError> {
        if self.n_rows == 0 {
            return Err(BuildError::InvalidPlan("n_rows must be at least 1".into()));
        }
        PromptTemplate::from_id(&self.prompt_template_id)?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("{dataset_id}: {rows} rows cannot supply two disjoint samples of {n}")]
    InsufficientRows { dataset_id: String, rows: usize, n: usize },
    #[error("invalid build plan: {0}")]
    InvalidPlan(String),
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("{dataset_id}: {source}")]
    Metadata { dataset_id: String, source: MetadataError },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Record { path: PathBuf, line: usize, message: String },
}

/// Prompt layouts. Only one ships; the id keeps room for variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptTemplate {
    ConditionalRowsV1,
}

impl PromptTemplate {
    pub fn from_id(id: &str) -> Result<PromptTemplate, BuildError> {
        match id {
            DEFAULT_TEMPLATE => Ok(PromptTemplate::ConditionalRowsV1),
            other => Err(BuildError::UnknownTemplate(other.to_string())),
        }
    }

    pub fn instruction(self, n: usize) -> String {
        match self {
            PromptTemplate::ConditionalRowsV1 => format!(
                "You are given the description of a table and {n} rows sampled from it. Generate {n} new rows \
                 for this table. The new rows must have the same columns in the same order, respect each \
                 column's data type and follow the distribution of the input rows. Do not copy the input rows. \
                 Answer with a CSV block: the header line followed by exactly {n} rows."
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionInstance {
    pub dataset_id: String,
    pub split: Split,
    pub index: usize,
    pub seed: u64,
    pub template_id: String,
    pub instruction: String,
    pub metadata: TableMetadata,
    pub input_rows: Table,
    pub expected_rows: Table,
    /// Source-table rows behind `input_rows` and `expected_rows`.
    pub input_indices: Vec<usize>,
    pub expected_indices: Vec<usize>,
}

/// Draws one instance. The draw depends only on (plan.seed, dataset_id,
/// index), so instances can be built in any order or in parallel.
pub fn sample_instance(
    dataset_id: &str,
    table: &Table,
    metadata: &TableMetadata,
    plan: &BuildPlan,
    split: Split,
    index: usize,
) -> Result<InstructionInstance, BuildError> {
    let template = PromptTemplate::from_id(&plan.prompt_template_id)?;
    let n = plan.n_rows;
    let rows = table.n_rows();
    let insufficient = || BuildError::InsufficientRows { dataset_id: dataset_id.to_string(), rows, n };
    let mut rng = seed::stream(plan.seed, &["instance".into(), dataset_id.into(), index.into()]);
    let (input_indices, expected_indices) = if rows >= 2 * n {
        let picked = sample(&mut rng, rows, 2 * n).into_vec();
        (picked[..n].to_vec(), picked[n..].to_vec())
    } else if plan.allow_overlap && rows >= n {
        (sample(&mut rng, rows, n).into_vec(), sample(&mut rng, rows, n).into_vec())
    } else {
        return Err(insufficient());
    };
    Ok(InstructionInstance {
        dataset_id: dataset_id.to_string(),
        split,
        index,
        seed: plan.seed,
        template_id: plan.prompt_template_id.clone(),
        instruction: template.instruction(n),
        metadata: metadata.clone(),
        input_rows: table.select_rows(&input_indices)?,
        expected_rows: table.select_rows(&expected_indices)?,
        input_indices,
        expected_indices,
    })
}

pub const SNAPSHOT_HEADING: &str = "### Input table";

/// The prompt for an instance. Expected rows never enter it.
pub fn render_prompt(instance: &InstructionInstance) -> String {
    let n = instance.input_rows.n_rows();
    let all: Vec<usize> = (0..n).collect();
    let snapshot = serialize_rows(&instance.input_rows, &all, RowFormat::CsvBlock).expect("indices in range");
    let columns: String = instance
        .metadata
        .columns
        .iter()
        .map(|c| format!("- {} ({}): {}\n", c.name, c.dtype, c.description))
        .collect();
    format!(
        "{}\n\n### General description\n{}\n\n### Columns\n{columns}\n{SNAPSHOT_HEADING} ({n} rows)\n```csv\n{snapshot}\n```\n",
        instance.instruction, instance.metadata.general_description
    )
}

pub fn render_completion(instance: &InstructionInstance) -> String {
    let all: Vec<usize> = (0..instance.expected_rows.n_rows()).collect();
    serialize_rows(&instance.expected_rows, &all, RowFormat::CsvBlock).expect("indices in range")
}

/// One JSONL line: the contract shared with the trainer and with batch
/// generation. `index` keys resumable generation together with
/// `dataset_id` and `split`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub prompt: String,
    pub completion: String,
    pub dataset_id: String,
    pub split: Split,
    pub seed: u64,
    pub index: usize,
}

impl InstructionRecord {
    pub fn from_instance(instance: &InstructionInstance) -> InstructionRecord {
        InstructionRecord {
            prompt: render_prompt(instance),
            completion: render_completion(instance),
            dataset_id: instance.dataset_id.clone(),
            split: instance.split,
            seed: instance.seed,
            index: instance.index,
        }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey { dataset_id: self.dataset_id.clone(), split: self.split, index: self.index }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordKey {
    pub dataset_id: String,
    pub split: Split,
    pub index: usize,
}

impl std::fmt::Display for RecordKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.dataset_id, self.split, self.index)
    }
}

/// Instance indices per split. Eval indices continue after the training
/// ones so the two never share a draw.
pub fn split_indices(plan: &BuildPlan, is_train: bool) -> Vec<(Split, std::ops::Range<usize>)> {
    let t = plan.train_instances_per_table;
    if is_train {
        vec![(Split::Train, 0..t), (Split::Eval, t..t + plan.eval_instances_per_table)]
    } else {
        vec![(Split::OodEval, 0..plan.eval_instances_per_table)]
    }
}

/// Deterministic permutation of `records` driven by `seed`.
pub fn shuffle_records<T>(records: &mut [T], seed: u64) {
    records.shuffle(&mut seed::stream(seed, &["shuffle".into()]));
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub train: usize,
    pub eval: usize,
    pub ood_eval: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub train: usize,
    pub eval: usize,
    pub ood_eval: usize,
    pub per_dataset: std::collections::BTreeMap<String, DatasetCounts>,
    /// Datasets with no metadata sidecar, prompted with schema-only metadata.
    pub metadata_fallback: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Metadata for a dataset: its sidecar when present, else the registry
/// title/topic plus the schema (flagged as fallback).
pub fn load_metadata(registry: &Registry, entry: &DatasetRegistryEntry, table: &Table) -> Result<(TableMetadata, bool), BuildError> {
    let side = TableMetadata::sidecar_path(&registry.resolve(entry));
    let wrap = |source| BuildError::Metadata { dataset_id: entry.id.clone(), source };
    if side.exists() {
        let meta = TableMetadata::load_sidecar(&side).map_err(wrap)?;
        meta.check_schema(table.schema()).map_err(wrap)?;
        Ok((meta, false))
    } else {
        let general = match &entry.title {
            Some(t) => format!("{t}. Topic: {}.", entry.topic),
            None => format!("Topic: {}.", entry.topic),
        };
        Ok((TableMetadata::from_schema(general, table.schema()), true))
    }
}

/// Builds `train.jsonl`, `eval.jsonl` and `ood_eval.jsonl` under `out_dir`.
///
/// Training records from all training tables are shuffled together with the
/// plan seed; eval and OoD files keep registry order.
pub fn build_dataset(registry: &Registry, plan: &BuildPlan, out_dir: &Path) -> Result<BuildSummary, BuildError> {
    plan.validate()?;
    let mut summary = BuildSummary::default();
    let mut by_split: Vec<(Split, Vec<InstructionRecord>)> =
        vec![(Split::Train, Vec::new()), (Split::Eval, Vec::new()), (Split::OodEval, Vec::new())];
    for entry in &registry.datasets {
        let table = registry.load_table(entry)?;
        let (meta, fallback) = load_metadata(registry, entry, &table)?;
        if fallback {
            summary.metadata_fallback.push(entry.id.clone());
        }
        let counts = summary.per_dataset.entry(entry.id.clone()).or_default();
        for (split, range) in split_indices(plan, entry.is_train) {
            let records = range
                .into_par_iter()
                .map(|i| sample_instance(&entry.id, &table, &meta, plan, split, i).map(|inst| InstructionRecord::from_instance(&inst)))
                .collect::<Result<Vec<_>, _>>()?;
            match split {
                Split::Train => counts.train += records.len(),
                Split::Eval => counts.eval += records.len(),
                Split::OodEval => counts.ood_eval += records.len(),
            }
            by_split.iter_mut().find(|(s, _)| *s == split).expect("all splits present").1.extend(records);
        }
    }
    fs::create_dir_all(out_dir).map_err(|source| BuildError::Io { path: out_dir.to_path_buf(), source })?;
    for (split, mut records) in by_split {
        if split == Split::Train {
            shuffle_records(&mut records, plan.seed);
        }
        let path = out_dir.join(split.file_name());
        write_jsonl(&path, &records)?;
        match split {
            Split::Train => summary.train = records.len(),
            Split::Eval => summary.eval = records.len(),
            Split::OodEval => summary.ood_eval = records.len(),
        }
        summary.files.push(path);
    }
    Ok(summary)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), BuildError> {
    let io = |source| BuildError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("records serialize");
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a JSONL file of instruction records, reporting the 1-based line
/// of the first bad record. Blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<InstructionRecord>, BuildError> {
    let io = |source| BuildError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| BuildError::Record { path: path.to_path_buf(), line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}
