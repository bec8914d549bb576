//! Glue between stages: parse a generation log, pool the recovered rows per
//! dataset, and score the pooled tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::fidelity::{fidelity_report, per_instance_fidelity};
use crate::instruct::{self, BuildError, BuildSummary, Split};
use crate::llm::{generate_batch, read_generations, write_generations, BatchError, BatchSummary, Completer, GenerationRecord};
use crate::parse::{parse_llm_output_with, ParseOptions, ParseOutcome, ParseStatus};
use crate::registry::{DatasetRegistryEntry, Registry, RegistryError};
use crate::report::{render_entries, FidelityEntry, ReportFormat, ResultEntry, UtilityEntry};
use crate::table::{ColumnSchema, Table};
use crate::utility::{tstr, Metric, ModelSpec, TstrOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("generation for unknown dataset {0:?}")]
    UnknownDataset(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io { path: path.to_path_buf(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedGeneration {
    pub dataset_id: String,
    pub split: Split,
    pub index: usize,
    pub outcome: ParseOutcome,
}

impl ParsedGeneration {
    /// File name used when outcomes are written one per file.
    pub fn file_name(&self) -> String {
        format!("{}_{:05}.json", self.split.as_str(), self.index)
    }
}

/// A rejected outcome for a generation that produced no text.
fn failed_outcome(schema: &[ColumnSchema], rows_requested: usize, why: String) -> ParseOutcome {
    let mut o = parse_llm_output_with("", schema, rows_requested, &ParseOptions::default());
    o.hint = Some(why);
    o
}

/// Parses each generation against its dataset's real schema, with the
/// categorical vocabularies of the real table.
pub fn parse_generations(
    registry: &Registry,
    gens: &[GenerationRecord],
    rows_requested: usize,
    opts: &ParseOptions,
) -> Result<Vec<ParsedGeneration>, PipelineError> {
    let mut options: BTreeMap<&str, (Vec<ColumnSchema>, ParseOptions)> = BTreeMap::new();
    let mut out = Vec::with_capacity(gens.len());
    for g in gens {
        if !options.contains_key(g.dataset_id.as_str()) {
            let entry = registry.get(&g.dataset_id).map_err(|_| PipelineError::UnknownDataset(g.dataset_id.clone()))?;
            let table = registry.load_table(entry)?;
            let o = opts.clone().with_vocabularies_from(&table);
            options.insert(g.dataset_id.as_str(), (table.schema().to_vec(), o));
        }
        let (schema, o) = &options[g.dataset_id.as_str()];
        let outcome = match (&g.raw_response, &g.error) {
            (Some(raw), None) => parse_llm_output_with(raw, schema, rows_requested, o),
            (_, Some(e)) => failed_outcome(schema, rows_requested, format!("generation failed: {}", e.message)),
            (None, None) => failed_outcome(schema, rows_requested, "generation returned no text".into()),
        };
        out.push(ParsedGeneration { dataset_id: g.dataset_id.clone(), split: g.split, index: g.index, outcome });
    }
    Ok(out)
}

/// Writes `dir/<dataset_id>/<split>_<index>.json`, one outcome per file.
pub fn write_outcomes(dir: &Path, parsed: &[ParsedGeneration]) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = Vec::with_capacity(parsed.len());
    for p in parsed {
        let sub = dir.join(&p.dataset_id);
        fs::create_dir_all(&sub).map_err(|e| io_err(&sub, e))?;
        let path = sub.join(p.file_name());
        let json = serde_json::to_string_pretty(&p.outcome).expect("outcomes serialize");
        fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
        files.push(path);
    }
    Ok(files)
}

/// Every `*.json` ParseOutcome in `dir`, sorted by file name.
pub fn read_outcome_dir(dir: &Path) -> Result<Vec<ParseOutcome>, PipelineError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|d| d.ok().map(|d| d.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&text).map_err(|e| io_err(p, e))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    pub clean: usize,
    pub salvaged: usize,
    pub rejected: usize,
    pub rows: usize,
}

/// Concatenates the tables of all non-rejected outcomes.
pub fn pool_outcomes<'a>(schema: &[ColumnSchema], outcomes: impl IntoIterator<Item = &'a ParseOutcome>) -> (Option<Table>, PoolStats) {
    let mut stats = PoolStats::default();
    let mut parts = Vec::new();
    for o in outcomes {
        match o.status {
            ParseStatus::Clean => stats.clean += 1,
            ParseStatus::Salvaged => stats.salvaged += 1,
            ParseStatus::Rejected => stats.rejected += 1,
        }
        if let Some(t) = &o.table {
            parts.push(t);
        }
    }
    if parts.is_empty() {
        return (None, stats);
    }
    let pooled = Table::concat(schema, parts).expect("outcomes share the real schema");
    stats.rows = pooled.n_rows();
    (Some(pooled), stats)
}

fn no_rows_reason(stats: &PoolStats) -> String {
    format!("no tabular output: all {} generations rejected", stats.rejected)
}

pub fn evaluate_fidelity(
    dataset_id: &str,
    algorithm: &str,
    real: &Table,
    outcomes: &[&ParseOutcome],
    per_instance: bool,
) -> FidelityEntry {
    let (pooled, stats) = pool_outcomes(real.schema(), outcomes.iter().copied());
    let Some(synth) = pooled else {
        return FidelityEntry::failed(dataset_id, algorithm, no_rows_reason(&stats));
    };
    let mut entry = match fidelity_report(real, &synth) {
        Ok(r) => FidelityEntry::from_report(dataset_id, algorithm, r),
        Err(e) => FidelityEntry::failed(dataset_id, algorithm, e.to_string()),
    };
    if per_instance {
        entry.per_instance = Some(per_instance_fidelity(real, outcomes.iter().filter_map(|o| o.table.as_ref())));
    }
    entry
}

/// `None` when the dataset declares no target.
pub fn evaluate_utility(
    entry: &DatasetRegistryEntry,
    algorithm: &str,
    real: &Table,
    outcomes: &[&ParseOutcome],
    specs: &[ModelSpec],
    opts: &TstrOptions,
) -> Option<UtilityEntry> {
    let (target, task) = (entry.target_column.as_deref()?, entry.task?);
    let metric = opts.metric.unwrap_or(Metric::default_for(task));
    let (pooled, stats) = pool_outcomes(real.schema(), outcomes.iter().copied());
    // an empty synthetic table still yields the train-on-real baseline
    let rejected_all = pooled.is_none();
    let synth = pooled.unwrap_or_else(|| Table::new(real.schema().to_vec(), Vec::new()).expect("real schema is valid"));
    Some(match tstr(real, &synth, target, task, specs, opts) {
        Ok(r) => {
            let mut u = UtilityEntry::from_report(&entry.id, algorithm, r);
            if rejected_all {
                u.reason = Some(no_rows_reason(&stats));
            }
            u
        }
        Err(e) => UtilityEntry::failed(&entry.id, algorithm, metric, e.to_string()),
    })
}

/// Fidelity (and, where a target is declared, utility) for every dataset
/// that has outcomes, in registry order.
pub fn evaluate_all(
    registry: &Registry,
    parsed: &[ParsedGeneration],
    algorithm: &str,
    config: &Config,
    with_utility: bool,
) -> Result<Vec<ResultEntry>, PipelineError> {
    let mut out = Vec::new();
    for entry in &registry.datasets {
        let outcomes: Vec<&ParseOutcome> = parsed.iter().filter(|p| p.dataset_id == entry.id).map(|p| &p.outcome).collect();
        if outcomes.is_empty() {
            continue;
        }
        let real = registry.load_table(entry)?;
        out.push(ResultEntry::Fidelity(evaluate_fidelity(&entry.id, algorithm, &real, &outcomes, config.fidelity.per_instance)));
        if with_utility {
            let specs = config.utility.specs();
            if let Some(u) = evaluate_utility(entry, algorithm, &real, &outcomes, &specs, &config.utility.options()) {
                out.push(ResultEntry::Utility(u));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineRun {
    pub build: BuildSummary,
    pub generation: BatchSummary,
    pub report_markdown: PathBuf,
    pub entries: Vec<PathBuf>,
}

/// build → generate → parse → evaluate → report, all under `out_dir`.
/// Generation runs over the in-distribution and held-out eval splits.
pub async fn run_pipeline(
    registry: &Registry,
    config: &Config,
    completer: &dyn Completer,
    algorithm: &str,
    out_dir: &Path,
    with_utility: bool,
) -> Result<OfflineRun, PipelineError> {
    let data_dir = out_dir.join("data");
    let build = instruct::build_dataset(registry, &config.build, &data_dir)?;
    let mut records = instruct::read_records(&data_dir.join(Split::Eval.file_name()))?;
    records.extend(instruct::read_records(&data_dir.join(Split::OodEval.file_name()))?);

    let gen_dir = out_dir.join("generations");
    fs::create_dir_all(&gen_dir).map_err(|e| io_err(&gen_dir, e))?;
    let progress = gen_dir.join("progress.jsonl");
    let (gens, generation) = generate_batch(completer, &records, &progress, config.endpoint.max_in_flight).await?;
    write_generations(&gen_dir.join("generations.jsonl"), &gens)?;
    let gens = read_generations(&gen_dir.join("generations.jsonl"))?;

    let parsed = parse_generations(registry, &gens, config.build.n_rows, &config.parse.options())?;
    write_outcomes(&out_dir.join("parsed"), &parsed)?;

    let results_dir = out_dir.join("results");
    fs::create_dir_all(&results_dir).map_err(|e| io_err(&results_dir, e))?;
    let entries = evaluate_all(registry, &parsed, algorithm, config, with_utility)?;
    let mut files = Vec::new();
    for e in &entries {
        let (kind, id) = match e {
            ResultEntry::Fidelity(f) => ("fidelity", &f.dataset_id),
            ResultEntry::Utility(u) => ("utility", &u.dataset_id),
        };
        let path = results_dir.join(format!("{id}.{kind}.json"));
        fs::write(&path, e.to_json() + "\n").map_err(|er| io_err(&path, er))?;
        files.push(path);
    }
    let md = render_entries(&entries, &config.report, ReportFormat::Markdown).map_err(|e| io_err(&results_dir, e))?;
    let report_markdown = out_dir.join("report.md");
    fs::write(&report_markdown, md).map_err(|e| io_err(&report_markdown, e))?;
    Ok(OfflineRun { build, generation, report_markdown, entries: files })
}
