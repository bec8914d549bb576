//! Table metadata: a general description plus one description per column.
//!
//! Metadata is drafted by an LLM from a prompt that embeds an exemplar and
//! the table itself, then validated against the schema. The schema dtype
//! always wins over the dtype the model claims.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use rand::seq::index::sample;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse::normalize;
use crate::seed;
use crate::table::{serialize_rows, ColumnSchema, DataType, RowFormat, Table, TableError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMetadata {
    pub name: String,
    pub dtype: DataType,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub general_description: String,
    pub columns: Vec<ColumnMetadata>,
}

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("prompt needs about {estimated} tokens, budget is {budget}")]
    PromptTooLarge { estimated: usize, budget: usize },
    #[error("table has no rows")]
    EmptyTable,
    #[error("metadata does not match schema: {0}")]
    SchemaMismatch(String),
    #[error("metadata sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error(transparent)]
    Table(#[from] TableError),
}

impl TableMetadata {
    /// Metadata carrying whatever descriptions the schema already has.
    pub fn from_schema(general_description: impl Into<String>, schema: &[ColumnSchema]) -> TableMetadata {
        TableMetadata {
            general_description: general_description.into(),
            columns: schema
                .iter()
                .map(|c| ColumnMetadata { name: c.name.clone(), dtype: c.dtype, description: c.description.clone() })
                .collect(),
        }
    }

    /// Every schema column exactly once, in schema order, with the same dtype.
    pub fn check_schema(&self, schema: &[ColumnSchema]) -> Result<(), MetadataError> {
        if self.columns.len() != schema.len() {
            return Err(MetadataError::SchemaMismatch(format!(
                "{} column entries for {} schema columns",
                self.columns.len(),
                schema.len()
            )));
        }
        for (m, s) in self.columns.iter().zip(schema) {
            if m.name != s.name || m.dtype != s.dtype {
                return Err(MetadataError::SchemaMismatch(format!(
                    "entry {} ({}) where schema has {} ({})",
                    m.name, m.dtype, s.name, s.dtype
                )));
            }
        }
        Ok(())
    }

    /// The sidecar file next to a dataset CSV: `data/iris.csv` → `data/iris.meta.json`.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        csv_path.with_file_name(format!("{stem}.meta.json"))
    }

    pub fn load_sidecar(path: &Path) -> Result<TableMetadata, MetadataError> {
        let err = |message: String| MetadataError::Sidecar { path: path.to_path_buf(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn save_sidecar(&self, path: &Path) -> Result<(), MetadataError> {
        let err = |message: String| MetadataError::Sidecar { path: path.to_path_buf(), message };
        let mut text = serde_json::to_string_pretty(self).map_err(|e| err(e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| err(e.to_string()))
    }

    /// In-context example shipped with the prompt template.
    pub fn exemplar() -> TableMetadata {
        let col = |name: &str, dtype, description: &str| ColumnMetadata {
            name: name.into(),
            dtype,
            description: description.into(),
        };
        TableMetadata {
            general_description: "Measurements of iris flowers from three species. Each row is one flower with the \
                length and width of its sepal and petal in centimetres and its species label. The table is a \
                standard benchmark for classification and for teaching exploratory data analysis."
                .into(),
            columns: vec![
                col("sepal_length", DataType::Numerical, "Length of the sepal in centimetres."),
                col("sepal_width", DataType::Numerical, "Width of the sepal in centimetres."),
                col("petal_length", DataType::Numerical, "Length of the petal in centimetres."),
                col("petal_width", DataType::Numerical, "Width of the petal in centimetres."),
                col("species", DataType::Categorical, "Species of the flower: setosa, versicolor or virginica."),
            ],
        }
    }
}

/// What to do when the whole table does not fit the token budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LargeTablePolicy {
    #[default]
    Reject,
    /// Embed a stratified sample plus per-column summary statistics.
    Sample { rows: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataPromptOptions {
    pub token_budget: usize,
    pub large_table: LargeTablePolicy,
    pub seed: u64,
}

impl Default for MetadataPromptOptions {
    fn default() -> Self {
        MetadataPromptOptions { token_budget: 8000, large_table: LargeTablePolicy::Reject, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataPrompt {
    pub text: String,
    /// Rows embedded when the sampling fallback was used.
    pub sampled_rows: Option<usize>,
    pub estimated_tokens: usize,
}

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

pub const GENERAL_MARKER: &str = "General description:";
pub const COLUMNS_MARKER: &str = "Columns:";

fn column_lines(columns: &[ColumnMetadata]) -> String {
    columns.iter().map(|c| format!("- {} ({}): {}\n", c.name, c.dtype, c.description)).collect()
}

fn metadata_prompt_text(table: &Table, exemplar: &TableMetadata, body: &str, note: &str) -> String {
    let c = table.n_cols();
    let names: Vec<&str> = table.column_names().collect();
    format!(
        "Describe the table below. Write a general description covering its topic, its structure and its \
         possible applications, then describe each of its {c} columns. Give every column a data type label: \
         numerical, categorical or textual.\n\n\
         ### Example\n\
         {GENERAL_MARKER} {}\n\
         {COLUMNS_MARKER}\n\
         {}\n\
         ### Table\n\
         {note}```csv\n{body}\n```\n\n\
         ### Answer format\n\
         Reply in exactly this format with one line for each of the {c} columns ({}):\n\
         {GENERAL_MARKER} <text>\n\
         {COLUMNS_MARKER}\n\
         - <column name> (<numerical|categorical|textual>): <description>\n",
        exemplar.general_description,
        column_lines(&exemplar.columns),
        names.join(", "),
    )
}

/// Prompt asking for metadata of `table`, with `exemplar` as the example.
///
/// The whole table is embedded. If that exceeds the budget, `Reject` fails
/// with `PromptTooLarge` and `Sample` falls back to a stratified sample plus
/// summary statistics (which must itself fit).
pub fn render_metadata_prompt(
    table: &Table,
    exemplar: &TableMetadata,
    opts: &MetadataPromptOptions,
) -> Result<MetadataPrompt, MetadataError> {
    if table.n_rows() == 0 {
        return Err(MetadataError::EmptyTable);
    }
    let all: Vec<usize> = (0..table.n_rows()).collect();
    let text = metadata_prompt_text(table, exemplar, &serialize_rows(table, &all, RowFormat::CsvBlock)?, "");
    let estimated = estimate_tokens(&text);
    if estimated <= opts.token_budget {
        return Ok(MetadataPrompt { text, sampled_rows: None, estimated_tokens: estimated });
    }
    let LargeTablePolicy::Sample { rows } = opts.large_table else {
        return Err(MetadataError::PromptTooLarge { estimated, budget: opts.token_budget });
    };
    let picked = stratified_sample(table, rows, opts.seed);
    let note = format!(
        "The table has {} rows; {} of them are shown, sampled across the values of its first categorical \
         column. Per-column summary over all rows:\n{}\n",
        table.n_rows(),
        picked.len(),
        summary_statistics(table)
    );
    let text = metadata_prompt_text(table, exemplar, &serialize_rows(table, &picked, RowFormat::CsvBlock)?, &note);
    let estimated = estimate_tokens(&text);
    if estimated > opts.token_budget {
        return Err(MetadataError::PromptTooLarge { estimated, budget: opts.token_budget });
    }
    Ok(MetadataPrompt { text, sampled_rows: Some(picked.len()), estimated_tokens: estimated })
}

/// Up to `n` row indices, allocated across the levels of the first
/// categorical column in proportion to their frequency (at least one per
/// level while room remains), in ascending row order.
fn stratified_sample(table: &Table, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::stream(seed, &["metadata-sample".into()]);
    if n >= table.n_rows() {
        return (0..table.n_rows()).collect();
    }
    let strata_col = table.schema().iter().position(|c| c.dtype == DataType::Categorical);
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, row) in table.rows().iter().enumerate() {
        let key = strata_col.map(|c| row[c].render()).unwrap_or_default();
        strata.entry(key).or_default().push(i);
    }
    let total = table.n_rows() as f64;
    let mut picked = Vec::with_capacity(n);
    let mut budget = n;
    for members in strata.values() {
        if budget == 0 {
            break;
        }
        let want = ((members.len() as f64 / total * n as f64).round() as usize).clamp(1, members.len()).min(budget);
        budget -= want;
        picked.extend(sample(&mut rng, members.len(), want).into_iter().map(|k| members[k]));
    }
    picked.sort_unstable();
    picked
}

fn summary_statistics(table: &Table) -> String {
    let mut out = String::new();
    for (j, col) in table.schema().iter().enumerate() {
        let missing = table.column(j).filter(|c| c.is_missing()).count();
        let line = match col.dtype {
            DataType::Numerical => {
                let v: Vec<f64> = table.column(j).filter_map(|c| c.as_f64()).collect();
                if v.is_empty() {
                    "no values".to_string()
                } else {
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    format!("min {min:.4}, max {max:.4}, mean {mean:.4}, sd {sd:.4}")
                }
            }
            DataType::Categorical | DataType::Textual => {
                let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                for c in table.column(j).filter(|c| !c.is_missing()) {
                    *counts.entry(c.render()).or_default() += 1;
                }
                let mut top: Vec<(&String, &usize)> = counts.iter().collect();
                top.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
                let shown: Vec<String> = top.iter().take(5).map(|(k, c)| format!("{k} ({c})")).collect();
                format!("{} distinct; most frequent: {}", counts.len(), shown.join(", "))
            }
        };
        out.push_str(&format!("- {} ({}): {line}; {missing} missing\n", col.name, col.dtype));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetadataIssue {
    MissingGeneralDescription,
    MissingColumn { column: String },
    EmptyDescription { column: String },
    DuplicateColumn { column: String },
    UnknownColumn { column: String },
    DtypeMismatch { column: String, schema: DataType, claimed: DataType },
    UnknownDtype { column: String, label: String },
}

impl MetadataIssue {
    /// Structural issues leave no usable metadata.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            MetadataIssue::MissingGeneralDescription
                | MetadataIssue::MissingColumn { .. }
                | MetadataIssue::EmptyDescription { .. }
        )
    }
}

impl std::fmt::Display for MetadataIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetadataIssue::MissingGeneralDescription => write!(f, "missing general description"),
            MetadataIssue::MissingColumn { column } => write!(f, "missing column {column}"),
            MetadataIssue::EmptyDescription { column } => write!(f, "empty description for {column}"),
            MetadataIssue::DuplicateColumn { column } => write!(f, "duplicate entry for {column}"),
            MetadataIssue::UnknownColumn { column } => write!(f, "unknown column {column}"),
            MetadataIssue::DtypeMismatch { column, schema, claimed } => {
                write!(f, "dtype mismatch for {column}: schema {schema}, response {claimed}")
            }
            MetadataIssue::UnknownDtype { column, label } => write!(f, "unknown dtype {label:?} for {column}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataDraft {
    pub raw_response: String,
    pub parsed: Option<TableMetadata>,
    pub issues: Vec<MetadataIssue>,
    /// Set when the prompt embedded a sample instead of the whole table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_rows: Option<usize>,
}

static COLUMN_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:[-*•]|\d+[.)])\s+\**`?(?P<name>[^()`*]+?)`?\**\s*\((?P<dtype>[^)]*)\)\s*\**\s*[:\-–]\s*(?P<desc>.*)$")
        .expect("valid regex")
});

fn strip_marker<'a>(line: &'a str, marker: &str) -> Option<&'a str> {
    let t = line.trim_start_matches(|c: char| c == '#' || c == '*' || c.is_whitespace());
    let head = t.get(..marker.len())?;
    head.eq_ignore_ascii_case(marker).then(|| t[marker.len()..].trim_start_matches('*').trim())
}

/// Extracts metadata from a model reply. Columns are matched by name after
/// case folding and whitespace collapsing, with `_` read as a space. Never fails: every problem is an
/// issue in the draft.
pub fn parse_metadata_response(raw: &str, schema: &[ColumnSchema]) -> MetadataDraft {
    let lines: Vec<&str> = raw.lines().collect();
    let general_at = lines.iter().position(|l| strip_marker(l, GENERAL_MARKER).is_some());
    let columns_at = lines.iter().position(|l| strip_marker(l, COLUMNS_MARKER).is_some());
    let mut issues = Vec::new();

    let general = general_at.map(|g| {
        let end = columns_at.filter(|&c| c > g).unwrap_or(lines.len());
        let mut parts = vec![strip_marker(lines[g], GENERAL_MARKER).unwrap_or_default()];
        parts.extend(lines[g + 1..end].iter().map(|l| l.trim()));
        parts.into_iter().filter(|p| !p.is_empty()).collect::<Vec<_>>().join(" ")
    });
    let general = general.filter(|g| !g.is_empty());
    if general.is_none() {
        issues.push(MetadataIssue::MissingGeneralDescription);
    }

    // underscores count as spaces: models often prettify snake_case names
    let name_key = |s: &str| normalize(&s.replace('_', " "));
    let by_key: BTreeMap<String, usize> = schema.iter().enumerate().map(|(i, c)| (name_key(&c.name), i)).collect();
    let mut found: Vec<Option<(String, String)>> = vec![None; schema.len()];
    let mut seen = BTreeSet::new();
    let start = columns_at.map_or(0, |c| c + 1);
    for line in &lines[start..] {
        let Some(caps) = COLUMN_LINE.captures(line) else { continue };
        let name = caps["name"].trim();
        let key = name_key(name);
        let Some(&i) = by_key.get(&key) else {
            issues.push(MetadataIssue::UnknownColumn { column: name.to_string() });
            continue;
        };
        if !seen.insert(i) {
            issues.push(MetadataIssue::DuplicateColumn { column: schema[i].name.clone() });
            continue;
        }
        found[i] = Some((caps["dtype"].trim().to_string(), caps["desc"].trim().to_string()));
    }

    let mut columns = Vec::with_capacity(schema.len());
    for (col, entry) in schema.iter().zip(found) {
        let Some((label, description)) = entry else {
            issues.push(MetadataIssue::MissingColumn { column: col.name.clone() });
            continue;
        };
        match DataType::from_label(&label) {
            Some(claimed) if claimed != col.dtype => {
                issues.push(MetadataIssue::DtypeMismatch { column: col.name.clone(), schema: col.dtype, claimed })
            }
            Some(_) => {}
            None => issues.push(MetadataIssue::UnknownDtype { column: col.name.clone(), label }),
        }
        if description.is_empty() {
            issues.push(MetadataIssue::EmptyDescription { column: col.name.clone() });
        }
        columns.push(ColumnMetadata { name: col.name.clone(), dtype: col.dtype, description });
    }

    let parsed = (!issues.iter().any(MetadataIssue::is_structural)).then(|| TableMetadata {
        general_description: general.unwrap_or_default(),
        columns,
    });
    MetadataDraft { raw_response: raw.to_string(), parsed, issues, sampled_rows: None }
}

/// Renders metadata in the reply format `parse_metadata_response` reads.
pub fn render_metadata_response(meta: &TableMetadata) -> String {
    format!("{GENERAL_MARKER} {}\n{COLUMNS_MARKER}\n{}", meta.general_description, column_lines(&meta.columns))
}
