//! Summary tables over fidelity and utility results: one row per dataset,
//! one column group per algorithm, one section per metric.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fidelity::{FidelityReport, PerInstanceFidelity};
use crate::table::escape_pipe_cell;
use crate::utility::{Metric, UtilityReport};

/// Column label for the train-on-real reference.
pub const BASELINE_COLUMN: &str = "Real";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {message}")]
    SchemaMismatch { path: PathBuf, message: String },
    #[error("duplicate result for {dataset_id}/{algorithm} ({section})")]
    Duplicate { section: String, dataset_id: String, algorithm: String },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityEntry {
    pub dataset_id: String,
    pub algorithm: String,
    pub shape: Option<f64>,
    pub trend: Option<f64>,
    /// Why a score is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<FidelityReport>,
    /// Scores averaged over generations scored one by one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_instance: Option<PerInstanceFidelity>,
}

impl FidelityEntry {
    pub fn from_report(dataset_id: &str, algorithm: &str, report: FidelityReport) -> FidelityEntry {
        let reason = report.trend.is_none().then(|| "fewer than two comparable columns".to_string());
        FidelityEntry {
            dataset_id: dataset_id.into(),
            algorithm: algorithm.into(),
            shape: Some(report.shape),
            trend: report.trend,
            reason,
            report: Some(report),
            per_instance: None,
        }
    }

    pub fn failed(dataset_id: &str, algorithm: &str, reason: impl Into<String>) -> FidelityEntry {
        FidelityEntry {
            dataset_id: dataset_id.into(),
            algorithm: algorithm.into(),
            shape: None,
            trend: None,
            reason: Some(reason.into()),
            report: None,
            per_instance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityEntry {
    pub dataset_id: String,
    pub algorithm: String,
    pub metric: Metric,
    pub score: Option<f64>,
    #[serde(default)]
    pub baseline_real: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<UtilityReport>,
}

impl UtilityEntry {
    pub fn from_report(dataset_id: &str, algorithm: &str, report: UtilityReport) -> UtilityEntry {
        let reason = report.average.is_none().then(|| {
            let why: BTreeSet<&str> = report.per_model.iter().filter_map(|m| m.failure.as_deref()).collect();
            let why: Vec<&str> = why.into_iter().collect();
            format!("can not be used to train a model: {}", why.join("; "))
        });
        UtilityEntry {
            dataset_id: dataset_id.into(),
            algorithm: algorithm.into(),
            metric: report.metric,
            score: report.average,
            baseline_real: report.baseline_real,
            reason,
            report: Some(report),
        }
    }

    pub fn failed(dataset_id: &str, algorithm: &str, metric: Metric, reason: impl Into<String>) -> UtilityEntry {
        UtilityEntry {
            dataset_id: dataset_id.into(),
            algorithm: algorithm.into(),
            metric,
            score: None,
            baseline_real: None,
            reason: Some(reason.into()),
            report: None,
        }
    }
}

/// One result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultEntry {
    Fidelity(FidelityEntry),
    Utility(UtilityEntry),
}

impl ResultEntry {
    pub fn from_json(text: &str, path: &Path) -> Result<ResultEntry, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::SchemaMismatch { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result entries serialize")
    }
}

/// Reads every `*.json` file under `dir` (recursively, sorted by path).
/// Files without a `kind` field, like run manifests, are skipped.
pub fn load_entries(dir: &Path) -> Result<Vec<ResultEntry>, ReportError> {
    let mut files = Vec::new();
    collect_json(dir, &mut files)?;
    files.sort();
    let mut out = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path).map_err(|source| ReportError::Io { path: path.clone(), source })?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ReportError::SchemaMismatch { path: path.clone(), message: e.to_string() })?;
        if value.get("kind").is_none() {
            continue;
        }
        out.push(ResultEntry::from_json(&text, &path)?);
    }
    Ok(out)
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let io = |source| ReportError::Io { path: dir.to_path_buf(), source };
    for item in std::fs::read_dir(dir).map_err(io)? {
        let path = item.map_err(io)?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
    Latex,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "latex" | "tex" => Ok(ReportFormat::Latex),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Listed names come first in the given order; the rest follow sorted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderOptions {
    #[serde(default)]
    pub algorithms: Vec<String>,
    #[serde(default)]
    pub datasets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Value(f64),
    /// Rendered `--`; points at an entry in `footnotes`.
    Missing { footnote: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub dataset: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub title: String,
    pub precision: usize,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub sections: Vec<Section>,
    pub footnotes: Vec<String>,
}

fn ordered(present: impl IntoIterator<Item = String>, preferred: &[String]) -> Vec<String> {
    let present: BTreeSet<String> = present.into_iter().collect();
    let mut out: Vec<String> = preferred.iter().filter(|p| present.contains(*p)).cloned().collect();
    out.extend(present.into_iter().filter(|p| !preferred.contains(p)));
    out
}

struct Footnotes(Vec<String>);

impl Footnotes {
    fn add(&mut self, text: String) -> Cell {
        let n = match self.0.iter().position(|t| *t == text) {
            Some(i) => i + 1,
            None => {
                self.0.push(text);
                self.0.len()
            }
        };
        Cell::Missing { footnote: n }
    }
}

fn cell(value: Option<f64>, reason: Option<&str>, dataset: &str, column: &str, notes: &mut Footnotes) -> Cell {
    match value {
        Some(v) => Cell::Value(v),
        None => notes.add(format!("{dataset} / {column}: {}", reason.unwrap_or("no result"))),
    }
}

/// Arranges entries into sections: Fidelity first, then one utility section
/// per metric in AUC, R2, MAPE order.
pub fn build_document(entries: &[ResultEntry], opts: &RenderOptions) -> Result<Document, ReportError> {
    let mut fidelity: BTreeMap<(String, String), &FidelityEntry> = BTreeMap::new();
    let mut utility: BTreeMap<&'static str, BTreeMap<(String, String), &UtilityEntry>> = BTreeMap::new();
    for e in entries {
        match e {
            ResultEntry::Fidelity(f) => {
                if fidelity.insert((f.dataset_id.clone(), f.algorithm.clone()), f).is_some() {
                    return Err(ReportError::Duplicate {
                        section: "fidelity".into(),
                        dataset_id: f.dataset_id.clone(),
                        algorithm: f.algorithm.clone(),
                    });
                }
            }
            ResultEntry::Utility(u) => {
                let section = utility.entry(u.metric.label()).or_default();
                if section.insert((u.dataset_id.clone(), u.algorithm.clone()), u).is_some() {
                    return Err(ReportError::Duplicate {
                        section: u.metric.label().into(),
                        dataset_id: u.dataset_id.clone(),
                        algorithm: u.algorithm.clone(),
                    });
                }
            }
        }
    }

    let mut notes = Footnotes(Vec::new());
    let mut sections = Vec::new();

    let algos = ordered(fidelity.keys().map(|k| k.1.clone()), &opts.algorithms);
    let datasets = ordered(fidelity.keys().map(|k| k.0.clone()), &opts.datasets);
    let mut rows = Vec::new();
    for d in &datasets {
        let mut cells = Vec::new();
        for a in &algos {
            let e = fidelity.get(&(d.clone(), a.clone()));
            let reason = e.and_then(|e| e.reason.as_deref());
            cells.push(cell(e.and_then(|e| e.shape), reason, d, &format!("{a} Shape"), &mut notes));
            cells.push(cell(e.and_then(|e| e.trend), reason, d, &format!("{a} Trends"), &mut notes));
        }
        rows.push(Row { dataset: d.clone(), cells });
    }
    sections.push(Section {
        title: "Fidelity".into(),
        precision: 2,
        columns: algos.iter().flat_map(|a| [format!("{a} Shape"), format!("{a} Trends")]).collect(),
        rows,
    });

    for metric in [Metric::Auc, Metric::R2, Metric::Mape] {
        let Some(section) = utility.get(metric.label()) else { continue };
        let algos = ordered(section.keys().map(|k| k.1.clone()), &opts.algorithms);
        let datasets = ordered(section.keys().map(|k| k.0.clone()), &opts.datasets);
        let has_baseline = section.values().any(|u| u.baseline_real.is_some());
        let mut columns = Vec::new();
        if has_baseline {
            columns.push(BASELINE_COLUMN.to_string());
        }
        columns.extend(algos.iter().cloned());
        let mut rows = Vec::new();
        for d in &datasets {
            let mut cells = Vec::new();
            if has_baseline {
                // first algorithm (in column order) that carries a baseline
                let base = algos.iter().filter_map(|a| section.get(&(d.clone(), a.clone()))).find_map(|u| u.baseline_real);
                cells.push(cell(base, Some("no train-on-real baseline"), d, BASELINE_COLUMN, &mut notes));
            }
            for a in &algos {
                let e = section.get(&(d.clone(), a.clone()));
                cells.push(cell(e.and_then(|e| e.score), e.and_then(|e| e.reason.as_deref()), d, a, &mut notes));
            }
            rows.push(Row { dataset: d.clone(), cells });
        }
        sections.push(Section { title: format!("Utility ({})", metric.label()), precision: 4, columns, rows });
    }
    Ok(Document { sections, footnotes: notes.0 })
}

fn fmt_cell(c: &Cell, precision: usize) -> String {
    match c {
        Cell::Value(v) => format!("{v:.precision$}"),
        Cell::Missing { footnote } => format!("--[{footnote}]"),
    }
}

pub fn render(doc: &Document, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(doc),
        ReportFormat::Csv => render_csv(doc),
        ReportFormat::Json => serde_json::to_string_pretty(doc).expect("documents serialize") + "\n",
        ReportFormat::Latex => render_latex(doc),
    }
}

pub fn render_entries(entries: &[ResultEntry], opts: &RenderOptions, format: ReportFormat) -> Result<String, ReportError> {
    Ok(render(&build_document(entries, opts)?, format))
}

fn render_markdown(doc: &Document) -> String {
    let mut out = String::new();
    for s in &doc.sections {
        out.push_str(&format!("## {}\n\n", s.title));
        let header: Vec<String> = std::iter::once("Dataset".to_string()).chain(s.columns.iter().cloned()).collect();
        out.push_str(&md_line(header.iter().map(|h| escape_pipe_cell(h))));
        out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
        for r in &s.rows {
            let cells = std::iter::once(escape_pipe_cell(&r.dataset)).chain(r.cells.iter().map(|c| fmt_cell(c, s.precision)));
            out.push_str(&md_line(cells));
        }
        out.push('\n');
    }
    for (i, n) in doc.footnotes.iter().enumerate() {
        out.push_str(&format!("[{}] {}\n", i + 1, n));
    }
    out
}

fn md_line(cells: impl Iterator<Item = String>) -> String {
    let mut s = String::from("|");
    for c in cells {
        s.push_str(&format!(" {c} |"));
    }
    s.push('\n');
    s
}

fn render_csv(doc: &Document) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for s in &doc.sections {
        let header = ["section", "dataset"].into_iter().map(String::from).chain(s.columns.iter().cloned());
        w.write_record(header.collect::<Vec<_>>()).expect("in-memory write");
        for r in &s.rows {
            let mut rec = vec![s.title.clone(), r.dataset.clone()];
            rec.extend(r.cells.iter().map(|c| fmt_cell(c, s.precision)));
            w.write_record(rec).expect("in-memory write");
        }
    }
    for (i, n) in doc.footnotes.iter().enumerate() {
        w.write_record(["footnote".to_string(), (i + 1).to_string(), n.clone()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn latex_escape(s: &str) -> String {
    let mut out = String::new();
    for ch in s.chars() {
        match ch {
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => {
                out.push('\\');
                out.push(ch);
            }
            c => out.push(c),
        }
    }
    out
}

fn render_latex(doc: &Document) -> String {
    let mut out = String::new();
    for s in &doc.sections {
        out.push_str(&format!("% {}\n", s.title));
        let header: Vec<String> = std::iter::once("Dataset".to_string()).chain(s.columns.iter().map(|c| latex_escape(c))).collect();
        out.push_str(&format!("{} \\\\\n", header.join(" & ")));
        for r in &s.rows {
            let cells: Vec<String> = std::iter::once(latex_escape(&r.dataset))
                .chain(r.cells.iter().map(|c| fmt_cell(c, s.precision).replace("--[", "--\\textsuperscript{").replace(']', "}")))
                .collect();
            out.push_str(&format!("{} \\\\\n", cells.join(" & ")));
        }
        out.push('\n');
    }
    for (i, n) in doc.footnotes.iter().enumerate() {
        out.push_str(&format!("% [{}] {}\n", i + 1, n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fid(d: &str, a: &str, s: f64, t: f64) -> ResultEntry {
        ResultEntry::Fidelity(FidelityEntry {
            dataset_id: d.into(),
            algorithm: a.into(),
            shape: Some(s),
            trend: Some(t),
            reason: None,
            report: None,
            per_instance: None,
        })
    }

    fn util(d: &str, a: &str, m: Metric, s: Option<f64>, base: Option<f64>) -> ResultEntry {
        ResultEntry::Utility(UtilityEntry {
            dataset_id: d.into(),
            algorithm: a.into(),
            metric: m,
            score: s,
            baseline_real: base,
            reason: s.is_none().then(|| "no usable rows".to_string()),
            report: None,
        })
    }

    #[test]
    fn empty_input_renders_header_only() {
        let md = render_entries(&[], &RenderOptions::default(), ReportFormat::Markdown).unwrap();
        assert_eq!(md, "## Fidelity\n\n| Dataset |\n|---|\n\n");
    }

    #[test]
    fn metrics_never_share_a_section() {
        let entries = [
            util("adult", "m", Metric::Auc, Some(0.9), Some(0.91)),
            util("house", "m", Metric::R2, Some(0.7), None),
        ];
        let doc = build_document(&entries, &RenderOptions::default()).unwrap();
        let titles: Vec<&str> = doc.sections.iter().map(|s| s.title.as_str()).collect();
        assert_eq!(titles, ["Fidelity", "Utility (AUC)", "Utility (R2)"]);
        assert_eq!(doc.sections[1].rows.len(), 1);
        assert_eq!(doc.sections[2].columns, ["m"]);
    }

    #[test]
    fn missing_cells_get_footnotes() {
        let entries = [fid("a", "x", 90.0, 80.0), fid("b", "y", 70.0, 60.0), util("a", "x", Metric::Auc, None, Some(0.8))];
        let md = render_entries(&entries, &RenderOptions::default(), ReportFormat::Markdown).unwrap();
        assert!(md.contains("| a | 90.00 | 80.00 | --[1] | --[2] |"), "{md}");
        assert!(md.contains("| a | 0.8000 | --[5] |"), "{md}");
        assert!(md.contains("[5] a / x: no usable rows"), "{md}");
    }

    #[test]
    fn configured_order_wins() {
        let entries = [fid("a", "x", 1.0, 1.0), fid("a", "y", 2.0, 2.0)];
        let opts = RenderOptions { algorithms: vec!["y".into()], datasets: vec![] };
        let doc = build_document(&entries, &opts).unwrap();
        assert_eq!(doc.sections[0].columns[0], "y Shape");
    }

    #[test]
    fn duplicates_are_rejected() {
        let entries = [fid("a", "x", 1.0, 1.0), fid("a", "x", 2.0, 2.0)];
        assert!(matches!(build_document(&entries, &RenderOptions::default()), Err(ReportError::Duplicate { .. })));
    }

    #[test]
    fn entries_round_trip_json() {
        let e = util("adult", "m", Metric::Mape, Some(0.1), None);
        assert_eq!(ResultEntry::from_json(&e.to_json(), Path::new("x")).unwrap(), e);
        assert!(matches!(ResultEntry::from_json("{\"kind\":\"nope\"}", Path::new("x")), Err(ReportError::SchemaMismatch { .. })));
    }
}
