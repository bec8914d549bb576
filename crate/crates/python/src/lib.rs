//! Python bindings. Structured results cross the boundary as plain
//! dicts and lists (round-tripped through JSON).

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use tabinstruct::fidelity;
use tabinstruct::instruct::{self, BuildPlan};
use tabinstruct::llm::{self, MockMode};
use tabinstruct::parse;
use tabinstruct::registry::{Registry, Task};
use tabinstruct::report::{self, RenderOptions, ReportFormat};
use tabinstruct::table::{self, RowFormat};
use tabinstruct::utility::{self, Metric, TstrOptions};

create_exception!(tabinstruct_py, TabInstructError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    TabInstructError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// An in-memory table with a typed schema.
#[pyclass(name = "Table", module = "tabinstruct_py", skip_from_py_object)]
#[derive(Clone)]
struct PyTable {
    inner: table::Table,
}

#[pymethods]
impl PyTable {
    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        Ok(PyTable { inner: table::load_csv(path, None).map_err(err)? })
    }

    #[staticmethod]
    fn from_csv_string(text: &str) -> PyResult<Self> {
        Ok(PyTable { inner: table::load_csv_str(text, None).map_err(err)? })
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.column_names().map(String::from).collect()
    }

    /// `(name, dtype)` pairs.
    #[getter]
    fn schema(&self) -> Vec<(String, String)> {
        self.inner.schema().iter().map(|c| (c.name.clone(), c.dtype.as_str().to_string())).collect()
    }

    /// Rows as lists of strings (empty for missing), as they would be serialized.
    fn rows(&self) -> Vec<Vec<String>> {
        self.inner.rows().iter().map(|r| r.iter().map(|c| c.render()).collect()).collect()
    }

    fn to_csv(&self) -> String {
        table::to_csv_string(&self.inner)
    }

    /// `format` is "csv" or "pipe"; all rows when `rows` is omitted.
    #[pyo3(signature = (format = "csv", rows = None))]
    fn serialize(&self, format: &str, rows: Option<Vec<usize>>) -> PyResult<String> {
        let format = match format {
            "csv" => RowFormat::CsvBlock,
            "pipe" => RowFormat::PipeTable,
            other => return Err(PyValueError::new_err(format!("unknown format {other:?} (csv, pipe)"))),
        };
        let rows = rows.unwrap_or_else(|| (0..self.inner.n_rows()).collect());
        table::serialize_rows(&self.inner, &rows, format).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.n_rows()
    }

    fn __repr__(&self) -> String {
        format!("Table({} rows x {} columns)", self.inner.n_rows(), self.inner.n_cols())
    }
}

/// Result of parsing one model response.
#[pyclass(name = "ParseOutcome", module = "tabinstruct_py")]
struct PyParseOutcome {
    inner: parse::ParseOutcome,
}

#[pymethods]
impl PyParseOutcome {
    /// "clean", "salvaged" or "rejected".
    #[getter]
    fn status(&self) -> String {
        serde_json::to_value(self.inner.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    #[getter]
    fn rows_recovered(&self) -> usize {
        self.inner.rows_recovered
    }

    #[getter]
    fn table(&self) -> Option<PyTable> {
        self.inner.table.clone().map(|inner| PyTable { inner })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("ParseOutcome({}, {} rows)", self.status(), self.inner.rows_recovered)
    }
}

/// Parses a raw response against the schema of `like`.
#[pyfunction]
#[pyo3(signature = (raw, like, rows_requested, vocabularies = true))]
fn parse_llm_output(raw: &str, like: &PyTable, rows_requested: usize, vocabularies: bool) -> PyParseOutcome {
    let mut opts = parse::ParseOptions::default();
    if vocabularies {
        opts = opts.with_vocabularies_from(&like.inner);
    }
    PyParseOutcome { inner: parse::parse_llm_output_with(raw, like.inner.schema(), rows_requested, &opts) }
}

#[pyfunction]
fn ks_statistic(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    fidelity::ks_statistic(&a, &b).map_err(err)
}

#[pyfunction]
fn tv_distance(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    fidelity::tv_distance(&a, &b).map_err(err)
}

#[pyfunction]
fn shape_score(real: &PyTable, synth: &PyTable) -> PyResult<f64> {
    Ok(fidelity::shape_score(&real.inner, &synth.inner).map_err(err)?.shape)
}

#[pyfunction]
fn trend_score(real: &PyTable, synth: &PyTable) -> PyResult<f64> {
    Ok(fidelity::trend_score(&real.inner, &synth.inner).map_err(err)?.trend)
}

/// Shape, Trend and every per-column and per-pair score.
#[pyfunction]
fn fidelity_report<'py>(py: Python<'py>, real: &PyTable, synth: &PyTable) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &fidelity::fidelity_report(&real.inner, &synth.inner).map_err(err)?)
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    utility::auc(&scores, &labels).map_err(err)
}

/// Train-on-synthetic, test-on-real with all three model families.
#[pyfunction]
#[pyo3(signature = (real, synth, target, task, metric = None, split_seed = 0, model_seed = 0, test_fraction = 0.2))]
#[allow(clippy::too_many_arguments)]
fn tstr<'py>(
    py: Python<'py>,
    real: &PyTable,
    synth: &PyTable,
    target: &str,
    task: &str,
    metric: Option<&str>,
    split_seed: u64,
    model_seed: u64,
    test_fraction: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let task: Task = task.parse().map_err(PyValueError::new_err)?;
    let metric: Option<Metric> = metric.map(|m| m.parse()).transpose().map_err(PyValueError::new_err)?;
    let opts = TstrOptions { test_fraction, split_seed, metric, ..TstrOptions::default() };
    let specs = utility::default_specs(model_seed);
    let report = py.detach(|| utility::tstr(&real.inner, &synth.inner, target, task, &specs, &opts)).map_err(err)?;
    to_py(py, &report)
}

/// Writes train/eval/ood_eval JSONL files for a registry and returns the summary.
#[pyfunction]
#[pyo3(signature = (registry, out_dir, n_rows = 20, train_instances = 500, eval_instances = 100, seed = 0))]
fn build_dataset<'py>(
    py: Python<'py>,
    registry: PathBuf,
    out_dir: PathBuf,
    n_rows: usize,
    train_instances: usize,
    eval_instances: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let registry = Registry::load(registry).map_err(err)?;
    let plan = BuildPlan {
        n_rows,
        train_instances_per_table: train_instances,
        eval_instances_per_table: eval_instances,
        seed,
        ..BuildPlan::default()
    };
    let summary = py.detach(|| instruct::build_dataset(&registry, &plan, &out_dir)).map_err(err)?;
    to_py(py, &summary)
}

/// Instruction records from a JSONL file, as dicts.
#[pyfunction]
fn read_records<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &instruct::read_records(&path).map_err(err)?)
}

/// Offline reply: mode is "echo-input", "resample-rows" or "garbage".
#[pyfunction]
#[pyo3(signature = (prompt, mode, seed = 0))]
fn mock_complete(prompt: &str, mode: &str, seed: u64) -> PyResult<String> {
    let mode: MockMode = mode.parse().map_err(PyValueError::new_err)?;
    llm::mock_complete(prompt, mode, seed).map_err(err)
}

/// Renders every result JSON under `results_dir`.
#[pyfunction]
#[pyo3(signature = (results_dir, format = "markdown", algorithms = Vec::new()))]
fn render_report(results_dir: PathBuf, format: &str, algorithms: Vec<String>) -> PyResult<String> {
    let format: ReportFormat = format.parse().map_err(PyValueError::new_err)?;
    let entries = report::load_entries(&results_dir).map_err(err)?;
    let opts = RenderOptions { algorithms, ..RenderOptions::default() };
    report::render_entries(&entries, &opts, format).map_err(err)
}

#[pymodule]
fn tabinstruct_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TabInstructError", m.py().get_type::<TabInstructError>())?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyParseOutcome>()?;
    m.add_function(wrap_pyfunction!(parse_llm_output, m)?)?;
    m.add_function(wrap_pyfunction!(ks_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(shape_score, m)?)?;
    m.add_function(wrap_pyfunction!(trend_score, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_report, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(tstr, m)?)?;
    m.add_function(wrap_pyfunction!(build_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(read_records, m)?)?;
    m.add_function(wrap_pyfunction!(mock_complete, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    Ok(())
}
