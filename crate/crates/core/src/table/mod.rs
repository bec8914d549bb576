//! Typed tables: schema, cells, CSV ingestion and row rendering.

mod csv_io;
mod render;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{load_csv, load_csv_str, to_csv_string, write_csv, CATEGORICAL_MAX_DISTINCT, CATEGORICAL_MAX_RATIO};
pub use render::{serialize_rows, RowFormat};
pub(crate) use render::escape_pipe_cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Numerical,
    Categorical,
    Textual,
}

impl DataType {
    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Numerical => "numerical",
            DataType::Categorical => "categorical",
            DataType::Textual => "textual",
        }
    }

    /// Lenient mapping of free-form dtype labels ("numeric", "float", "string", ...).
    pub fn from_label(label: &str) -> Option<DataType> {
        let l = label.trim().trim_matches(|c: char| c == '`' || c == '*' || c == '"').to_lowercase();
        match l.as_str() {
            "numerical" | "numeric" | "number" | "integer" | "int" | "float" | "real" | "continuous"
            | "discrete" | "decimal" | "double" => Some(DataType::Numerical),
            "categorical" | "category" | "binary" | "boolean" | "bool" | "ordinal" | "nominal" | "label" => {
                Some(DataType::Categorical)
            }
            "textual" | "text" | "string" | "free text" | "free-text" | "str" => Some(DataType::Textual),
            _ => None,
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DataType {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataType::from_label(s).ok_or_else(|| TableError::UnknownDataType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub dtype: DataType,
    #[serde(default)]
    pub description: String,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, dtype: DataType) -> Self {
        Self { name: name.into(), dtype, description: String::new() }
    }
}

/// One table cell. Empty strings are never stored; they become `Missing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Str(String),
    Missing,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Cell {
        let s = s.into();
        if s.is_empty() {
            Cell::Missing
        } else {
            Cell::Str(s)
        }
    }

    /// Parses a Numerical cell: empty is missing, anything else must be a
    /// finite decimal.
    pub fn parse_numeric(raw: &str) -> Option<Cell> {
        let t = raw.trim();
        if t.is_empty() {
            return Some(Cell::Missing);
        }
        parse_finite(t).map(Cell::Num)
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Canonical text form: shortest round-trip decimal for numbers, the
    /// string itself for text, empty for missing.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Str(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        // "-0" would not survive categorical comparisons downstream
        return "0".to_string();
    }
    format!("{v}")
}

/// Strict finite-decimal parse. Rejects `inf`, `nan` and friends that
/// `f64::from_str` would accept.
pub(crate) fn parse_finite(s: &str) -> Option<f64> {
    let looks_decimal = s
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
        && s.bytes().any(|b| b.is_ascii_digit());
    if !looks_decimal {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("table must have at least one column")]
    NoColumns,
    #[error("duplicate column name {0:?}")]
    DuplicateHeader(String),
    #[error("invalid column name {0:?}: names must be non-empty without surrounding whitespace")]
    InvalidColumnName(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RowArity { row: usize, found: usize, expected: usize },
    #[error("line {line}: row has {found} cells, header has {expected}")]
    RaggedRow { line: u64, found: usize, expected: usize },
    #[error("row {row}, column {column:?}: numerical cell must be a finite number or missing")]
    NonNumericCell { row: usize, column: String },
    #[error("row index {index} out of range for table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("unknown data type {0:?}")]
    UnknownDataType(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// A typed table. Immutable once built; every constructor validates the
/// schema and row arity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct Table {
    schema: Vec<ColumnSchema>,
    rows: Vec<Vec<Cell>>,
}

#[derive(Deserialize)]
struct RawTable {
    schema: Vec<ColumnSchema>,
    rows: Vec<Vec<Cell>>,
}

impl TryFrom<RawTable> for Table {
    type Error = TableError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        Table::new(raw.schema, raw.rows)
    }
}

impl Table {
    pub fn new(schema: Vec<ColumnSchema>, rows: Vec<Vec<Cell>>) -> Result<Table, TableError> {
        validate_schema(&schema)?;
        let width = schema.len();
        let mut rows = rows;
        for (r, row) in rows.iter_mut().enumerate() {
            if row.len() != width {
                return Err(TableError::RowArity { row: r, found: row.len(), expected: width });
            }
            for (cell, col) in row.iter_mut().zip(&schema) {
                if let Cell::Str(s) = cell {
                    if s.is_empty() {
                        *cell = Cell::Missing;
                        continue;
                    }
                }
                if col.dtype == DataType::Numerical {
                    match cell {
                        Cell::Num(v) if v.is_finite() => {}
                        Cell::Missing => {}
                        _ => return Err(TableError::NonNumericCell { row: r, column: col.name.clone() }),
                    }
                } else if let Cell::Num(v) = cell {
                    // non-numerical columns hold strings only
                    *cell = Cell::Str(format_number(*v));
                }
            }
        }
        Ok(Table { schema, rows })
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.schema.iter().map(|c| c.name.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[idx])
    }

    /// New table holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Table, TableError> {
        let mut rows = Vec::with_capacity(indices.len());
        for &i in indices {
            let row = self
                .rows
                .get(i)
                .ok_or(TableError::IndexOutOfRange { index: i, rows: self.rows.len() })?;
            rows.push(row.clone());
        }
        Ok(Table { schema: self.schema.clone(), rows })
    }

    /// Same rows, different schema descriptions. Names and dtypes must agree.
    pub fn with_descriptions(mut self, descriptions: &HashMap<String, String>) -> Table {
        for col in &mut self.schema {
            if let Some(d) = descriptions.get(&col.name) {
                col.description = d.clone();
            }
        }
        self
    }

    /// Concatenates tables sharing this schema (by name and dtype).
    pub fn concat<'a>(schema: &[ColumnSchema], parts: impl IntoIterator<Item = &'a Table>) -> Result<Table, TableError> {
        let mut rows = Vec::new();
        for part in parts {
            for (a, b) in part.schema.iter().zip(schema) {
                if a.name != b.name {
                    return Err(TableError::UnknownColumn(a.name.clone()));
                }
            }
            rows.extend(part.rows.iter().cloned());
        }
        Table::new(schema.to_vec(), rows)
    }
}

fn validate_schema(schema: &[ColumnSchema]) -> Result<(), TableError> {
    if schema.is_empty() {
        return Err(TableError::NoColumns);
    }
    let mut seen = HashSet::new();
    for col in schema {
        if col.name.is_empty() || col.name.trim() != col.name {
            return Err(TableError::InvalidColumnName(col.name.clone()));
        }
        if !seen.insert(col.name.as_str()) {
            return Err(TableError::DuplicateHeader(col.name.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema2() -> Vec<ColumnSchema> {
        vec![ColumnSchema::new("a", DataType::Numerical), ColumnSchema::new("b", DataType::Categorical)]
    }

    #[test]
    fn rejects_ragged_and_duplicate() {
        let err = Table::new(schema2(), vec![vec![Cell::Num(1.0)]]).unwrap_err();
        assert_eq!(err, TableError::RowArity { row: 0, found: 1, expected: 2 });
        let dup = vec![ColumnSchema::new("a", DataType::Numerical), ColumnSchema::new("a", DataType::Textual)];
        assert_eq!(Table::new(dup, vec![]).unwrap_err(), TableError::DuplicateHeader("a".into()));
        let padded = vec![ColumnSchema::new(" a", DataType::Numerical)];
        assert!(matches!(Table::new(padded, vec![]), Err(TableError::InvalidColumnName(_))));
    }

    #[test]
    fn numerical_cells_must_be_finite() {
        let err = Table::new(schema2(), vec![vec![Cell::Num(f64::NAN), Cell::text("x")]]).unwrap_err();
        assert!(matches!(err, TableError::NonNumericCell { row: 0, .. }));
        let err = Table::new(schema2(), vec![vec![Cell::text("x"), Cell::text("x")]]).unwrap_err();
        assert!(matches!(err, TableError::NonNumericCell { .. }));
    }

    #[test]
    fn empty_strings_become_missing() {
        let t = Table::new(schema2(), vec![vec![Cell::Missing, Cell::Str(String::new())]]).unwrap();
        assert_eq!(t.rows()[0][1], Cell::Missing);
    }

    #[test]
    fn strict_number_parse() {
        assert_eq!(parse_finite("1.5e3"), Some(1500.0));
        assert_eq!(parse_finite("-.5"), Some(-0.5));
        assert_eq!(parse_finite("inf"), None);
        assert_eq!(parse_finite("NaN"), None);
        assert_eq!(parse_finite("1e999"), None);
        assert_eq!(parse_finite("."), None);
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.1), "0.1");
    }

    #[test]
    fn dtype_labels() {
        assert_eq!(DataType::from_label(" Numeric "), Some(DataType::Numerical));
        assert_eq!(DataType::from_label("**categorical**"), Some(DataType::Categorical));
        assert_eq!(DataType::from_label("free text"), Some(DataType::Textual));
        assert_eq!(DataType::from_label("blob"), None);
    }
}
