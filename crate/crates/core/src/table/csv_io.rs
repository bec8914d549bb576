use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use super::{parse_finite, Cell, ColumnSchema, DataType, Table, TableError};

/// A non-numeric column with at most this many distinct values is categorical.
pub const CATEGORICAL_MAX_DISTINCT: usize = 50;
/// ... or with a distinct-to-present ratio at most this.
pub const CATEGORICAL_MAX_RATIO: f64 = 0.05;

pub fn load_csv(path: impl AsRef<Path>, dtype_overrides: Option<&HashMap<String, DataType>>) -> Result<Table, TableError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| TableError::Io { path: path.display().to_string(), message: e.to_string() })?;
    load_csv_str(&text, dtype_overrides)
}

pub fn load_csv_str(text: &str, dtype_overrides: Option<&HashMap<String, DataType>>) -> Result<Table, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| TableError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let width = header.len();

    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| TableError::Csv(e.to_string()))?;
        if record.len() != width {
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            return Err(TableError::RaggedRow { line, found: record.len(), expected: width });
        }
        raw_rows.push(record.iter().map(str::to_string).collect());
    }

    let mut schema = Vec::with_capacity(width);
    for (c, name) in header.iter().enumerate() {
        let dtype = infer_dtype(raw_rows.iter().map(|r| r[c].as_str()));
        schema.push(ColumnSchema::new(name.clone(), dtype));
    }
    if let Some(overrides) = dtype_overrides {
        for (name, dtype) in overrides {
            let col = schema
                .iter_mut()
                .find(|c| &c.name == name)
                .ok_or_else(|| TableError::UnknownColumn(name.clone()))?;
            col.dtype = *dtype;
        }
    }
    super::validate_schema(&schema)?;

    let mut rows = Vec::with_capacity(raw_rows.len());
    for (r, raw) in raw_rows.into_iter().enumerate() {
        let mut row = Vec::with_capacity(width);
        for (value, col) in raw.into_iter().zip(&schema) {
            let cell = match col.dtype {
                DataType::Numerical => Cell::parse_numeric(&value)
                    .ok_or_else(|| TableError::NonNumericCell { row: r, column: col.name.clone() })?,
                _ => Cell::text(value),
            };
            row.push(cell);
        }
        rows.push(row);
    }
    Table::new(schema, rows)
}

/// Dtype inference from a column's raw values. Depends only on the multiset.
pub(crate) fn infer_dtype<'a>(values: impl Iterator<Item = &'a str>) -> DataType {
    let mut present = 0usize;
    let mut all_numeric = true;
    let mut distinct = BTreeSet::new();
    for v in values {
        if v.is_empty() {
            continue;
        }
        present += 1;
        if all_numeric && parse_finite(v.trim()).is_none() {
            all_numeric = false;
        }
        distinct.insert(v);
    }
    if all_numeric {
        return DataType::Numerical;
    }
    let ratio = distinct.len() as f64 / present as f64;
    if distinct.len() <= CATEGORICAL_MAX_DISTINCT || ratio <= CATEGORICAL_MAX_RATIO {
        DataType::Categorical
    } else {
        DataType::Textual
    }
}

/// RFC-4180 CSV with LF line endings and a trailing newline.
pub fn to_csv_string(table: &Table) -> String {
    let mut out = csv_block(table, &(0..table.n_rows()).collect::<Vec<_>>());
    out.push('\n');
    out
}

pub fn write_csv(table: &Table, path: impl AsRef<Path>) -> Result<(), TableError> {
    let path = path.as_ref();
    fs::write(path, to_csv_string(table)).map_err(|e| TableError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Header plus the given rows, no trailing newline. Indices must be valid.
pub(crate) fn csv_block(table: &Table, indices: &[usize]) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    // writing to a Vec cannot fail
    writer.write_record(table.column_names()).expect("in-memory csv write");
    for &i in indices {
        writer
            .write_record(table.rows()[i].iter().map(Cell::render))
            .expect("in-memory csv write");
    }
    let bytes = writer.into_inner().expect("in-memory csv flush");
    let mut s = String::from_utf8(bytes).expect("csv output of utf-8 input is utf-8");
    if s.ends_with('\n') {
        s.pop();
    }
    s
}
