use serde::{Deserialize, Serialize};

use super::csv_io::csv_block;
use super::{Cell, Table, TableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFormat {
    CsvBlock,
    PipeTable,
}

/// Renders the header and the selected rows, in the given order.
///
/// `CsvBlock` is RFC-4180 with LF separators and no trailing newline.
/// `PipeTable` is a markdown pipe table with a `|---|` alignment row; `\`,
/// `|` and line breaks inside cells are backslash-escaped.
pub fn serialize_rows(table: &Table, row_indices: &[usize], format: RowFormat) -> Result<String, TableError> {
    if let Some(&bad) = row_indices.iter().find(|&&i| i >= table.n_rows()) {
        return Err(TableError::IndexOutOfRange { index: bad, rows: table.n_rows() });
    }
    Ok(match format {
        RowFormat::CsvBlock => csv_block(table, row_indices),
        RowFormat::PipeTable => pipe_table(table, row_indices),
    })
}

fn pipe_table(table: &Table, indices: &[usize]) -> String {
    let mut lines = Vec::with_capacity(indices.len() + 2);
    lines.push(pipe_line(table.column_names().map(escape_pipe_cell)));
    lines.push(format!("|{}", "---|".repeat(table.n_cols())));
    for &i in indices {
        lines.push(pipe_line(table.rows()[i].iter().map(|c| escape_pipe_cell(&Cell::render(c)))));
    }
    lines.join("\n")
}

fn pipe_line(cells: impl Iterator<Item = String>) -> String {
    let mut line = String::from("|");
    for c in cells {
        line.push(' ');
        line.push_str(&c);
        line.push_str(" |");
    }
    line
}

pub(crate) fn escape_pipe_cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}
