//! Turns raw model output into a typed table.
//!
//! The scanner looks for CSV blocks (recognized by a header naming most of
//! the schema columns, or headerless rows whose arity and numeric cells fit
//! the schema) and markdown pipe tables. Rows from every block are
//! concatenated; everything else is discarded and reported as character
//! spans.

mod coerce;
mod lexer;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::table::{Cell, ColumnSchema, DataType, Table};

pub use coerce::coerce_cell;
pub(crate) use coerce::normalize;
pub(crate) use lexer::{is_fence, lex_record};

use lexer::{is_alignment_row, line_starts, split_pipe_line};

pub const DEFAULT_HEADER_MATCH: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Fraction of schema columns a CSV header must name to open a block.
    pub header_match_threshold: f64,
    /// Optional per-column vocabularies for categorical normalization.
    pub vocabularies: HashMap<String, BTreeSet<String>>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { header_match_threshold: DEFAULT_HEADER_MATCH, vocabularies: HashMap::new() }
    }
}

impl ParseOptions {
    /// Vocabularies taken from the categorical columns of a reference table.
    pub fn with_vocabularies_from(mut self, table: &Table) -> Self {
        for (c, col) in table.schema().iter().enumerate() {
            if col.dtype == DataType::Categorical {
                let vocab = table
                    .column(c)
                    .filter_map(|cell| match cell {
                        Cell::Str(s) => Some(s.clone()),
                        _ => None,
                    })
                    .collect();
                self.vocabularies.insert(col.name.clone(), vocab);
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Clean,
    Salvaged,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockFormat {
    Csv,
    PipeTable,
}

/// Half-open `[start, end)` character range into the raw text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoercionFailure {
    pub row: usize,
    pub column: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRow {
    /// 1-based line of the raw text where the row starts.
    pub line: usize,
    pub reason: String,
}

/// Rows recovered from one contiguous block.
#[derive(Debug, Clone, PartialEq)]
pub struct TableBlock {
    pub format: BlockFormat,
    pub has_header: bool,
    /// Byte range of the block in the scanned text.
    pub byte_range: (usize, usize),
    pub rows: Vec<Vec<Cell>>,
    /// `row` indexes into `rows`.
    pub coercion_failures: Vec<CoercionFailure>,
    pub dropped_rows: Vec<DroppedRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub status: ParseStatus,
    pub table: Option<Table>,
    pub rows_recovered: usize,
    pub rows_requested: usize,
    pub discarded_spans: Vec<Span>,
    pub coercion_failures: Vec<CoercionFailure>,
    pub dropped_rows: Vec<DroppedRow>,
    /// Rows beyond `rows_requested` that were cut.
    pub truncated_rows: usize,
    pub blocks_found: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

/// Parses the first tabular block found in `text`.
pub fn parse_table_text(text: &str, schema: &[ColumnSchema]) -> Option<TableBlock> {
    scan_blocks(text, schema, &ParseOptions::default()).into_iter().next()
}

pub fn parse_llm_output(raw: &str, schema: &[ColumnSchema], rows_requested: usize) -> ParseOutcome {
    parse_llm_output_with(raw, schema, rows_requested, &ParseOptions::default())
}

pub fn parse_llm_output_with(raw: &str, schema: &[ColumnSchema], rows_requested: usize, opts: &ParseOptions) -> ParseOutcome {
    let blocks = if schema.is_empty() { Vec::new() } else { scan_blocks(raw, schema, opts) };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut dropped = Vec::new();
    let mut yielded = 0usize;
    for block in &blocks {
        yielded += block.rows.len();
        dropped.extend(block.dropped_rows.iter().cloned());
        let offset = rows.len();
        for f in &block.coercion_failures {
            if offset + f.row < rows_requested {
                failures.push(CoercionFailure { row: offset + f.row, ..f.clone() });
            }
        }
        for row in &block.rows {
            if rows.len() < rows_requested {
                rows.push(row.clone());
            }
        }
    }
    let recovered = rows.len();
    let discarded_spans = discarded_spans(raw, &blocks);

    let status = if recovered == 0 {
        ParseStatus::Rejected
    } else if blocks.len() == 1 && discarded_spans.is_empty() && yielded == rows_requested {
        ParseStatus::Clean
    } else {
        ParseStatus::Salvaged
    };

    let hint = match status {
        ParseStatus::Rejected if looks_like_json(raw) => {
            Some("JSON output is not supported; expected a CSV block or a markdown pipe table".to_string())
        }
        ParseStatus::Rejected if !blocks.is_empty() => Some("tabular blocks found but no rows matched the schema".to_string()),
        ParseStatus::Rejected => Some("no tabular block matching the schema".to_string()),
        _ => None,
    };

    let table = if recovered > 0 {
        // rows were built cell-by-cell against this schema
        Some(Table::new(schema.to_vec(), rows).expect("coerced rows satisfy the schema"))
    } else {
        failures.clear();
        None
    };

    ParseOutcome {
        status,
        table,
        rows_recovered: recovered,
        rows_requested,
        discarded_spans,
        coercion_failures: failures,
        dropped_rows: dropped,
        truncated_rows: yielded.saturating_sub(recovered),
        blocks_found: blocks.len(),
        hint,
    }
}

fn looks_like_json(raw: &str) -> bool {
    let t = raw.trim_start();
    let t = t.strip_prefix("```json").map(str::trim_start).unwrap_or(t);
    t.starts_with('[') || t.starts_with('{')
}

/// Non-whitespace stretches of text outside every block, as char ranges.
fn discarded_spans(raw: &str, blocks: &[TableBlock]) -> Vec<Span> {
    let mut gaps = Vec::new();
    let mut cursor = 0;
    for b in blocks {
        gaps.push((cursor, b.byte_range.0));
        cursor = b.byte_range.1;
    }
    gaps.push((cursor, raw.len()));

    let mut spans = Vec::new();
    for (s, e) in gaps {
        let gap = &raw[s..e];
        let lead = gap.len() - gap.trim_start().len();
        let trimmed = gap.trim();
        if trimmed.is_empty() {
            continue;
        }
        let bs = s + lead;
        let be = bs + trimmed.len();
        spans.push(Span { start: char_offset(raw, bs), end: char_offset(raw, be) });
    }
    spans
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

type Mapping = Vec<Option<usize>>;

fn header_key(s: &str) -> String {
    let t = s.trim().trim_matches(|c: char| matches!(c, '*' | '`' | '"' | '\''));
    normalize(&t.replace('_', " "))
}

/// Maps header fields to schema columns: exact names first, then normalized
/// names, then positions when the arity matches. `None` if fewer than
/// `threshold` of the schema columns are named.
fn map_header(fields: &[String], schema: &[ColumnSchema], threshold: f64) -> Option<Mapping> {
    let mut mapping: Mapping = vec![None; fields.len()];
    let mut taken = vec![false; schema.len()];
    for (j, f) in fields.iter().enumerate() {
        let f = f.trim();
        if let Some(i) = schema.iter().enumerate().position(|(i, c)| !taken[i] && c.name == f) {
            mapping[j] = Some(i);
            taken[i] = true;
        }
    }
    for (j, f) in fields.iter().enumerate() {
        if mapping[j].is_some() {
            continue;
        }
        let key = header_key(f);
        if let Some(i) = schema.iter().enumerate().position(|(i, c)| !taken[i] && header_key(&c.name) == key) {
            mapping[j] = Some(i);
            taken[i] = true;
        }
    }
    let matched = taken.iter().filter(|&&t| t).count();
    if (matched as f64) < threshold * schema.len() as f64 || matched == 0 {
        return None;
    }
    if fields.len() == schema.len() {
        for j in 0..fields.len() {
            if mapping[j].is_none() && !taken[j] {
                mapping[j] = Some(j);
                taken[j] = true;
            }
        }
    }
    Some(mapping)
}

fn positional(schema: &[ColumnSchema]) -> Mapping {
    (0..schema.len()).map(Some).collect()
}

fn is_repeated_header(fields: &[String], header: Option<&[String]>) -> bool {
    header.is_some_and(|h| h.len() == fields.len() && h.iter().zip(fields).all(|(a, b)| header_key(a) == header_key(b)))
}

struct RawBlock {
    format: BlockFormat,
    has_header: bool,
    start: usize,
    end: usize,
    mapping: Mapping,
    rows: Vec<Vec<String>>,
    dropped: Vec<DroppedRow>,
}

/// Finds every block in order of appearance.
pub(crate) fn scan_blocks(text: &str, schema: &[ColumnSchema], opts: &ParseOptions) -> Vec<TableBlock> {
    let line_starts = line_starts(text);
    let line_no = |byte: usize| line_starts.partition_point(|&s| s <= byte);

    let mut blocks = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let (line_end, next) = line_bounds(text, pos);
        let line = &text[pos..line_end];
        let block = if line.trim().is_empty() || is_fence(line) {
            None
        } else if looks_like_pipe_start(text, pos, line) {
            scan_pipe(text, pos, schema, opts, &line_no)
        } else {
            scan_csv(text, pos, schema, opts, &line_no)
        };
        match block {
            Some(raw) => {
                let next_pos = line_bounds(text, raw.end).1;
                blocks.push(finish_block(raw, schema, opts));
                pos = next_pos.max(next);
            }
            None => pos = next,
        }
    }
    blocks
}

fn line_bounds(text: &str, pos: usize) -> (usize, usize) {
    let bytes = text.as_bytes();
    match bytes[pos..].iter().position(|&b| b == b'\n') {
        Some(i) => {
            let nl = pos + i;
            let end = if nl > pos && bytes[nl - 1] == b'\r' { nl - 1 } else { nl };
            (end, nl + 1)
        }
        None => (text.len(), text.len()),
    }
}

fn looks_like_pipe_start(text: &str, pos: usize, line: &str) -> bool {
    if line.trim_start().starts_with('|') {
        return true;
    }
    if !line.contains('|') {
        return false;
    }
    let (_, next) = line_bounds(text, pos);
    if next >= text.len() {
        return false;
    }
    let (e2, _) = line_bounds(text, next);
    let cells = split_pipe_line(&text[next..e2]);
    is_alignment_row(&cells) && cells.len() == split_pipe_line(line).len()
}

fn scan_pipe(text: &str, pos: usize, schema: &[ColumnSchema], opts: &ParseOptions, line_no: &dyn Fn(usize) -> usize) -> Option<RawBlock> {
    let leading_pipe = text[pos..].trim_start().starts_with('|');
    let mut lines_in: Vec<(usize, usize, Vec<String>)> = Vec::new();
    let mut p = pos;
    while p < text.len() {
        let (e, n) = line_bounds(text, p);
        let l = &text[p..e];
        let continues = if leading_pipe { l.trim_start().starts_with('|') } else { l.contains('|') && !l.trim().is_empty() };
        if !continues {
            break;
        }
        lines_in.push((p, e, split_pipe_line(l)));
        p = n;
    }
    let end = lines_in.last()?.1;

    let first = &lines_in[0].2;
    let has_alignment = lines_in.len() >= 2 && is_alignment_row(&lines_in[1].2);
    let (mapping, header, data_from) = if has_alignment {
        let m = map_header(first, schema, opts.header_match_threshold)
            .or_else(|| (first.len() == schema.len()).then(|| positional(schema)))?;
        (m, Some(first.clone()), 2)
    } else if let Some(m) = map_header(first, schema, opts.header_match_threshold) {
        (m, Some(first.clone()), 1)
    } else if first.len() == schema.len() {
        (positional(schema), None, 0)
    } else {
        return None;
    };
    let arity = mapping.len();

    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (start, _, cells) in &lines_in[data_from..] {
        if is_alignment_row(cells) {
            continue;
        }
        if is_repeated_header(cells, header.as_deref()) {
            dropped.push(DroppedRow { line: line_no(*start), reason: "repeated header".into() });
        } else if cells.len() == arity {
            rows.push(cells.clone());
        } else {
            dropped.push(DroppedRow {
                line: line_no(*start),
                reason: format!("row has {} cells, expected {arity}", cells.len()),
            });
        }
    }
    Some(RawBlock { format: BlockFormat::PipeTable, has_header: header.is_some(), start: pos, end, mapping, rows, dropped })
}

fn scan_csv(text: &str, pos: usize, schema: &[ColumnSchema], opts: &ParseOptions, line_no: &dyn Fn(usize) -> usize) -> Option<RawBlock> {
    let first = lex_record(text, pos);
    let (mapping, header, mut rows, data_pos, mut end) =
        if let Some(m) = map_header(&first.fields, schema, opts.header_match_threshold) {
            (m, Some(first.fields.clone()), Vec::new(), first.next, first.end)
        } else if plausible_headerless(text, &first, schema) {
            (positional(schema), None, vec![first.fields.clone()], first.next, first.end)
        } else {
            return None;
        };
    let arity = mapping.len();

    let mut dropped = Vec::new();
    let mut p = data_pos;
    while p < text.len() {
        let (e, _) = line_bounds(text, p);
        let l = &text[p..e];
        if l.trim().is_empty() || is_fence(l) || l.trim_start().starts_with('|') {
            break;
        }
        let rec = lex_record(text, p);
        if rec.fields.len() == arity {
            if is_repeated_header(&rec.fields, header.as_deref()) {
                dropped.push(DroppedRow { line: line_no(rec.start), reason: "repeated header".into() });
            } else {
                rows.push(rec.fields);
            }
        } else if rec.fields.len() == 1 && arity >= 2 {
            // a delimiter-free line is prose, not a malformed row
            break;
        } else {
            dropped.push(DroppedRow {
                line: line_no(rec.start),
                reason: format!("row has {} cells, expected {arity}", rec.fields.len()),
            });
        }
        end = rec.end;
        p = rec.next;
    }
    Some(RawBlock { format: BlockFormat::Csv, has_header: header.is_some(), start: pos, end, mapping, rows, dropped })
}

/// Headerless rows are accepted only when they carry the schema's arity and
/// every numerical column parses. Schemas without numerical columns need a
/// second row of the same arity as corroboration.
fn plausible_headerless(text: &str, rec: &lexer::Record, schema: &[ColumnSchema]) -> bool {
    if rec.fields.len() != schema.len() {
        return false;
    }
    let has_numeric = schema.iter().any(|c| c.dtype == DataType::Numerical);
    if schema.len() < 2 && !has_numeric {
        return false;
    }
    if rec.fields.iter().all(|f| f.trim().is_empty()) {
        return false;
    }
    let numeric_ok = schema.iter().zip(&rec.fields).all(|(c, f)| {
        c.dtype != DataType::Numerical || coerce_cell(f, DataType::Numerical, None).is_ok()
    });
    if !numeric_ok {
        return false;
    }
    if has_numeric {
        return true;
    }
    if rec.next >= text.len() {
        return false;
    }
    let (e, _) = line_bounds(text, rec.next);
    let l = &text[rec.next..e];
    !l.trim().is_empty() && !is_fence(l) && lex_record(text, rec.next).fields.len() == schema.len()
}

fn finish_block(raw: RawBlock, schema: &[ColumnSchema], opts: &ParseOptions) -> TableBlock {
    let mut rows = Vec::with_capacity(raw.rows.len());
    let mut failures = Vec::new();
    for fields in raw.rows {
        let r = rows.len();
        let mut row = vec![Cell::Missing; schema.len()];
        for (j, field) in fields.iter().enumerate() {
            let Some(c) = raw.mapping[j] else { continue };
            let col = &schema[c];
            match coerce_cell(field, col.dtype, opts.vocabularies.get(&col.name)) {
                Ok(cell) => row[c] = cell,
                Err(raw_cell) => failures.push(CoercionFailure { row: r, column: col.name.clone(), raw: raw_cell }),
            }
        }
        rows.push(row);
    }
    TableBlock {
        format: raw.format,
        has_header: raw.has_header,
        byte_range: (raw.start, raw.end),
        rows,
        coercion_failures: failures,
        dropped_rows: raw.dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{load_csv_str, serialize_rows, RowFormat};

    fn schema_ab() -> Vec<ColumnSchema> {
        vec![ColumnSchema::new("a", DataType::Numerical), ColumnSchema::new("b", DataType::Categorical)]
    }

    fn rows_of(block: &TableBlock) -> Vec<Vec<Cell>> {
        block.rows.clone()
    }

    #[test]
    fn exact_csv_block() {
        let b = parse_table_text("a,b\n1,x\n2,y", &schema_ab()).unwrap();
        assert_eq!(rows_of(&b), vec![vec![Cell::Num(1.0), Cell::text("x")], vec![Cell::Num(2.0), Cell::text("y")]]);
        assert!(b.coercion_failures.is_empty() && b.dropped_rows.is_empty());
        assert!(b.has_header);
    }

    #[test]
    fn pipe_table_with_and_without_alignment() {
        let with = parse_table_text("| a | b |\n|---|---|\n| 1 | x |\n| 2 | y |", &schema_ab()).unwrap();
        let without = parse_table_text("| a | b |\n| 1 | x |\n| 2 | y |", &schema_ab()).unwrap();
        let csv = parse_table_text("a,b\n1,x\n2,y", &schema_ab()).unwrap();
        assert_eq!(rows_of(&with), rows_of(&csv));
        assert_eq!(rows_of(&without), rows_of(&csv));
        assert_eq!(with.format, BlockFormat::PipeTable);
    }

    #[test]
    fn wrong_arity_row_is_dropped_and_recorded() {
        let b = parse_table_text("a,b\n1,x,EXTRA\n2,y", &schema_ab()).unwrap();
        assert_eq!(b.rows.len(), 1);
        assert_eq!(b.dropped_rows, vec![DroppedRow { line: 2, reason: "row has 3 cells, expected 2".into() }]);
        let b = parse_table_text("a,b\n2,y\n1,x,EXTRA", &schema_ab()).unwrap();
        assert_eq!((b.rows.len(), b.dropped_rows.len()), (1, 1));
    }

    #[test]
    fn columns_align_by_header_name() {
        let b = parse_table_text("b,a\nx,1", &schema_ab()).unwrap();
        assert_eq!(b.rows[0], vec![Cell::Num(1.0), Cell::text("x")]);
    }

    #[test]
    fn header_typo_falls_back_to_position() {
        let schema: Vec<_> = ["alpha", "beta", "gamma", "delta", "epsilon"]
            .iter()
            .map(|n| ColumnSchema::new(*n, DataType::Numerical))
            .collect();
        let b = parse_table_text("alpha,beta,gamma,delta,epsilom\n1,2,3,4,5", &schema).unwrap();
        assert!(b.has_header);
        assert_eq!(b.rows[0][4], Cell::Num(5.0));
        // 3/5 named is under the threshold: header line is not a header
        let out = parse_llm_output("alpha,beta,gamma,dx,ex\n1,2,3,4,5", &schema, 1);
        assert_eq!(out.status, ParseStatus::Salvaged);
        assert_eq!(out.discarded_spans, vec![Span { start: 0, end: 22 }]);
    }

    #[test]
    fn normalized_header_match() {
        let schema = vec![ColumnSchema::new("sepal_length", DataType::Numerical), ColumnSchema::new("Species", DataType::Categorical)];
        let b = parse_table_text("Sepal Length,species\n5.1,setosa", &schema).unwrap();
        assert_eq!(b.rows[0], vec![Cell::Num(5.1), Cell::text("setosa")]);
    }

    #[test]
    fn headerless_positional_block() {
        let out = parse_llm_output("1,x\n2,y", &schema_ab(), 2);
        assert_eq!(out.status, ParseStatus::Clean);
        assert_eq!(out.rows_recovered, 2);
        // numeric column must parse for a headerless block to open
        let out = parse_llm_output("Sure, here\nok", &schema_ab(), 2);
        assert_eq!(out.status, ParseStatus::Rejected);
    }

    #[test]
    fn coercion_failures_keep_row_with_missing_cell() {
        let out = parse_llm_output("a,b\nN/A,x\n2,y", &schema_ab(), 2);
        assert_eq!(out.status, ParseStatus::Clean);
        assert_eq!(out.coercion_failures, vec![CoercionFailure { row: 0, column: "a".into(), raw: "N/A".into() }]);
        assert_eq!(out.table.unwrap().rows()[0][0], Cell::Missing);
    }

    #[test]
    fn preamble_fence_and_trailing_prose_are_two_spans() {
        let body = "a,b\n1,x\n2,y";
        let raw = format!("Here are 2 rows:\n```csv\n{body}\n```\nHope this helps.");
        let out = parse_llm_output(&raw, &schema_ab(), 2);
        assert_eq!(out.status, ParseStatus::Salvaged);
        assert_eq!(out.rows_recovered, 2);
        let pre = "Here are 2 rows:\n```csv";
        let post_start = pre.len() + 1 + body.len() + 1;
        assert_eq!(
            out.discarded_spans,
            vec![Span { start: 0, end: pre.len() }, Span { start: post_start, end: raw.len() }]
        );
        assert_eq!(&raw[post_start..], "```\nHope this helps.");
    }

    #[test]
    fn excess_rows_are_truncated() {
        let out = parse_llm_output("a,b\n1,x\n2,y\n3,z", &schema_ab(), 2);
        assert_eq!(out.status, ParseStatus::Salvaged);
        assert_eq!((out.rows_recovered, out.truncated_rows), (2, 1));
    }

    #[test]
    fn multiple_blocks_concatenate() {
        let raw = "a,b\n1,x\n\nsome words\n\n| a | b |\n|---|---|\n| 2 | y |";
        let out = parse_llm_output(raw, &schema_ab(), 2);
        assert_eq!(out.status, ParseStatus::Salvaged);
        assert_eq!(out.blocks_found, 2);
        let t = out.table.unwrap();
        assert_eq!(t.rows()[1][0], Cell::Num(2.0));
    }

    #[test]
    fn instruction_text_is_rejected() {
        let raw = "### Instruction:\nYou are a helpful assistant. Describe the table below.\n### Response:\nPlease provide the table so I can describe it";
        let out = parse_llm_output(raw, &schema_ab(), 20);
        assert_eq!(out.status, ParseStatus::Rejected);
        assert!(out.table.is_none());
        assert_eq!(out.rows_recovered, 0);
    }

    #[test]
    fn json_gets_a_hint() {
        let out = parse_llm_output("[{\"a\": 1, \"b\": \"x\"}]", &schema_ab(), 1);
        assert_eq!(out.status, ParseStatus::Rejected);
        assert!(out.hint.unwrap().contains("JSON"));
    }

    #[test]
    fn vocabulary_normalization() {
        let real = load_csv_str("a,b\n1,Male\n2,Female\n", None).unwrap();
        let opts = ParseOptions::default().with_vocabularies_from(&real);
        let out = parse_llm_output_with("a,b\n3, male \n4,Other", real.schema(), 2, &opts);
        let t = out.table.unwrap();
        assert_eq!(t.rows()[0][1], Cell::text("Male"));
        assert_eq!(t.rows()[1][1], Cell::Missing);
        assert_eq!(out.coercion_failures.len(), 1);
    }

    #[test]
    fn round_trip_both_formats() {
        let t = load_csv_str("n,s,t\n1.5,\"a,b\",\"multi\nline\"\n,x|y,\n-2,\"q\"\"uote\",z\n", None).unwrap();
        let all: Vec<usize> = (0..t.n_rows()).collect();
        for f in [RowFormat::CsvBlock, RowFormat::PipeTable] {
            let text = serialize_rows(&t, &all, f).unwrap();
            let out = parse_llm_output(&text, t.schema(), t.n_rows());
            assert_eq!(out.status, ParseStatus::Clean, "{f:?}: {text}");
            assert_eq!(out.table.unwrap().rows(), t.rows());
        }
    }

    #[test]
    fn empty_and_whitespace_inputs() {
        for raw in ["", "   \n\n", "```\n```"] {
            assert_eq!(parse_llm_output(raw, &schema_ab(), 1).status, ParseStatus::Rejected);
        }
    }
}
