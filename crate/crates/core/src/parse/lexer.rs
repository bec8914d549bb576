//! Line and CSV-record lexing over raw model output, keeping byte offsets.

/// Byte offsets at which each physical line starts.
pub(crate) fn line_starts(text: &str) -> Vec<usize> {
    let mut out = vec![0];
    out.extend(text.bytes().enumerate().filter(|&(i, b)| b == b'\n' && i + 1 < text.len()).map(|(i, _)| i + 1));
    if text.is_empty() {
        out.clear();
    }
    out
}

fn memchr_newline(bytes: &[u8], from: usize) -> Option<usize> {
    bytes[from..].iter().position(|&b| b == b'\n').map(|p| p + from)
}

/// A lexed CSV record. `end` excludes its terminator; `next` is the start
/// of the following record.
#[derive(Debug, Clone)]
pub(crate) struct Record {
    pub fields: Vec<String>,
    pub start: usize,
    pub end: usize,
    pub next: usize,
}

/// Lexes one RFC-4180 record starting at `start`. Quoted fields may span
/// lines. An unterminated quote falls back to reading the physical line with
/// quotes taken literally.
pub(crate) fn lex_record(text: &str, start: usize) -> Record {
    match lex_quoted(text, start) {
        Some(r) => r,
        None => lex_literal_line(text, start),
    }
}

fn lex_quoted(text: &str, start: usize) -> Option<Record> {
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut chars = text[start..].char_indices().peekable();
    let mut at_field_start = true;
    loop {
        let Some((off, c)) = chars.next() else {
            fields.push(field);
            return Some(Record { fields, start, end: text.len(), next: text.len() });
        };
        if at_field_start && c == '"' {
            at_field_start = false;
            // quoted section
            loop {
                match chars.next() {
                    None => return None,
                    Some((_, '"')) => {
                        if matches!(chars.peek(), Some((_, '"'))) {
                            chars.next();
                            field.push('"');
                        } else {
                            break;
                        }
                    }
                    Some((_, ch)) => field.push(ch),
                }
            }
            continue;
        }
        at_field_start = false;
        match c {
            ',' => {
                fields.push(std::mem::take(&mut field));
                at_field_start = true;
            }
            '\n' => {
                fields.push(field);
                let abs = start + off;
                let end = if abs > start && text.as_bytes()[abs - 1] == b'\r' { abs - 1 } else { abs };
                return Some(Record { fields, start, end, next: abs + 1 });
            }
            '\r' if matches!(chars.peek(), Some((_, '\n'))) => {}
            ch => field.push(ch),
        }
    }
}

fn lex_literal_line(text: &str, start: usize) -> Record {
    let bytes = text.as_bytes();
    let (end, next) = match memchr_newline(bytes, start) {
        Some(i) => (if i > start && bytes[i - 1] == b'\r' { i - 1 } else { i }, i + 1),
        None => (text.len(), text.len()),
    };
    let fields = text[start..end].split(',').map(str::to_string).collect();
    Record { fields, start, end, next }
}

/// Splits a pipe-table line into cells: optional outer pipes stripped,
/// `\|`, `\\`, `\n`, `\r` unescaped, cells trimmed.
pub(crate) fn split_pipe_line(line: &str) -> Vec<String> {
    let mut s = line.trim();
    if let Some(rest) = s.strip_prefix('|') {
        s = rest;
    }
    let mut cells = Vec::new();
    let mut cell = String::new();
    let mut chars = s.chars().peekable();
    let mut trailing_pipe = false;
    while let Some(c) = chars.next() {
        trailing_pipe = false;
        match c {
            '\\' => match chars.peek() {
                Some('|') => {
                    cell.push('|');
                    chars.next();
                }
                Some('\\') => {
                    cell.push('\\');
                    chars.next();
                }
                Some('n') => {
                    cell.push('\n');
                    chars.next();
                }
                Some('r') => {
                    cell.push('\r');
                    chars.next();
                }
                _ => cell.push('\\'),
            },
            '|' => {
                cells.push(std::mem::take(&mut cell));
                trailing_pipe = true;
            }
            ch => cell.push(ch),
        }
    }
    if !trailing_pipe {
        cells.push(cell);
    }
    cells.into_iter().map(|c| trim_cell(&c)).collect()
}

/// Trims ASCII spaces and tabs: the padding a pipe renderer adds. Escaped
/// line breaks inside the cell are content and survive.
fn trim_cell(c: &str) -> String {
    c.trim_matches(|ch| ch == ' ' || ch == '\t').to_string()
}

pub(crate) fn is_alignment_row(cells: &[String]) -> bool {
    !cells.is_empty()
        && cells.iter().all(|c| {
            let t = c.trim();
            let core = t.trim_start_matches(':').trim_end_matches(':');
            !core.is_empty() && core.chars().all(|ch| ch == '-')
        })
}

pub(crate) fn is_fence(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}
