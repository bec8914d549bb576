use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use crate::table::{parse_finite, Cell, DataType};

static GROUPED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d{1,3}(,\d{3})+(\.\d*)?$").expect("valid regex"));

const CURRENCY: &[char] = &['$', '€', '£', '¥', '₹', '₩', '₽', '¢'];

/// Converts a raw cell into the schema dtype.
///
/// Empty (after trimming) is `Missing` for every dtype. On failure the raw
/// text comes back as the error so callers can record it.
pub fn coerce_cell(raw: &str, dtype: DataType, vocabulary: Option<&BTreeSet<String>>) -> Result<Cell, String> {
    if raw.trim().is_empty() {
        return Ok(Cell::Missing);
    }
    match dtype {
        DataType::Numerical => coerce_number(raw).map(Cell::Num).ok_or_else(|| raw.to_string()),
        DataType::Categorical => match vocabulary {
            None => Ok(Cell::text(raw)),
            Some(vocab) => {
                if vocab.contains(raw) {
                    return Ok(Cell::text(raw));
                }
                let key = normalize(raw);
                vocab
                    .iter()
                    .find(|v| normalize(v) == key)
                    .map(|v| Cell::text(v.clone()))
                    .ok_or_else(|| raw.to_string())
            }
        },
        DataType::Textual => Ok(Cell::text(raw)),
    }
}

fn coerce_number(raw: &str) -> Option<f64> {
    let stripped: String = raw.trim().chars().filter(|c| !CURRENCY.contains(c)).collect();
    let s = stripped.trim();
    if let Some(v) = parse_finite(s) {
        return Some(v);
    }
    if GROUPED.is_match(s) {
        return parse_finite(&s.replace(',', ""));
    }
    None
}

/// Case-folded, whitespace-collapsed form used for lenient matching.
pub(crate) fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}
