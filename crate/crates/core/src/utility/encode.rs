//! Table → dense feature matrix, fitted on real training data only.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::UtilityError;
use crate::parse::coerce_cell;
use crate::registry::Task;
use crate::table::{Cell, DataType, Table};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
        let cols = rows.first().map_or(0, Vec::len);
        Matrix::new(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(idx.len(), self.cols, data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureEncoder {
    /// `(v − mean) / sd`; missing or unparseable values become 0 (the mean).
    Standardize { column: String, mean: f64, sd: f64 },
    /// One indicator per real-train level; unseen or missing → all zeros.
    OneHot { column: String, levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetEncoder {
    Classes { labels: Vec<String> },
    Regression,
}

/// Feature and target encoders fitted on the real training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub target: String,
    pub target_encoder: TargetEncoder,
    pub features: Vec<FeatureEncoder>,
    /// Textual feature columns left out.
    pub excluded_columns: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeStats {
    pub rows_in: usize,
    pub rows_out: usize,
    pub dropped_missing_target: usize,
    pub dropped_unseen_label: usize,
    /// Feature cells that were missing or did not parse as numbers.
    pub imputed_numeric: usize,
    pub unseen_categories: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedMatrix {
    pub features: Matrix,
    /// Class index (as f64) for classification, value for regression.
    pub target: Vec<f64>,
    pub n_classes: Option<usize>,
    pub feature_names: Vec<String>,
    pub stats: EncodeStats,
}

impl SupervisedMatrix {
    pub fn class_labels(&self) -> Vec<usize> {
        self.target.iter().map(|&y| y as usize).collect()
    }
}

fn as_number(cell: &Cell) -> Option<f64> {
    match cell {
        Cell::Num(v) => Some(*v),
        Cell::Str(s) => coerce_cell(s, DataType::Numerical, None).ok().and_then(|c| c.as_f64()),
        Cell::Missing => None,
    }
}

fn as_label(cell: &Cell, vocab: &BTreeSet<String>) -> Option<String> {
    match cell {
        Cell::Missing => None,
        Cell::Num(v) => {
            let s = Cell::Num(*v).render();
            vocab.contains(&s).then_some(s)
        }
        Cell::Str(s) => match coerce_cell(s, DataType::Categorical, Some(vocab)) {
            Ok(Cell::Str(v)) => Some(v),
            Ok(Cell::Num(v)) => Some(format!("{v}")),
            _ => {
                // numeric-looking labels written differently ("1.0" for "1")
                let n = coerce_cell(s, DataType::Numerical, None).ok()?.render();
                vocab.contains(&n).then_some(n)
            }
        },
    }
}

impl Encoder {
    pub fn fit(real_train: &Table, target: &str, task: Task) -> Result<Encoder, UtilityError> {
        let t_idx = real_train.column_index(target).ok_or_else(|| UtilityError::TargetMissing(target.to_string()))?;
        let target_encoder = match task {
            Task::Classification => {
                let labels: BTreeSet<String> =
                    real_train.column(t_idx).filter(|c| !c.is_missing()).map(Cell::render).collect();
                if labels.is_empty() {
                    return Err(UtilityError::AllRowsDropped { table: "real".into() });
                }
                TargetEncoder::Classes { labels: labels.into_iter().collect() }
            }
            Task::Regression => TargetEncoder::Regression,
        };
        let mut features = Vec::new();
        let mut excluded_columns = Vec::new();
        for (j, col) in real_train.schema().iter().enumerate() {
            if j == t_idx {
                continue;
            }
            match col.dtype {
                DataType::Textual => excluded_columns.push(col.name.clone()),
                DataType::Numerical => {
                    let v: Vec<f64> = real_train.column(j).filter_map(as_number).collect();
                    let n = v.len().max(1) as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                    // constant columns encode to all zeros
                    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
                    features.push(FeatureEncoder::Standardize { column: col.name.clone(), mean, sd });
                }
                DataType::Categorical => {
                    let levels: BTreeSet<String> =
                        real_train.column(j).filter(|c| !c.is_missing()).map(Cell::render).collect();
                    features.push(FeatureEncoder::OneHot { column: col.name.clone(), levels: levels.into_iter().collect() });
                }
            }
        }
        Ok(Encoder { target: target.to_string(), target_encoder, features, excluded_columns })
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.features {
            match f {
                FeatureEncoder::Standardize { column, .. } => out.push(column.clone()),
                FeatureEncoder::OneHot { column, levels } => out.extend(levels.iter().map(|l| format!("{column}={l}"))),
            }
        }
        out
    }

    pub fn n_classes(&self) -> Option<usize> {
        match &self.target_encoder {
            TargetEncoder::Classes { labels } => Some(labels.len()),
            TargetEncoder::Regression => None,
        }
    }

    /// Encodes any table with the fitted state. Columns are found by name;
    /// a feature column absent from `table` encodes as missing throughout.
    pub fn transform(&self, table: &Table, name: &str) -> Result<SupervisedMatrix, UtilityError> {
        let t_idx = table.column_index(&self.target).ok_or_else(|| UtilityError::TargetMissing(self.target.clone()))?;
        let mut stats = EncodeStats { rows_in: table.n_rows(), ..Default::default() };
        let vocab: Option<BTreeSet<String>> = match &self.target_encoder {
            TargetEncoder::Classes { labels } => Some(labels.iter().cloned().collect()),
            TargetEncoder::Regression => None,
        };
        let label_index: BTreeMap<&str, usize> = match &self.target_encoder {
            TargetEncoder::Classes { labels } => labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect(),
            TargetEncoder::Regression => BTreeMap::new(),
        };
        let level_sets: Vec<Option<BTreeSet<String>>> = self
            .features
            .iter()
            .map(|f| match f {
                FeatureEncoder::OneHot { levels, .. } => Some(levels.iter().cloned().collect()),
                FeatureEncoder::Standardize { .. } => None,
            })
            .collect();
        let cols: Vec<Option<usize>> = self
            .features
            .iter()
            .map(|f| match f {
                FeatureEncoder::Standardize { column, .. } | FeatureEncoder::OneHot { column, .. } => table.column_index(column),
            })
            .collect();
        let width = self.feature_names().len();
        let mut data = Vec::new();
        let mut target = Vec::new();
        for row in table.rows() {
            let y = match &vocab {
                Some(v) => {
                    if row[t_idx].is_missing() {
                        stats.dropped_missing_target += 1;
                        continue;
                    }
                    match as_label(&row[t_idx], v) {
                        Some(l) => label_index[l.as_str()] as f64,
                        None => {
                            stats.dropped_unseen_label += 1;
                            continue;
                        }
                    }
                }
                None => match as_number(&row[t_idx]) {
                    Some(v) => v,
                    None => {
                        stats.dropped_missing_target += 1;
                        continue;
                    }
                },
            };
            target.push(y);
            for ((f, col), levels) in self.features.iter().zip(&cols).zip(&level_sets) {
                let cell = col.map(|c| &row[c]).unwrap_or(&Cell::Missing);
                match f {
                    FeatureEncoder::Standardize { mean, sd, .. } => match as_number(cell) {
                        Some(v) => data.push((v - mean) / sd),
                        None => {
                            stats.imputed_numeric += 1;
                            data.push(0.0);
                        }
                    },
                    FeatureEncoder::OneHot { column, levels: ordered } => {
                        let hit = levels.as_ref().and_then(|v| as_label(cell, v));
                        if hit.is_none() && !cell.is_missing() {
                            *stats.unseen_categories.entry(column.clone()).or_default() += 1;
                        }
                        data.extend(ordered.iter().map(|l| if hit.as_deref() == Some(l) { 1.0 } else { 0.0 }));
                    }
                }
            }
        }
        stats.rows_out = target.len();
        if target.is_empty() {
            return Err(UtilityError::AllRowsDropped { table: name.to_string() });
        }
        Ok(SupervisedMatrix {
            features: Matrix::new(target.len(), width, data),
            target,
            n_classes: self.n_classes(),
            feature_names: self.feature_names(),
            stats,
        })
    }
}
