//! Shape and Trend scores between a real and a synthetic table.
//!
//! Shape compares per-column marginals: `100·(1 − KS)` for numerical
//! columns, `100·(1 − TVD)` for categorical and textual ones. Trend compares
//! column pairs: `100·(1 − |ρ_real − ρ_synth| / 2)` for two numerical
//! columns, otherwise `100·(1 − TVD)` between the joint contingency
//! distributions, with numerical columns discretized into quantile bins
//! fitted on the real column.

mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse::coerce_cell;
use crate::table::{Cell, ColumnSchema, DataType, Table};

pub use stats::{frequencies, ks_statistic, pearson, tv_between, tv_distance, QuantileBins};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FidelityError {
    #[error("empty sample")]
    EmptySample,
    #[error("synthetic table shares no columns with the real table")]
    NoCommonColumns,
    #[error("no scorable column pairs")]
    NoPairs,
    #[error("degenerate column {0:?}: zero variance or too few values")]
    DegenerateColumn(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScore {
    pub column: String,
    pub dtype: DataType,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Correlation,
    Contingency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub left: String,
    pub right: String,
    pub kind: PairKind,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingCount {
    pub real: usize,
    pub synth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeScore {
    pub shape: f64,
    pub per_column: Vec<ColumnScore>,
    /// Columns absent or empty in the synthetic table (scored 0), and
    /// columns empty in the real table (not scored).
    pub excluded: Vec<Exclusion>,
    pub missing: BTreeMap<String, MissingCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendScore {
    pub trend: f64,
    pub per_pair: Vec<PairScore>,
    pub excluded: Vec<Exclusion>,
    /// Rows dropped per pair because either cell was missing (real + synth).
    pub incomplete_rows: BTreeMap<String, MissingCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub shape: f64,
    pub trend: Option<f64>,
    pub per_column_shape: Vec<ColumnScore>,
    pub per_pair_trend: Vec<PairScore>,
    pub excluded_columns: Vec<Exclusion>,
    pub excluded_pairs: Vec<Exclusion>,
    pub missing: BTreeMap<String, MissingCount>,
    pub real_rows: usize,
    pub synth_rows: usize,
}

/// Shape and, when at least two columns are comparable, Trend.
pub fn fidelity_report(real: &Table, synth: &Table) -> Result<FidelityReport, FidelityError> {
    let shape = shape_score(real, synth)?;
    let trend = match trend_score(real, synth) {
        Ok(t) => Some(t),
        Err(FidelityError::NoPairs) => None,
        Err(e) => return Err(e),
    };
    Ok(FidelityReport {
        shape: shape.shape,
        trend: trend.as_ref().map(|t| t.trend),
        per_column_shape: shape.per_column,
        per_pair_trend: trend.as_ref().map(|t| t.per_pair.clone()).unwrap_or_default(),
        excluded_columns: shape.excluded,
        excluded_pairs: trend.map(|t| t.excluded).unwrap_or_default(),
        missing: shape.missing,
        real_rows: real.n_rows(),
        synth_rows: synth.n_rows(),
    })
}

/// Index of each real column in the synthetic table, matched by name.
fn common_columns(real: &Table, synth: &Table) -> Result<Vec<Option<usize>>, FidelityError> {
    let idx: Vec<Option<usize>> = real.schema().iter().map(|c| synth.column_index(&c.name)).collect();
    if idx.iter().all(Option::is_none) {
        return Err(FidelityError::NoCommonColumns);
    }
    Ok(idx)
}

/// Values of one column read against the real dtype. Synthetic columns may
/// have been loaded with a different inferred dtype; their cells are coerced
/// from text and failures count as missing.
enum Values {
    Num(Vec<Option<f64>>),
    Cat(Vec<Option<String>>),
}

fn read_column(table: &Table, idx: usize, dtype: DataType) -> Values {
    match dtype {
        DataType::Numerical => Values::Num(
            table
                .column(idx)
                .map(|c| match c {
                    Cell::Num(v) => Some(*v),
                    Cell::Str(s) => coerce_cell(s, DataType::Numerical, None).ok().and_then(|c| c.as_f64()),
                    Cell::Missing => None,
                })
                .collect(),
        ),
        _ => Values::Cat(
            table
                .column(idx)
                .map(|c| match c {
                    Cell::Missing => None,
                    other => Some(other.render()),
                })
                .collect(),
        ),
    }
}

impl Values {
    fn missing(&self) -> usize {
        match self {
            Values::Num(v) => v.iter().filter(|x| x.is_none()).count(),
            Values::Cat(v) => v.iter().filter(|x| x.is_none()).count(),
        }
    }

    fn present_count(&self) -> usize {
        match self {
            Values::Num(v) => v.len(),
            Values::Cat(v) => v.len(),
        }
        .saturating_sub(self.missing())
    }
}

pub fn shape_score(real: &Table, synth: &Table) -> Result<ShapeScore, FidelityError> {
    let common = common_columns(real, synth)?;
    let mut per_column = Vec::new();
    let mut excluded = Vec::new();
    let mut missing = BTreeMap::new();
    for (col, sidx) in real.schema().iter().zip(&common) {
        let ridx = real.column_index(&col.name).expect("column of its own schema");
        let rv = read_column(real, ridx, col.dtype);
        if rv.present_count() == 0 {
            excluded.push(Exclusion { name: col.name.clone(), reason: "no values in real table".into() });
            continue;
        }
        let Some(sidx) = *sidx else {
            excluded.push(Exclusion { name: col.name.clone(), reason: "missing from synthetic table".into() });
            per_column.push(ColumnScore { column: col.name.clone(), dtype: col.dtype, score: 0.0 });
            continue;
        };
        let sv = read_column(synth, sidx, col.dtype);
        missing.insert(col.name.clone(), MissingCount { real: rv.missing(), synth: sv.missing() });
        if sv.present_count() == 0 {
            excluded.push(Exclusion { name: col.name.clone(), reason: "no usable values in synthetic table".into() });
            per_column.push(ColumnScore { column: col.name.clone(), dtype: col.dtype, score: 0.0 });
            continue;
        }
        let distance = match (&rv, &sv) {
            (Values::Num(r), Values::Num(s)) => {
                let r: Vec<f64> = r.iter().flatten().copied().collect();
                let s: Vec<f64> = s.iter().flatten().copied().collect();
                ks_statistic(&r, &s)?
            }
            (Values::Cat(r), Values::Cat(s)) => {
                let r: Vec<&str> = r.iter().flatten().map(String::as_str).collect();
                let s: Vec<&str> = s.iter().flatten().map(String::as_str).collect();
                tv_distance(&r, &s)?
            }
            _ => unreachable!("both sides read with the real dtype"),
        };
        per_column.push(ColumnScore { column: col.name.clone(), dtype: col.dtype, score: to_score(distance) });
    }
    if per_column.is_empty() {
        return Err(FidelityError::NoCommonColumns);
    }
    let shape = mean(per_column.iter().map(|c| c.score));
    Ok(ShapeScore { shape, per_column, excluded, missing })
}

/// The association between two columns, in the representation the Trend
/// score compares.
#[derive(Debug, Clone, PartialEq)]
pub enum Association {
    Correlation(f64),
    /// Joint distribution over (left label, right label).
    Contingency(BTreeMap<(String, String), f64>),
}

/// Association between two aligned columns after dropping rows missing in
/// either. Numerical columns in a mixed pair are discretized with `bins`
/// (fitted on the real column); a missing bin spec for a numerical side
/// fits one from `x`/`y` itself.
pub fn pairwise_association(
    x: &[Cell],
    y: &[Cell],
    kinds: (DataType, DataType),
    bins: (Option<&QuantileBins>, Option<&QuantileBins>),
) -> Result<Association, FidelityError> {
    let pairs: Vec<(&Cell, &Cell)> = x.iter().zip(y).filter(|(a, b)| !a.is_missing() && !b.is_missing()).collect();
    if pairs.is_empty() {
        return Err(FidelityError::EmptySample);
    }
    if kinds == (DataType::Numerical, DataType::Numerical) {
        let xs: Vec<f64> = pairs.iter().filter_map(|(a, _)| a.as_f64()).collect();
        let ys: Vec<f64> = pairs.iter().filter_map(|(_, b)| b.as_f64()).collect();
        return pearson(&xs, &ys).map(Association::Correlation).ok_or_else(|| FidelityError::DegenerateColumn("x/y".into()));
    }
    let own_x;
    let bx = match (kinds.0, bins.0) {
        (DataType::Numerical, None) => {
            own_x = QuantileBins::from_reference(&pairs.iter().filter_map(|(a, _)| a.as_f64()).collect::<Vec<_>>(), QuantileBins::DEFAULT_BINS);
            Some(&own_x)
        }
        (_, b) => b,
    };
    let own_y;
    let by = match (kinds.1, bins.1) {
        (DataType::Numerical, None) => {
            own_y = QuantileBins::from_reference(&pairs.iter().filter_map(|(_, b)| b.as_f64()).collect::<Vec<_>>(), QuantileBins::DEFAULT_BINS);
            Some(&own_y)
        }
        (_, b) => b,
    };
    let labels: Vec<(String, String)> = pairs.iter().map(|(a, b)| (label(a, kinds.0, bx), label(b, kinds.1, by))).collect();
    Ok(Association::Contingency(frequencies(&labels)))
}

fn label(cell: &Cell, dtype: DataType, bins: Option<&QuantileBins>) -> String {
    match (dtype, cell, bins) {
        (DataType::Numerical, Cell::Num(v), Some(b)) => format!("bin{}", b.bin(*v)),
        (_, c, _) => c.render(),
    }
}

pub fn trend_score(real: &Table, synth: &Table) -> Result<TrendScore, FidelityError> {
    let common = common_columns(real, synth)?;
    let schema: Vec<&ColumnSchema> = real.schema().iter().collect();

    // Aligned cell columns for both sides, read with the real dtype.
    let as_cells = |table: &Table, idx: usize, dtype: DataType| -> Vec<Cell> {
        match read_column(table, idx, dtype) {
            Values::Num(v) => v.into_iter().map(|x| x.map_or(Cell::Missing, Cell::Num)).collect(),
            Values::Cat(v) => v.into_iter().map(|x| x.map_or(Cell::Missing, Cell::Str)).collect(),
        }
    };
    let real_cols: Vec<Vec<Cell>> = schema.iter().enumerate().map(|(i, c)| as_cells(real, i, c.dtype)).collect();
    let synth_cols: Vec<Option<Vec<Cell>>> =
        schema.iter().zip(&common).map(|(c, s)| s.map(|s| as_cells(synth, s, c.dtype))).collect();
    let real_bins: Vec<Option<QuantileBins>> = schema
        .iter()
        .zip(&real_cols)
        .map(|(c, cells)| {
            (c.dtype == DataType::Numerical).then(|| {
                let v: Vec<f64> = cells.iter().filter_map(Cell::as_f64).collect();
                QuantileBins::from_reference(&v, QuantileBins::DEFAULT_BINS)
            })
        })
        .collect();

    let mut per_pair = Vec::new();
    let mut excluded = Vec::new();
    let mut incomplete = BTreeMap::new();
    let mut compared = 0usize;
    for i in 0..schema.len() {
        for j in (i + 1)..schema.len() {
            let (Some(sx), Some(sy)) = (&synth_cols[i], &synth_cols[j]) else { continue };
            compared += 1;
            let name = format!("{}|{}", schema[i].name, schema[j].name);
            let kinds = (schema[i].dtype, schema[j].dtype);
            let bins = (real_bins[i].as_ref(), real_bins[j].as_ref());
            let count_incomplete = |a: &[Cell], b: &[Cell]| a.iter().zip(b).filter(|(x, y)| x.is_missing() || y.is_missing()).count();
            incomplete.insert(
                name.clone(),
                MissingCount { real: count_incomplete(&real_cols[i], &real_cols[j]), synth: count_incomplete(sx, sy) },
            );
            let ra = pairwise_association(&real_cols[i], &real_cols[j], kinds, bins);
            let sa = pairwise_association(sx, sy, kinds, bins);
            let (kind, score) = match (ra, sa) {
                (Ok(Association::Correlation(r)), Ok(Association::Correlation(s))) => {
                    (PairKind::Correlation, 100.0 * (1.0 - (r - s).abs() / 2.0))
                }
                (Ok(Association::Contingency(r)), Ok(Association::Contingency(s))) => {
                    (PairKind::Contingency, to_score(tv_between(&r, &s)))
                }
                (Err(e), _) | (_, Err(e)) => {
                    let reason = match e {
                        FidelityError::EmptySample => "no complete rows".to_string(),
                        FidelityError::DegenerateColumn(_) => "zero variance: correlation undefined".to_string(),
                        other => other.to_string(),
                    };
                    excluded.push(Exclusion { name, reason });
                    continue;
                }
                _ => unreachable!("same kinds on both sides"),
            };
            per_pair.push(PairScore { left: schema[i].name.clone(), right: schema[j].name.clone(), kind, score });
        }
    }
    if compared == 0 || per_pair.is_empty() {
        return Err(FidelityError::NoPairs);
    }
    let trend = mean(per_pair.iter().map(|p| p.score));
    Ok(TrendScore { trend, per_pair, excluded, incomplete_rows: incomplete })
}

/// Mean Shape and Trend over separately scored synthetic tables (one per
/// generation), skipping tables that cannot be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerInstanceFidelity {
    pub shape: Option<f64>,
    pub trend: Option<f64>,
    pub scored: usize,
    pub skipped: usize,
}

pub fn per_instance_fidelity<'a>(real: &Table, synths: impl IntoIterator<Item = &'a Table>) -> PerInstanceFidelity {
    let mut shapes = Vec::new();
    let mut trends = Vec::new();
    let mut skipped = 0;
    for s in synths {
        match fidelity_report(real, s) {
            Ok(r) => {
                shapes.push(r.shape);
                if let Some(t) = r.trend {
                    trends.push(t);
                }
            }
            Err(_) => skipped += 1,
        }
    }
    let avg = |v: &[f64]| (!v.is_empty()).then(|| mean(v.iter().copied()));
    PerInstanceFidelity { shape: avg(&shapes), trend: avg(&trends), scored: shapes.len(), skipped }
}

fn to_score(distance: f64) -> f64 {
    (100.0 * (1.0 - distance)).clamp(0.0, 100.0)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}
