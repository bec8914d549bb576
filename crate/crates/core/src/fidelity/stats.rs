use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::FidelityError;

/// Two-sample Kolmogorov–Smirnov statistic: sup |ECDF_a − ECDF_b|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, FidelityError> {
    if a.is_empty() || b.is_empty() {
        return Err(FidelityError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < a.len() || j < b.len() {
        // next evaluation point: smallest value not yet passed on either side
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].total_cmp(&v) != Ordering::Greater {
            i += 1;
        }
        while j < b.len() && b[j].total_cmp(&v) != Ordering::Greater {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Empirical frequency of each category, keyed in sorted order.
pub fn frequencies<K: Ord + Clone>(values: &[K]) -> BTreeMap<K, f64> {
    let mut counts: BTreeMap<K, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v.clone()).or_default() += 1;
    }
    let n = values.len() as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}

/// Total variation distance ½ Σ |p_a − p_b| between two distributions given
/// as frequency maps. Categories are visited in sorted order.
pub fn tv_between<K: Ord + Clone>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<&K> = p.keys().chain(q.keys()).collect();
    keys.sort();
    keys.dedup();
    let sum: f64 = keys
        .into_iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum();
    (0.5 * sum).min(1.0)
}

/// Total variation distance between the empirical distributions of two
/// categorical samples.
pub fn tv_distance<K: Ord + Clone>(a: &[K], b: &[K]) -> Result<f64, FidelityError> {
    if a.is_empty() || b.is_empty() {
        return Err(FidelityError::EmptySample);
    }
    Ok(tv_between(&frequencies(a), &frequencies(b)))
}

/// Pearson correlation, or `None` for fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Quantile cut points computed from a reference (real) sample. Ties are
/// merged, so there are at most `max_bins` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBins {
    edges: Vec<f64>,
}

impl QuantileBins {
    pub const DEFAULT_BINS: usize = 10;

    pub fn from_reference(values: &[f64], max_bins: usize) -> QuantileBins {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut edges = Vec::new();
        if n > 0 && max_bins > 1 {
            for k in 1..max_bins {
                let e = sorted[((k * n) / max_bins).min(n - 1)];
                if e > sorted[0] && edges.last() != Some(&e) {
                    edges.push(e);
                }
            }
        }
        QuantileBins { edges }
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin index: the number of cut points at or below `v`.
    pub fn bin(&self, v: f64) -> usize {
        self.edges.partition_point(|&e| e <= v)
    }
}
