use serde::{Deserialize, Serialize};

use super::UtilityError;

/// 1-based ranks with ties given their average rank.
fn midranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve via the Mann–Whitney U statistic: the chance a
/// random positive scores above a random negative, ties counting ½.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, UtilityError> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(UtilityError::UndefinedAuc);
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Macro one-vs-rest AUC over the classes present in `labels` (needs at
/// least two). `probs[i][k]` is the score of row `i` for class `k`.
pub fn auc_multiclass(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64, UtilityError> {
    let k = probs.first().map_or(0, Vec::len);
    if k == 2 {
        let s: Vec<f64> = probs.iter().map(|p| p[1]).collect();
        let l: Vec<bool> = labels.iter().map(|&y| y == 1).collect();
        return auc(&s, &l);
    }
    let mut per_class = Vec::new();
    for c in 0..k {
        let l: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        if !l.iter().any(|&b| b) {
            continue;
        }
        let s: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        per_class.push(auc(&s, &l)?);
    }
    if per_class.len() < 2 {
        return Err(UtilityError::UndefinedAuc);
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}

/// 1 − SS_res / SS_tot.
pub fn r2(pred: &[f64], actual: &[f64]) -> Result<f64, UtilityError> {
    assert_eq!(pred.len(), actual.len(), "pred and actual differ in length");
    if actual.len() < 2 {
        return Err(UtilityError::ZeroVariance);
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(UtilityError::ZeroVariance);
    }
    let ss_res: f64 = pred.iter().zip(actual).map(|(p, a)| (a - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mape {
    pub value: f64,
    /// Rows skipped because the actual value is zero.
    pub zero_actuals: usize,
}

/// Mean of |pred − actual| / |actual| over rows with nonzero actual.
pub fn mape(pred: &[f64], actual: &[f64]) -> Result<Mape, UtilityError> {
    assert_eq!(pred.len(), actual.len(), "pred and actual differ in length");
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, a) in pred.iter().zip(actual) {
        if *a != 0.0 {
            sum += ((p - a) / a).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(UtilityError::AllZeroActuals);
    }
    Ok(Mape { value: sum / n as f64, zero_actuals: actual.len() - n })
}
