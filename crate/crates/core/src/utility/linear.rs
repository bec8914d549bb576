//! Least squares with a small ridge and L2-penalized logistic regression
//! (Newton/IRLS, one-vs-rest for more than two classes). The intercept is
//! never penalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::encode::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    pub ols_ridge: f64,
    pub logistic_l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams { ols_ridge: 1e-6, logistic_l2: 1.0, max_iter: 100, tol: 1e-8 }
    }
}

/// Ridge actually used when the requested one left the system singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeFallback {
    pub ridge: f64,
}

/// Weights with the intercept first.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearWeights(pub Vec<f64>);

impl LinearWeights {
    pub fn eval(&self, row: &[f64]) -> f64 {
        self.0[0] + self.0[1..].iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Solves `(A + λ·P) w = b`, with `P` the identity except at the intercept.
/// If that is singular, λ is raised tenfold (and applied to the intercept
/// too) until the Cholesky factorization succeeds.
fn solve_ridge(a: &DMatrix<f64>, b: &DVector<f64>, ridge: f64) -> (DVector<f64>, Option<RidgeFallback>) {
    let dim = a.nrows();
    let scale = (a.trace() / dim as f64).abs().max(1.0);
    let mut lambda = ridge;
    let mut fallback = None;
    for _ in 0..20 {
        let mut m = a.clone();
        let from = if fallback.is_some() { 0 } else { 1 };
        for j in from..dim {
            m[(j, j)] += lambda;
        }
        if let Some(ch) = m.cholesky() {
            return (ch.solve(b), fallback);
        }
        lambda = (lambda * 10.0).max(1e-10 * scale);
        fallback = Some(RidgeFallback { ridge: lambda });
    }
    (DVector::zeros(dim), fallback)
}

fn design(x: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(x.rows(), x.cols() + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) })
}

pub fn fit_ols(x: &Matrix, y: &[f64], params: &LinearParams) -> (LinearWeights, Option<RidgeFallback>) {
    let a = design(x);
    let yt = DVector::from_column_slice(y);
    let (w, fb) = solve_ridge(&(a.transpose() * &a), &(a.transpose() * yt), params.ols_ridge);
    (LinearWeights(w.iter().copied().collect()), fb)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary logistic regression; `y` is 0/1.
pub fn fit_logistic(x: &Matrix, y: &[f64], params: &LinearParams) -> (LinearWeights, Option<RidgeFallback>) {
    let a = design(x);
    let (n, dim) = (a.nrows(), a.ncols());
    let mut w = DVector::<f64>::zeros(dim);
    let mut fallback = None;
    for _ in 0..params.max_iter {
        let eta = &a * &w;
        let p: Vec<f64> = eta.iter().map(|&z| sigmoid(z)).collect();
        let mut grad = DVector::<f64>::zeros(dim);
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            let r = y[i] - p[i];
            let wi = (p[i] * (1.0 - p[i])).max(1e-10);
            let row = a.row(i);
            for j in 0..dim {
                grad[j] += r * row[j];
                for k in j..dim {
                    hess[(j, k)] += wi * row[j] * row[k];
                }
            }
        }
        for j in 0..dim {
            for k in 0..j {
                hess[(j, k)] = hess[(k, j)];
            }
        }
        for j in 1..dim {
            grad[j] -= params.logistic_l2 * w[j];
        }
        let (step, fb) = solve_ridge(&hess, &grad, params.logistic_l2);
        if fb.is_some() {
            fallback = fb;
        }
        w += &step;
        if step.amax() < params.tol {
            break;
        }
    }
    (LinearWeights(w.iter().copied().collect()), fallback)
}

/// Class probabilities: the logistic model itself for two classes,
/// normalized one-vs-rest scores for more.
pub fn predict_classes(models: &[LinearWeights], x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            if models.len() == 1 {
                let p = sigmoid(models[0].eval(row));
                return vec![1.0 - p, p];
            }
            let s: Vec<f64> = models.iter().map(|m| sigmoid(m.eval(row))).collect();
            let total: f64 = s.iter().sum();
            if total > 0.0 {
                s.iter().map(|v| v / total).collect()
            } else {
                vec![1.0 / s.len() as f64; s.len()]
            }
        })
        .collect()
}
