//! Gradient-boosted regression trees for squared, logistic and softmax
//! loss. Leaves take a Newton step on the loss, shrunk by the learning rate.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::encode::Matrix;
use super::tree::{Tree, TreeParams, TreeTarget};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn without replacement for each round.
    pub subsample: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { n_rounds: 200, learning_rate: 0.1, max_depth: 3, min_samples_leaf: 1, subsample: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Squared,
    Logistic,
    Softmax { k: usize },
}

impl Loss {
    fn outputs(self) -> usize {
        match self {
            Loss::Squared | Loss::Logistic => 1,
            Loss::Softmax { k } => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoosting {
    loss: Loss,
    init: Vec<f64>,
    learning_rate: f64,
    /// One tree per output per round.
    rounds: Vec<Vec<Tree>>,
    /// Mean training loss before any round and after each round.
    pub train_loss: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(f: &[f64]) -> Vec<f64> {
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = f.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

const EPS: f64 = 1e-12;

fn mean_loss(loss: Loss, f: &[Vec<f64>], y: &[f64]) -> f64 {
    let total: f64 = f
        .iter()
        .zip(y)
        .map(|(fi, &yi)| match loss {
            Loss::Squared => (yi - fi[0]).powi(2),
            Loss::Logistic => {
                let p = sigmoid(fi[0]).clamp(EPS, 1.0 - EPS);
                -(yi * p.ln() + (1.0 - yi) * (1.0 - p).ln())
            }
            Loss::Softmax { .. } => -softmax(fi)[yi as usize].max(EPS).ln(),
        })
        .sum();
    total / y.len() as f64
}

impl GradientBoosting {
    /// `y` holds values for `Squared`, 0/1 for `Logistic` and class indices
    /// for `Softmax`.
    pub fn fit(x: &Matrix, y: &[f64], loss: Loss, params: &BoostParams, seed: u64) -> GradientBoosting {
        let n = x.rows();
        assert!(n > 0 && y.len() == n, "boosting needs aligned, non-empty data");
        let k = loss.outputs();
        let init: Vec<f64> = match loss {
            Loss::Squared => vec![y.iter().sum::<f64>() / n as f64],
            Loss::Logistic => {
                let p = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
                vec![(p / (1.0 - p)).ln()]
            }
            Loss::Softmax { k } => (0..k)
                .map(|c| {
                    let p = y.iter().filter(|&&v| v as usize == c).count() as f64 / n as f64;
                    p.max(1e-6).ln()
                })
                .collect(),
        };
        let tp = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: 2,
            min_samples_leaf: params.min_samples_leaf,
            max_features: None,
        };
        let mut f: Vec<Vec<f64>> = vec![init.clone(); n];
        let mut train_loss = vec![mean_loss(loss, &f, y)];
        let mut rounds = Vec::with_capacity(params.n_rounds);
        let all: Vec<usize> = (0..n).collect();
        let m = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        for r in 0..params.n_rounds {
            let mut rng = seed::stream(seed, &["boost-round".into(), r.into()]);
            let rows: Vec<usize> = if m < n {
                let mut s = sample(&mut rng, n, m).into_vec();
                s.sort_unstable();
                s
            } else {
                all.clone()
            };
            let probs: Vec<Vec<f64>> = match loss {
                Loss::Squared => Vec::new(),
                Loss::Logistic => f.iter().map(|fi| vec![sigmoid(fi[0])]).collect(),
                Loss::Softmax { .. } => f.iter().map(|fi| softmax(fi)).collect(),
            };
            let mut trees = Vec::with_capacity(k);
            for c in 0..k {
                let residual: Vec<f64> = (0..n)
                    .map(|i| match loss {
                        Loss::Squared => y[i] - f[i][0],
                        Loss::Logistic => y[i] - probs[i][0],
                        Loss::Softmax { .. } => (if y[i] as usize == c { 1.0 } else { 0.0 }) - probs[i][c],
                    })
                    .collect();
                let mut tree = Tree::fit(x, TreeTarget::Values { y: &residual }, &rows, &tp, &mut rng);
                match loss {
                    // the squared-error leaf mean already is the Newton step
                    Loss::Squared => {}
                    Loss::Logistic => tree.refit_leaves(x, &rows, |mem| {
                        let num: f64 = mem.iter().map(|&i| residual[i]).sum();
                        let den: f64 = mem.iter().map(|&i| probs[i][0] * (1.0 - probs[i][0])).sum();
                        num / den.max(EPS)
                    }),
                    Loss::Softmax { k } => {
                        let scale = (k as f64 - 1.0) / k as f64;
                        tree.refit_leaves(x, &rows, |mem| {
                            let num: f64 = mem.iter().map(|&i| residual[i]).sum();
                            let den: f64 = mem.iter().map(|&i| residual[i].abs() * (1.0 - residual[i].abs())).sum();
                            scale * num / den.max(EPS)
                        })
                    }
                }
                trees.push(tree);
            }
            for (i, fi) in f.iter_mut().enumerate() {
                for (c, t) in trees.iter().enumerate() {
                    fi[c] += params.learning_rate * t.predict_row(x.row(i))[0];
                }
            }
            train_loss.push(mean_loss(loss, &f, y));
            rounds.push(trees);
        }
        GradientBoosting { loss, init, learning_rate: params.learning_rate, rounds, train_loss }
    }

    fn raw(&self, row: &[f64]) -> Vec<f64> {
        let mut f = self.init.clone();
        for trees in &self.rounds {
            for (c, t) in trees.iter().enumerate() {
                f[c] += self.learning_rate * t.predict_row(row)[0];
            }
        }
        f
    }

    /// Values for `Squared`; class probabilities otherwise (two columns for
    /// `Logistic`).
    pub fn predict(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.rows())
            .map(|i| {
                let f = self.raw(x.row(i));
                match self.loss {
                    Loss::Squared => f,
                    Loss::Logistic => {
                        let p = sigmoid(f[0]);
                        vec![1.0 - p, p]
                    }
                    Loss::Softmax { .. } => softmax(&f),
                }
            })
            .collect()
    }
}
