//! Bagged CART ensembles. Each tree draws from its own seeded stream, so
//! the fitted forest does not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::Matrix;
use super::tree::{Tree, TreeParams, TreeTarget};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Split candidates per node; `None` picks √d for classes, d/3 for values.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 12, min_samples_leaf: 1, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &Matrix, target: TreeTarget, params: &ForestParams, seed: u64) -> RandomForest {
        let n = x.rows();
        let d = x.cols().max(1);
        let m = params.max_features.unwrap_or(match target {
            TreeTarget::Classes { .. } => ((d as f64).sqrt().round() as usize).max(1),
            TreeTarget::Values { .. } => (d / 3).max(1),
        });
        let tp = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: 2,
            min_samples_leaf: params.min_samples_leaf,
            max_features: Some(m.min(d)),
        };
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::stream(seed, &["forest-tree".into(), t.into()]);
                let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                Tree::fit(x, target, &boot, &tp, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Average leaf output of the first `k` trees for each row.
    pub fn predict_first(&self, x: &Matrix, k: usize) -> Vec<Vec<f64>> {
        let k = k.clamp(1, self.trees.len());
        (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let mut acc = self.trees[0].predict_row(row).to_vec();
                for t in &self.trees[1..k] {
                    for (a, v) in acc.iter_mut().zip(t.predict_row(row)) {
                        *a += v;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= k as f64);
                acc
            })
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<Vec<f64>> {
        self.predict_first(x, self.trees.len())
    }

    /// Output of tree `t` alone for each row.
    pub fn predict_tree(&self, x: &Matrix, t: usize) -> Vec<Vec<f64>> {
        (0..x.rows()).map(|i| self.trees[t].predict_row(x.row(i)).to_vec()).collect()
    }
}
