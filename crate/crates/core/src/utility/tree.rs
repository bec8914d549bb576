//! CART decision trees: Gini splits for classes, squared-error splits for
//! values. Thresholds sit midway between consecutive distinct values and
//! `x <= threshold` goes left.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encode::Matrix;

#[derive(Debug, Clone, Copy)]
pub enum TreeTarget<'a> {
    Classes { y: &'a [usize], k: usize },
    Values { y: &'a [f64] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features drawn (without replacement) as split candidates at each
    /// node; `None` tries all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 12, min_samples_split: 2, min_samples_leaf: 1, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf { value: Vec<f64> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Running sufficient statistics for one side of a split.
#[derive(Clone)]
enum Stats {
    Classes { counts: Vec<f64>, n: f64 },
    Values { sum: f64, sum_sq: f64, n: f64 },
}

impl Stats {
    fn empty(target: &TreeTarget) -> Stats {
        match target {
            TreeTarget::Classes { k, .. } => Stats::Classes { counts: vec![0.0; *k], n: 0.0 },
            TreeTarget::Values { .. } => Stats::Values { sum: 0.0, sum_sq: 0.0, n: 0.0 },
        }
    }

    fn of(target: &TreeTarget, idx: &[usize]) -> Stats {
        let mut s = Stats::empty(target);
        for &i in idx {
            s.add(target, i, 1.0);
        }
        s
    }

    fn add(&mut self, target: &TreeTarget, i: usize, w: f64) {
        match (self, target) {
            (Stats::Classes { counts, n }, TreeTarget::Classes { y, .. }) => {
                counts[y[i]] += w;
                *n += w;
            }
            (Stats::Values { sum, sum_sq, n }, TreeTarget::Values { y }) => {
                *sum += w * y[i];
                *sum_sq += w * y[i] * y[i];
                *n += w;
            }
            _ => unreachable!("stats built for this target"),
        }
    }

    /// Node impurity times node size: n·Gini, or the sum of squared errors.
    fn weighted_impurity(&self) -> f64 {
        match self {
            Stats::Classes { counts, n } => {
                if *n == 0.0 {
                    0.0
                } else {
                    n - counts.iter().map(|c| c * c).sum::<f64>() / n
                }
            }
            Stats::Values { sum, sum_sq, n } => {
                if *n == 0.0 {
                    0.0
                } else {
                    (sum_sq - sum * sum / n).max(0.0)
                }
            }
        }
    }

    fn leaf_value(&self) -> Vec<f64> {
        match self {
            Stats::Classes { counts, n } => counts.iter().map(|c| c / n).collect(),
            Stats::Values { sum, n, .. } => vec![sum / n],
        }
    }
}

const MIN_GAIN: f64 = 1e-12;

impl Tree {
    /// Grows a tree on the rows `samples` of `x` (repeats allowed, as in a
    /// bootstrap draw).
    pub fn fit<R: Rng + ?Sized>(x: &Matrix, target: TreeTarget, samples: &[usize], params: &TreeParams, rng: &mut R) -> Tree {
        assert!(!samples.is_empty(), "tree needs at least one sample");
        let mut tree = Tree { nodes: Vec::new() };
        let mut idx = samples.to_vec();
        tree.grow(x, &target, &mut idx, 0, params, rng);
        tree
    }

    fn grow<R: Rng + ?Sized>(
        &mut self,
        x: &Matrix,
        target: &TreeTarget,
        idx: &mut [usize],
        depth: usize,
        params: &TreeParams,
        rng: &mut R,
    ) -> usize {
        let stats = Stats::of(target, idx);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: stats.leaf_value() });
        let parent = stats.weighted_impurity();
        if depth >= params.max_depth || idx.len() < params.min_samples_split.max(2) || parent <= MIN_GAIN {
            return at;
        }
        let Some((feature, threshold)) = best_split(x, target, idx, parent, params, rng) else {
            return at;
        };
        // partition in place: left block first
        let mut mid = 0;
        for i in 0..idx.len() {
            if x.get(idx[i], feature) <= threshold {
                idx.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(x, target, l, depth + 1, params, rng);
        let right = self.grow(x, target, r, depth + 1, params, rng);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }

    fn leaf_node(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Class distribution or `[value]` of the leaf `row` falls in.
    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        match &self.nodes[self.leaf_node(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_node returns leaves"),
        }
    }

    /// Replaces every leaf value by `f` of the training rows reaching it.
    pub fn refit_leaves(&mut self, x: &Matrix, samples: &[usize], f: impl Fn(&[usize]) -> f64) {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for &i in samples {
            members[self.leaf_node(x.row(i))].push(i);
        }
        for (node, m) in self.nodes.iter_mut().zip(&members) {
            if let Node::Leaf { value } = node {
                if !m.is_empty() {
                    *value = vec![f(m)];
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

fn best_split<R: Rng + ?Sized>(
    x: &Matrix,
    target: &TreeTarget,
    idx: &[usize],
    parent: f64,
    params: &TreeParams,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let d = x.cols();
    let features: Vec<usize> = match params.max_features {
        Some(m) if m < d => {
            let mut f = sample(rng, d, m.max(1)).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..d).collect(),
    };
    let min_leaf = params.min_samples_leaf.max(1);
    let n = idx.len();
    let total = Stats::of(target, idx);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &f in &features {
        order.clear();
        order.extend(idx.iter().map(|&i| (x.get(i, f), i)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        if order[0].0 == order[n - 1].0 {
            continue;
        }
        let mut left = Stats::empty(target);
        let mut right = total.clone();
        for p in 0..n - 1 {
            let i = order[p].1;
            left.add(target, i, 1.0);
            right.add(target, i, -1.0);
            let (a, b) = (order[p].0, order[p + 1].0);
            if a == b || p + 1 < min_leaf || n - p - 1 < min_leaf {
                continue;
            }
            let gain = parent - left.weighted_impurity() - right.weighted_impurity();
            if gain > MIN_GAIN && best.is_none_or(|(g, _, _)| gain > g) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some((gain, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
