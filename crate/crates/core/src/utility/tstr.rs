use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::boost::{BoostParams, GradientBoosting, Loss};
use super::encode::{EncodeStats, Encoder, SupervisedMatrix};
use super::forest::{ForestParams, RandomForest};
use super::linear::{fit_logistic, fit_ols, predict_classes, LinearParams};
use super::metrics::{auc_multiclass, mape, r2};
use super::tree::TreeTarget;
use super::UtilityError;
use crate::registry::Task;
use crate::seed;
use crate::table::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Linear,
    RandomForest,
    GradientBoosted,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Linear, ModelFamily::RandomForest, ModelFamily::GradientBoosted];

    pub fn label(self) -> &'static str {
        match self {
            ModelFamily::Linear => "Linear",
            ModelFamily::RandomForest => "RandomForest",
            ModelFamily::GradientBoosted => "GradientBoosted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auc,
    R2,
    Mape,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "auc" => Ok(Metric::Auc),
            "r2" => Ok(Metric::R2),
            "mape" => Ok(Metric::Mape),
            other => Err(format!("unknown metric {other:?} (auc, r2, mape)")),
        }
    }
}

impl Metric {
    pub fn default_for(task: Task) -> Metric {
        match task {
            Task::Classification => Metric::Auc,
            Task::Regression => Metric::R2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Auc => "AUC",
            Metric::R2 => "R2",
            Metric::Mape => "MAPE",
        }
    }

    fn applies_to(self, task: Task) -> bool {
        matches!((self, task), (Metric::Auc, Task::Classification) | (Metric::R2 | Metric::Mape, Task::Regression))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub linear: LinearParams,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default)]
    pub boost: BoostParams,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, seed: u64) -> ModelSpec {
        ModelSpec {
            family,
            seed,
            linear: LinearParams::default(),
            forest: ForestParams::default(),
            boost: BoostParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), UtilityError> {
        let bad = |m: &str| Err(UtilityError::InvalidSpec(m.to_string()));
        match self.family {
            ModelFamily::Linear => {
                let l = &self.linear;
                if !(l.ols_ridge >= 0.0 && l.logistic_l2 >= 0.0 && l.max_iter >= 1 && l.tol > 0.0) {
                    return bad("linear: penalties must be >= 0, max_iter >= 1, tol > 0");
                }
            }
            ModelFamily::RandomForest => {
                let f = &self.forest;
                if f.n_trees == 0 || !(1..=64).contains(&f.max_depth) || f.min_samples_leaf == 0 || f.max_features == Some(0) {
                    return bad("forest: n_trees >= 1, max_depth in 1..=64, min_samples_leaf >= 1, max_features >= 1");
                }
            }
            ModelFamily::GradientBoosted => {
                let b = &self.boost;
                if b.n_rounds == 0
                    || !(1..=16).contains(&b.max_depth)
                    || !(b.learning_rate > 0.0 && b.learning_rate <= 1.0)
                    || !(b.subsample > 0.0 && b.subsample <= 1.0)
                    || b.min_samples_leaf == 0
                {
                    return bad("boost: n_rounds >= 1, max_depth in 1..=16, learning_rate and subsample in (0, 1]");
                }
            }
        }
        Ok(())
    }
}

/// One spec per family with default hyperparameters.
pub fn default_specs(seed: u64) -> Vec<ModelSpec> {
    ModelFamily::ALL.iter().map(|&f| ModelSpec::new(f, seed)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFlag {
    /// Training target had one class; the model predicts it constantly.
    SingleClassTrain,
    /// The linear system was singular; this ridge was applied instead.
    SingularSystem { ridge: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredOutput {
    /// Row-wise class probabilities.
    Probabilities(Vec<Vec<f64>>),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub output: PredOutput,
    pub flags: Vec<ModelFlag>,
}

pub fn fit_predict(spec: &ModelSpec, train: &SupervisedMatrix, test: &SupervisedMatrix) -> Result<Prediction, UtilityError> {
    spec.validate()?;
    if train.target.is_empty() {
        return Err(UtilityError::AllRowsDropped { table: "train".into() });
    }
    if train.features.cols() != test.features.cols() {
        return Err(UtilityError::DimensionMismatch { train: train.features.cols(), test: test.features.cols() });
    }
    let (x, xt) = (&train.features, &test.features);
    let mut flags = Vec::new();
    let output = match train.n_classes {
        Some(k) => {
            let y = train.class_labels();
            let present: std::collections::BTreeSet<usize> = y.iter().copied().collect();
            if present.len() == 1 {
                let only = *present.first().expect("non-empty");
                flags.push(ModelFlag::SingleClassTrain);
                let row: Vec<f64> = (0..k).map(|c| if c == only { 1.0 } else { 0.0 }).collect();
                PredOutput::Probabilities(vec![row; xt.rows()])
            } else {
                PredOutput::Probabilities(fit_classes(spec, train, &y, k, &mut flags, xt))
            }
        }
        None => PredOutput::Values(match spec.family {
            ModelFamily::Linear => {
                let (w, fb) = fit_ols(x, &train.target, &spec.linear);
                if let Some(fb) = fb {
                    flags.push(ModelFlag::SingularSystem { ridge: fb.ridge });
                }
                (0..xt.rows()).map(|i| w.eval(xt.row(i))).collect()
            }
            ModelFamily::RandomForest => RandomForest::fit(x, TreeTarget::Values { y: &train.target }, &spec.forest, spec.seed)
                .predict(xt)
                .into_iter()
                .map(|v| v[0])
                .collect(),
            ModelFamily::GradientBoosted => GradientBoosting::fit(x, &train.target, Loss::Squared, &spec.boost, spec.seed)
                .predict(xt)
                .into_iter()
                .map(|v| v[0])
                .collect(),
        }),
    };
    Ok(Prediction { output, flags })
}

fn fit_classes(
    spec: &ModelSpec,
    train: &SupervisedMatrix,
    y: &[usize],
    k: usize,
    flags: &mut Vec<ModelFlag>,
    xt: &super::encode::Matrix,
) -> Vec<Vec<f64>> {
    let x = &train.features;
    match spec.family {
        ModelFamily::Linear => {
            let targets: Vec<Vec<f64>> = if k == 2 {
                vec![y.iter().map(|&c| c as f64).collect()]
            } else {
                (0..k).map(|c| y.iter().map(|&v| if v == c { 1.0 } else { 0.0 }).collect()).collect()
            };
            let mut models = Vec::with_capacity(targets.len());
            for t in &targets {
                let (w, fb) = fit_logistic(x, t, &spec.linear);
                if let Some(fb) = fb {
                    flags.push(ModelFlag::SingularSystem { ridge: fb.ridge });
                }
                models.push(w);
            }
            predict_classes(&models, xt)
        }
        ModelFamily::RandomForest => RandomForest::fit(x, TreeTarget::Classes { y, k }, &spec.forest, spec.seed).predict(xt),
        ModelFamily::GradientBoosted => {
            let loss = if k == 2 { Loss::Logistic } else { Loss::Softmax { k } };
            GradientBoosting::fit(x, &train.target, loss, &spec.boost, spec.seed).predict(xt)
        }
    }
}

/// Scores predictions against the test target.
pub fn score(metric: Metric, pred: &Prediction, test: &SupervisedMatrix) -> Result<f64, UtilityError> {
    match (&pred.output, metric) {
        (PredOutput::Probabilities(p), Metric::Auc) => auc_multiclass(p, &test.class_labels()),
        (PredOutput::Values(v), Metric::R2) => r2(v, &test.target),
        (PredOutput::Values(v), Metric::Mape) => mape(v, &test.target).map(|m| m.value),
        (PredOutput::Probabilities(_), m) => {
            Err(UtilityError::MetricMismatch { metric: m.label().into(), task: "classification".into() })
        }
        (PredOutput::Values(_), m) => Err(UtilityError::MetricMismatch { metric: m.label().into(), task: "regression".into() }),
    }
}

/// Row indices of the real train and test parts. Classification splits
/// each label separately so both parts keep the label mix.
pub fn split_real(real: &Table, target: &str, task: Task, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), UtilityError> {
    let t = real.column_index(target).ok_or_else(|| UtilityError::TargetMissing(target.to_string()))?;
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(UtilityError::Split(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let usable: Vec<usize> = (0..real.n_rows()).filter(|&i| !real.rows()[i][t].is_missing()).collect();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for &i in &usable {
        let key = match task {
            Task::Classification => real.rows()[i][t].render(),
            Task::Regression => String::new(),
        };
        groups.entry(key).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, mut members) in groups {
        members.shuffle(&mut seed::stream(seed, &["split".into(), label.as_str().into()]));
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(UtilityError::Split(format!("{} usable rows", usable.len())));
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TstrOptions {
    pub test_fraction: f64,
    pub split_seed: u64,
    /// Defaults to AUC for classification and R² for regression.
    pub metric: Option<Metric>,
    /// Also train on the real training part for reference.
    pub baseline: bool,
}

impl Default for TstrOptions {
    fn default() -> Self {
        TstrOptions { test_fraction: 0.2, split_seed: 0, metric: None, baseline: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub family: ModelFamily,
    pub score: Option<f64>,
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<ModelFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub metric: Metric,
    pub task: Task,
    pub target: String,
    pub per_model: Vec<ModelScore>,
    /// Mean over the families that produced a score; absent if none did.
    pub average: Option<f64>,
    pub baseline_real: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub baseline_per_model: Vec<ModelScore>,
    pub real_train_rows: usize,
    pub real_test_rows: usize,
    /// Encoding of the synthetic table, absent when encoding failed.
    pub synth_stats: Option<EncodeStats>,
    pub excluded_columns: Vec<String>,
}

fn run_specs(specs: &[ModelSpec], train: &SupervisedMatrix, test: &SupervisedMatrix, metric: Metric) -> Vec<ModelScore> {
    specs
        .iter()
        .map(|spec| match fit_predict(spec, train, test).and_then(|p| score(metric, &p, test).map(|s| (s, p.flags))) {
            Ok((s, flags)) => ModelScore { family: spec.family, score: Some(s), failure: None, flags },
            Err(e) => ModelScore { family: spec.family, score: None, failure: Some(e.to_string()), flags: Vec::new() },
        })
        .collect()
}

fn mean_score(scores: &[ModelScore]) -> Option<f64> {
    let v: Vec<f64> = scores.iter().filter_map(|s| s.score).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Trains every spec on `synth`, scores on the real test split, and (with
/// `baseline`) repeats the training on the real training split.
pub fn tstr(real: &Table, synth: &Table, target: &str, task: Task, specs: &[ModelSpec], opts: &TstrOptions) -> Result<UtilityReport, UtilityError> {
    let metric = opts.metric.unwrap_or(Metric::default_for(task));
    if !metric.applies_to(task) {
        return Err(UtilityError::MetricMismatch { metric: metric.label().into(), task: task.to_string() });
    }
    for s in specs {
        s.validate()?;
    }
    let (train_idx, test_idx) = split_real(real, target, task, opts.test_fraction, opts.split_seed)?;
    let real_train = real.select_rows(&train_idx).expect("split indices in range");
    let real_test = real.select_rows(&test_idx).expect("split indices in range");
    let encoder = Encoder::fit(&real_train, target, task)?;
    let test = encoder.transform(&real_test, "real test split")?;

    let (per_model, synth_stats) = match encoder.transform(synth, "synthetic table") {
        Ok(m) => (run_specs(specs, &m, &test, metric), Some(m.stats)),
        Err(e) => (
            specs
                .iter()
                .map(|s| ModelScore { family: s.family, score: None, failure: Some(e.to_string()), flags: Vec::new() })
                .collect(),
            None,
        ),
    };
    let baseline_per_model = if opts.baseline {
        let train = encoder.transform(&real_train, "real train split")?;
        run_specs(specs, &train, &test, metric)
    } else {
        Vec::new()
    };
    Ok(UtilityReport {
        metric,
        task,
        target: target.to_string(),
        average: mean_score(&per_model),
        baseline_real: mean_score(&baseline_per_model),
        per_model,
        baseline_per_model,
        real_train_rows: train_idx.len(),
        real_test_rows: test_idx.len(),
        synth_stats,
        excluded_columns: encoder.excluded_columns.clone(),
    })
}

/// Rows of `table` whose target cell is present.
#[allow(dead_code)]
fn has_target(table: &Table, t: usize) -> usize {
    table.column(t).filter(|c| !matches!(c, Cell::Missing)).count()
}
