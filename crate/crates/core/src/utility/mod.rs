//! Train-on-synthetic, test-on-real utility evaluation.

mod boost;
mod encode;
mod forest;
mod linear;
mod metrics;
mod tree;
mod tstr;

use thiserror::Error;

pub use boost::{BoostParams, GradientBoosting, Loss};
pub use encode::{EncodeStats, Encoder, FeatureEncoder, Matrix, SupervisedMatrix, TargetEncoder};
pub use forest::{ForestParams, RandomForest};
pub use linear::{fit_logistic, fit_ols, predict_classes, LinearParams, LinearWeights, RidgeFallback};
pub use metrics::{auc, auc_multiclass, mape, r2, Mape};
pub use tree::{Tree, TreeParams, TreeTarget};
pub use tstr::{
    default_specs, fit_predict, score, split_real, tstr, Metric, ModelFamily, ModelFlag, ModelScore, ModelSpec, PredOutput,
    Prediction, TstrOptions, UtilityReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtilityError {
    #[error("target column {0:?} not found")]
    TargetMissing(String),
    #[error("no usable rows left in {table} after encoding")]
    AllRowsDropped { table: String },
    #[error("AUC undefined: test labels hold a single class")]
    UndefinedAuc,
    #[error("R² undefined: actual values have zero variance")]
    ZeroVariance,
    #[error("MAPE undefined: every actual value is zero")]
    AllZeroActuals,
    #[error("feature dimensions differ: train {train}, test {test}")]
    DimensionMismatch { train: usize, test: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("dataset declares no target column and task")]
    NoTarget,
    #[error("metric {metric} does not apply to {task} targets")]
    MetricMismatch { metric: String, task: String },
    #[error("real table too small to split: {0}")]
    Split(String),
}
