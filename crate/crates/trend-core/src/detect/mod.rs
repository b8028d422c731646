//! Supervised attack detection: classifiers, evaluation metrics and the
//! spatio-temporal aggregation of per-home verdicts.

mod eval;
mod forest;
mod logistic;
mod map;

pub use eval::{evaluate, EvalReport, LabeledSeries};
pub use forest::{
    train_forest, train_tree, DecisionTree, FeatureSubset, ForestConfig, ForestModel, TreeNode,
};
pub use logistic::{LogisticConfig, LogisticModel};
pub use map::{aggregate_sync, map_threshold, MapAggregatorParams, MapThreshold};
