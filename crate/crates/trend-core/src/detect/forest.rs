//! CART decision trees and a bagged random forest, binary labels.
//!
//! Splits minimize Gini impurity with thresholds at midpoints between
//! distinct sorted feature values; the forest bootstraps rows per tree and
//! samples `sqrt(n_features)` split candidates. Feature importance is the
//! forest-averaged, root-weighted impurity decrease, normalized to sum to
//! one.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::stream_rng;
use crate::error::{Error, Result};

/// A fitted CART node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        /// P(label = true) among training rows in this leaf.
        p_true: f64,
        n: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        /// Root-weighted Gini impurity decrease of this split.
        gain: f64,
        n: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// How many features each split considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSubset {
    All,
    /// `ceil(sqrt(n_features))` random candidates per split.
    Sqrt,
    Fixed(usize),
}

/// Forest training configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Minimum rows per leaf; splits creating smaller children are skipped.
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub features_per_split: FeatureSubset,
    /// Sample rows with replacement per tree.
    pub bootstrap: bool,
    /// Optional cap on rows drawn per tree.
    pub max_samples: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 50,
            min_leaf: 5,
            max_depth: None,
            features_per_split: FeatureSubset::Sqrt,
            bootstrap: true,
            max_samples: None,
            seed: 0,
        }
    }
}

/// A single CART tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub n_features: usize,
}

/// Bagged forest of CART trees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    /// Training data had a single class; predictions are constant.
    pub constant_class: Option<bool>,
    pub config: ForestConfig,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [bool],
    min_leaf: usize,
    max_depth: Option<usize>,
    n_candidates: usize,
    n_root: f64,
}

impl TreeBuilder<'_> {
    fn build(&self, rows: &mut [usize], depth: usize, rng: &mut impl Rng) -> TreeNode {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.labels[r]).count();
        let p_true = pos as f64 / n as f64;
        let node_gini = gini(pos as f64, n as f64);
        let depth_ok = self.max_depth.map_or(true, |d| depth < d);
        if pos == 0 || pos == n || n < 2 * self.min_leaf || !depth_ok {
            return TreeNode::Leaf { p_true, n };
        }

        let n_features = self.features[0].len();
        let mut candidates: Vec<usize> = (0..n_features).collect();
        if self.n_candidates < n_features {
            for i in 0..self.n_candidates {
                let j = rng.gen_range(i..n_features);
                candidates.swap(i, j);
            }
            candidates.truncate(self.n_candidates);
        }

        // Best (impurity decrease, feature, threshold). Zero-gain splits are
        // allowed when nothing better exists (an impure node may need two
        // levels before any purity shows, as in XOR-like labelings).
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for &f in &candidates {
            order.sort_by(|&a, &b| self.features[a][f].total_cmp(&self.features[b][f]));
            let mut pos_left = 0usize;
            for split_at in 1..n {
                if self.labels[order[split_at - 1]] {
                    pos_left += 1;
                }
                let lo = self.features[order[split_at - 1]][f];
                let hi = self.features[order[split_at]][f];
                if lo == hi {
                    continue;
                }
                let (nl, nr) = (split_at, n - split_at);
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let pos_right = pos - pos_left;
                let child = (nl as f64 * gini(pos_left as f64, nl as f64)
                    + nr as f64 * gini(pos_right as f64, nr as f64))
                    / n as f64;
                let decrease = node_gini - child;
                if best.map_or(decrease >= 0.0, |b| decrease > b.0) {
                    best = Some((decrease, f, 0.5 * (lo + hi)));
                }
            }
        }

        let Some((decrease, feature, threshold)) = best else {
            return TreeNode::Leaf { p_true, n };
        };
        let mid = stable_partition(rows, |&r| self.features[r][feature] <= threshold);
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        TreeNode::Split {
            feature,
            threshold,
            gain: decrease * n as f64 / self.n_root,
            n,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Stable partition in place; returns the number of elements satisfying the
/// predicate (placed first).
fn stable_partition<T: Copy>(slice: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let mut hits: Vec<T> = Vec::with_capacity(slice.len());
    let mut misses: Vec<T> = Vec::new();
    for &x in slice.iter() {
        if pred(&x) {
            hits.push(x);
        } else {
            misses.push(x);
        }
    }
    let mid = hits.len();
    slice[..mid].copy_from_slice(&hits);
    slice[mid..].copy_from_slice(&misses);
    mid
}

impl DecisionTree {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { p_true, .. } => return *p_true,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    fn accumulate_importance(&self, into: &mut [f64]) {
        fn walk(node: &TreeNode, into: &mut [f64]) {
            if let TreeNode::Split { feature, gain, left, right, .. } = node {
                into[*feature] += gain;
                walk(left, into);
                walk(right, into);
            }
        }
        walk(&self.root, into);
    }
}

fn validate_training(features: &[Vec<f64>], labels: &[bool]) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::InvalidArg("train: no samples".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::DimMismatch("train: features/labels length".into()));
    }
    let n_features = features[0].len();
    if n_features == 0 {
        return Err(Error::InvalidArg("train: zero-dimensional features".into()));
    }
    for f in features {
        if f.len() != n_features {
            return Err(Error::DimMismatch("train: ragged feature rows".into()));
        }
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("train: non-finite feature".into()));
        }
    }
    Ok(n_features)
}

/// Trains a single CART tree on all rows with all features per split.
pub fn train_tree(
    features: &[Vec<f64>],
    labels: &[bool],
    min_leaf: usize,
    max_depth: Option<usize>,
) -> Result<DecisionTree> {
    let n_features = validate_training(features, labels)?;
    let builder = TreeBuilder {
        features,
        labels,
        min_leaf: min_leaf.max(1),
        max_depth,
        n_candidates: n_features,
        n_root: features.len() as f64,
    };
    let mut rows: Vec<usize> = (0..features.len()).collect();
    let mut rng = stream_rng(0, 0);
    Ok(DecisionTree { root: builder.build(&mut rows, 0, &mut rng), n_features })
}

/// Trains a bagged forest; single-class data yields a constant classifier
/// with `constant_class` set rather than an error.
pub fn train_forest(
    features: &[Vec<f64>],
    labels: &[bool],
    cfg: &ForestConfig,
) -> Result<ForestModel> {
    let n_features = validate_training(features, labels)?;
    if cfg.n_trees == 0 {
        return Err(Error::InvalidArg("train_forest: n_trees must be >= 1".into()));
    }
    let n = features.len();
    let any_true = labels.iter().any(|&l| l);
    let any_false = labels.iter().any(|&l| !l);
    if !(any_true && any_false) {
        return Ok(ForestModel {
            trees: Vec::new(),
            n_features,
            constant_class: Some(any_true),
            config: cfg.clone(),
        });
    }

    let n_candidates = match cfg.features_per_split {
        FeatureSubset::All => n_features,
        FeatureSubset::Sqrt => (n_features as f64).sqrt().ceil() as usize,
        FeatureSubset::Fixed(k) => k.clamp(1, n_features),
    };
    let per_tree = cfg.max_samples.unwrap_or(n).min(n);

    let trees: Vec<DecisionTree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|tree_idx| {
            let mut rng = stream_rng(cfg.seed, (5 << 40) | tree_idx as u64);
            let mut rows: Vec<usize> = if cfg.bootstrap {
                (0..per_tree).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let builder = TreeBuilder {
                features,
                labels,
                min_leaf: cfg.min_leaf.max(1),
                max_depth: cfg.max_depth,
                n_candidates,
                n_root: rows.len() as f64,
            };
            DecisionTree { root: builder.build(&mut rows, 0, &mut rng), n_features }
        })
        .collect();

    Ok(ForestModel { trees, n_features, constant_class: None, config: cfg.clone() })
}

impl ForestModel {
    /// Mean of per-tree leaf probabilities.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimMismatch("predict: feature dimension".into()));
        }
        if let Some(class) = self.constant_class {
            return Ok(if class { 1.0 } else { 0.0 });
        }
        let total: f64 = self.trees.iter().map(|t| t.predict_proba(x)).sum();
        Ok(total / self.trees.len() as f64)
    }

    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.predict_proba(x)? >= 0.5)
    }

    /// Mean root-weighted impurity decrease per feature, normalized to sum
    /// to one (all zeros for a constant classifier).
    pub fn gini_importance(&self) -> Vec<f64> {
        let mut importance = vec![0.0; self.n_features];
        for tree in &self.trees {
            tree.accumulate_importance(&mut importance);
        }
        let total: f64 = importance.iter().sum();
        if total > 0.0 {
            for v in importance.iter_mut() {
                *v /= total;
            }
        }
        importance
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_data() -> (Vec<Vec<f64>>, Vec<bool>) {
        (
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            vec![false, true, true, false],
        )
    }

    #[test]
    fn linearly_separable_is_perfect() {
        let features: Vec<Vec<f64>> =
            (0..40).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let labels: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let cfg = ForestConfig { n_trees: 20, min_leaf: 1, ..ForestConfig::default() };
        let model = train_forest(&features, &labels, &cfg).unwrap();
        for (f, &l) in features.iter().zip(&labels) {
            assert_eq!(model.predict(f).unwrap(), l);
        }
    }

    #[test]
    fn xor_needs_depth_two() {
        let (features, labels) = xor_data();
        let tree = train_tree(&features, &labels, 1, None).unwrap();
        for (f, &l) in features.iter().zip(&labels) {
            assert_eq!(tree.predict_proba(f) >= 0.5, l, "tree wrong on {f:?}");
        }
        // Depth 1 cannot represent XOR.
        let stump = train_tree(&features, &labels, 1, Some(1)).unwrap();
        let correct = features
            .iter()
            .zip(&labels)
            .filter(|(f, &l)| (stump.predict_proba(f) >= 0.5) == l)
            .count();
        assert!(correct < 4);
        // A bagged forest with enough trees also classifies XOR.
        let cfg = ForestConfig { n_trees: 200, min_leaf: 1, seed: 1, ..ForestConfig::default() };
        let forest = train_forest(&features, &labels, &cfg).unwrap();
        for (f, &l) in features.iter().zip(&labels) {
            assert_eq!(forest.predict(f).unwrap(), l, "forest wrong on {f:?}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let features: Vec<Vec<f64>> =
            (0..60).map(|i| vec![(i * 13 % 17) as f64, (i * 5 % 7) as f64]).collect();
        let labels: Vec<bool> = (0..60).map(|i| (i * 13 % 17) > 8).collect();
        let cfg = ForestConfig { n_trees: 10, seed: 9, ..ForestConfig::default() };
        let m1 = train_forest(&features, &labels, &cfg).unwrap();
        let m2 = train_forest(&features, &labels, &cfg).unwrap();
        assert_eq!(m1.to_json().unwrap(), m2.to_json().unwrap());
    }

    #[test]
    fn constant_feature_changes_no_tree_prediction() {
        let base: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let labels: Vec<bool> = (0..30).map(|i| i % 2 == 0 && i > 14).collect();
        let padded: Vec<Vec<f64>> = base.iter().map(|f| vec![f[0], 42.0]).collect();
        let t1 = train_tree(&base, &labels, 1, None).unwrap();
        let t2 = train_tree(&padded, &labels, 1, None).unwrap();
        for (f, g) in base.iter().zip(&padded) {
            assert_eq!(t1.predict_proba(f), t2.predict_proba(g));
        }
    }

    #[test]
    fn single_class_returns_flagged_constant_model() {
        let features: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels = vec![false; 10];
        let model = train_forest(&features, &labels, &ForestConfig::default()).unwrap();
        assert_eq!(model.constant_class, Some(false));
        assert!(!model.predict(&[3.0]).unwrap());
        assert!(model.gini_importance().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn importance_extremes() {
        // Feature 0 splits perfectly; feature 1 is constant noise.
        let features: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, 7.0]).collect();
        let labels: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let cfg = ForestConfig { n_trees: 30, min_leaf: 1, seed: 3, ..ForestConfig::default() };
        let model = train_forest(&features, &labels, &cfg).unwrap();
        let imp = model.gini_importance();
        assert!(imp[0] > 0.999, "importances {imp:?}");
        assert!(imp[1] < 1e-9);
        let total: f64 = imp.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn importance_sums_to_one_on_random_data() {
        let features: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![(i * 31 % 101) as f64, (i * 17 % 53) as f64, (i * 7 % 11) as f64])
            .collect();
        let labels: Vec<bool> = (0..200).map(|i| (i * 31 % 101) + (i * 17 % 53) > 70).collect();
        let model = train_forest(&features, &labels, &ForestConfig::default()).unwrap();
        let total: f64 = model.gini_importance().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let (features, labels) = xor_data();
        let cfg = ForestConfig { n_trees: 5, min_leaf: 1, ..ForestConfig::default() };
        let model = train_forest(&features, &labels, &cfg).unwrap();
        let back = ForestModel::from_json(&model.to_json().unwrap()).unwrap();
        for f in &features {
            assert_eq!(model.predict_proba(f).unwrap(), back.predict_proba(f).unwrap());
        }
    }
}
