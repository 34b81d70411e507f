//! CART decision trees and the tree ensembles built on them.
//!
//! Trees are stored as flat node arrays in pre-order: the root is node 0 and
//! every child index is larger than its parent's. A row goes left when
//! `row[feature] <= threshold`.

mod adaboost;
mod forest;
mod gbm;
mod grow;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

pub use adaboost::{train_adaboost, AdaBoostModel, AdaBoostTrace, ALPHA_CAP, EPSILON_CLAMP};
pub use forest::{
    bootstrap_indices, train_bagging, train_extra_trees, train_forest, train_random_forest,
    ForestKind, ForestModel,
};
pub use gbm::{train_gradient_boosting, GbmModel};
pub(crate) use gbm::{open_sigmoid, sigmoid};

pub const DEFAULT_N_ESTIMATORS: usize = 10;
pub const DEFAULT_MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(Error::invalid(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Impurity of a (weighted) class histogram.
pub(crate) fn impurity_of_counts(counts: [f64; 2], criterion: Criterion) -> f64 {
    let total = counts[0] + counts[1];
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>(),
        Criterion::Entropy => counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                -p * p.log2()
            })
            .sum(),
    }
}

/// Gini (`1 - Σ p²`) or entropy (`-Σ p log₂ p`) of a label multiset.
pub fn impurity(labels: &[u8], criterion: Criterion) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("impurity of an empty label set"));
    }
    let ones = labels.iter().filter(|&&v| v == 1).count() as f64;
    Ok(impurity_of_counts([labels.len() as f64 - ones, ones], criterion))
}

/// How many features each node considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
}

impl MaxFeatures {
    pub fn count(self, n_features: usize) -> usize {
        let n = n_features as f64;
        let k = match self {
            MaxFeatures::Sqrt => n.sqrt().ceil() as usize,
            MaxFeatures::Log2 => n.log2().ceil() as usize,
            MaxFeatures::All => n_features,
        };
        k.clamp(1, n_features.max(1))
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;

    /// `auto` is accepted as an alias of `sqrt`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sqrt" | "auto" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            "all" | "none" => Ok(MaxFeatures::All),
            other => Err(Error::invalid(format!("unknown max_features `{other}`"))),
        }
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaxFeatures::Sqrt => "sqrt",
            MaxFeatures::Log2 => "log2",
            MaxFeatures::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            max_depth: DEFAULT_MAX_DEPTH,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split must be at least 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }

    /// Depth-1 tree over all features, as used by AdaBoost.
    pub fn stump() -> Self {
        Self {
            max_depth: 1,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
    },
    Leaf {
        /// Class weights reaching the leaf (row counts when unweighted).
        counts: [f64; 2],
        /// Positive fraction for classification trees, the stage output for
        /// boosting regression trees.
        value: f64,
        samples: usize,
    },
}

impl Node {
    pub fn samples(&self) -> usize {
        match self {
            Node::Split { samples, .. } | Node::Leaf { samples, .. } => *samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) n_features: usize,
}

impl Tree {
    pub(crate) fn from_parts(nodes: Vec<Node>, n_features: usize) -> Self {
        Self { nodes, n_features }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Single-leaf tree.
    pub fn leaf(n_features: usize, counts: [f64; 2], value: f64, samples: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf {
                counts,
                value,
                samples,
            }],
            n_features,
        }
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[feature] <= threshold { left } else { right },
                Node::Leaf { .. } => return at,
            }
        }
    }

    /// Leaf value reached by `row`. The row length is not checked.
    pub fn value(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    /// Majority class at the leaf, ties to class 1.
    pub fn classify(&self, row: &[f64]) -> u8 {
        u8::from(self.value(row) >= 0.5)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn check_input(&self, x: &Matrix) -> Result<()> {
        x.expect_cols(self.n_features)
    }

    /// Structural checks used when a tree is read back from disk.
    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if feature >= self.n_features {
                        return Err(format!("node {i} splits on feature {feature} of {}", self.n_features));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i} has a non-finite threshold"));
                    }
                    for child in [left, right] {
                        if child <= i || child >= self.nodes.len() {
                            return Err(format!("node {i} has invalid child {child}"));
                        }
                        parents[child] += 1;
                    }
                }
                Node::Leaf { value, counts, .. } => {
                    if !value.is_finite() || counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
                        return Err(format!("leaf {i} holds non-finite values"));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err("tree nodes do not form a single tree".into());
        }
        Ok(())
    }
}

/// Grows a classification tree on unweighted rows.
pub fn grow_tree(x: &Matrix, y: &[u8], config: &TreeConfig, rng: &mut SplitMix64) -> Result<Tree> {
    grow::grow_classifier(x, y, None, config, grow::Splitter::Best, rng)
}

/// Grows a classification tree where each row carries a weight.
pub fn grow_weighted_tree(
    x: &Matrix,
    y: &[u8],
    weights: &[f64],
    config: &TreeConfig,
    rng: &mut SplitMix64,
) -> Result<Tree> {
    grow::grow_classifier(x, y, Some(weights), config, grow::Splitter::Best, rng)
}

/// Grows a regression tree by variance reduction; leaves hold the mean target.
pub fn grow_regression_tree(
    x: &Matrix,
    targets: &[f64],
    config: &TreeConfig,
    rng: &mut SplitMix64,
) -> Result<Tree> {
    grow::grow_regressor(x, targets, config, rng)
}

/// Classification tree with one random threshold per candidate feature.
pub fn grow_random_threshold_tree(
    x: &Matrix,
    y: &[u8],
    config: &TreeConfig,
    rng: &mut SplitMix64,
) -> Result<Tree> {
    grow::grow_classifier(x, y, None, config, grow::Splitter::Random, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impurity_examples() {
        assert_eq!(impurity(&[1, 1, 1], Criterion::Gini).unwrap(), 0.0);
        assert_eq!(impurity(&[1, 1, 1], Criterion::Entropy).unwrap(), 0.0);
        assert_eq!(impurity(&[1, 1, 0, 0], Criterion::Gini).unwrap(), 0.5);
        assert_eq!(impurity(&[1, 1, 0, 0], Criterion::Entropy).unwrap(), 1.0);
        assert!(impurity(&[], Criterion::Gini).is_err());
    }

    #[test]
    fn max_features_counts() {
        assert_eq!(MaxFeatures::Sqrt.count(13), 4);
        assert_eq!(MaxFeatures::Log2.count(13), 4);
        assert_eq!(MaxFeatures::All.count(13), 13);
        assert_eq!(MaxFeatures::Log2.count(1), 1);
        assert_eq!("auto".parse::<MaxFeatures>().unwrap(), MaxFeatures::Sqrt);
    }

    #[test]
    fn config_validation() {
        assert!(TreeConfig { max_depth: 0, ..Default::default() }.validate().is_err());
        assert!(TreeConfig { min_samples_split: 1, ..Default::default() }.validate().is_err());
        assert!(TreeConfig { min_samples_leaf: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn single_leaf_scores_positive_fraction() {
        let t = Tree::leaf(2, [3.0, 1.0], 0.25, 4);
        assert_eq!(t.value(&[9.0, -9.0]), 0.25);
        assert_eq!(t.classify(&[0.0, 0.0]), 0);
        assert_eq!(t.depth(), 0);
    }
}
