use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{grow, Tree, TreeConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestKind {
    RandomForest,
    Bagging,
    ExtraTrees,
}

/// Voting ensemble of classification trees.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub kind: ForestKind,
    pub trees: Vec<Tree>,
    pub n_estimators: usize,
    pub tree_seeds: Vec<u64>,
    pub bootstrap: bool,
    pub config: TreeConfig,
}

/// `n` draws with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, rng: &mut SplitMix64) -> Vec<usize> {
    (0..n).map(|_| rng.below(n)).collect()
}

/// Shared trainer behind the three forest families. Tree `i` is grown from
/// its own seed derived from `(seed, i)`, so the result does not depend on
/// how many threads rayon uses.
pub fn train_forest(
    kind: ForestKind,
    x: &Matrix,
    y: &[u8],
    config: &TreeConfig,
    n_estimators: usize,
    seed: u64,
    bootstrap: bool,
) -> Result<ForestModel> {
    config.validate()?;
    if n_estimators == 0 {
        return Err(Error::invalid("n_estimators must be at least 1"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    let splitter = match kind {
        ForestKind::ExtraTrees => grow::Splitter::Random,
        ForestKind::RandomForest | ForestKind::Bagging => grow::Splitter::Best,
    };
    let tree_seeds: Vec<u64> = (0..n_estimators as u64).map(|i| derive_seed(seed, i)).collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = SplitMix64::new(s);
            if bootstrap {
                let idx = bootstrap_indices(x.n_rows(), &mut rng);
                let ys: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
                grow::grow_classifier(&x.select_rows(&idx), &ys, None, config, splitter, &mut rng)
            } else {
                grow::grow_classifier(x, y, None, config, splitter, &mut rng)
            }
        })
        .collect::<Result<Vec<Tree>>>()?;
    Ok(ForestModel {
        kind,
        trees,
        n_estimators,
        tree_seeds,
        bootstrap,
        config: *config,
    })
}

pub fn train_random_forest(
    x: &Matrix,
    y: &[u8],
    config: &TreeConfig,
    n_estimators: usize,
    seed: u64,
    bootstrap: bool,
) -> Result<ForestModel> {
    train_forest(ForestKind::RandomForest, x, y, config, n_estimators, seed, bootstrap)
}

/// A random forest that considers every feature at every node.
pub fn train_bagging(
    x: &Matrix,
    y: &[u8],
    config: &TreeConfig,
    n_estimators: usize,
    seed: u64,
    bootstrap: bool,
) -> Result<ForestModel> {
    let config = TreeConfig {
        max_features: super::MaxFeatures::All,
        ..*config
    };
    train_forest(ForestKind::Bagging, x, y, &config, n_estimators, seed, bootstrap)
}

pub fn train_extra_trees(
    x: &Matrix,
    y: &[u8],
    config: &TreeConfig,
    n_estimators: usize,
    seed: u64,
    bootstrap: bool,
) -> Result<ForestModel> {
    train_forest(ForestKind::ExtraTrees, x, y, config, n_estimators, seed, bootstrap)
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.trees.first().map_or(0, Tree::n_features)
    }

    /// Fraction of trees voting for class 1.
    pub fn score(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.classify(row) == 1).count();
        votes as f64 / self.trees.len() as f64
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.trees.len() != self.n_estimators || self.trees.is_empty() {
            return Err(format!(
                "forest declares {} estimators but holds {} trees",
                self.n_estimators,
                self.trees.len()
            ));
        }
        if self.tree_seeds.len() != self.trees.len() {
            return Err("forest tree_seeds do not match trees".into());
        }
        let d = self.n_features();
        for t in &self.trees {
            if t.n_features() != d {
                return Err("forest trees disagree on feature count".into());
            }
            t.validate()?;
        }
        Ok(())
    }
}
