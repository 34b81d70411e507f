use super::{grow_regression_tree, Node, Tree, TreeConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, SplitMix64};

const HESSIAN_FLOOR: f64 = 1e-12;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid rounded into the open interval: saturated results become the
/// nearest representable value inside `(0, 1)`.
pub(crate) fn open_sigmoid(z: f64) -> f64 {
    sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Gradient-boosted regression trees under logistic loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    pub base_log_odds: f64,
    pub learning_rate: f64,
    pub stages: Vec<Tree>,
}

/// Each stage fits a variance-reduction tree to the residuals `y - p`, then
/// replaces every leaf value with the Newton step `Σ(y - p) / Σ p(1 - p)`.
/// `config.criterion` is ignored.
pub fn train_gradient_boosting(
    x: &Matrix,
    y: &[u8],
    n_stages: usize,
    learning_rate: f64,
    config: &TreeConfig,
    seed: u64,
) -> Result<GbmModel> {
    config.validate()?;
    if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
        return Err(Error::invalid(format!(
            "learning_rate must be non-negative, got {learning_rate}"
        )));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let rate = positives as f64 / y.len() as f64;
    let base_log_odds = (rate / (1.0 - rate)).ln();

    let targets: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut raw = vec![base_log_odds; y.len()];
    let mut stages = Vec::with_capacity(n_stages);
    for stage in 0..n_stages {
        let probs: Vec<f64> = raw.iter().map(|&r| sigmoid(r)).collect();
        let residuals: Vec<f64> = targets.iter().zip(&probs).map(|(t, p)| t - p).collect();
        let mut rng = SplitMix64::new(derive_seed(seed, stage as u64));
        let mut tree = grow_regression_tree(x, &residuals, config, &mut rng)?;

        let leaves: Vec<usize> = x.rows().map(|r| tree.leaf_index(r)).collect();
        let mut num = vec![0.0; tree.nodes.len()];
        let mut den = vec![0.0; tree.nodes.len()];
        for (i, &leaf) in leaves.iter().enumerate() {
            num[leaf] += residuals[i];
            den[leaf] += probs[i] * (1.0 - probs[i]);
        }
        for (i, node) in tree.nodes.iter_mut().enumerate() {
            if let Node::Leaf { value, .. } = node {
                *value = num[i] / den[i].max(HESSIAN_FLOOR);
            }
        }
        for (r, &leaf) in raw.iter_mut().zip(&leaves) {
            if let Node::Leaf { value, .. } = tree.nodes[leaf] {
                *r += learning_rate * value;
            }
        }
        stages.push(tree);
    }

    Ok(GbmModel {
        base_log_odds,
        learning_rate,
        stages,
    })
}

impl GbmModel {
    pub fn n_features(&self) -> Option<usize> {
        self.stages.first().map(Tree::n_features)
    }

    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.base_log_odds + self.learning_rate * self.stages.iter().map(|t| t.value(row)).sum::<f64>()
    }

    /// Probability of class 1, strictly inside `(0, 1)`.
    pub fn score(&self, row: &[f64]) -> f64 {
        open_sigmoid(self.raw_score(row))
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if !self.base_log_odds.is_finite() || !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err("gradient boosting base or learning rate is invalid".into());
        }
        let d = self.n_features();
        for t in &self.stages {
            if Some(t.n_features()) != d {
                return Err("gradient boosting stages disagree on feature count".into());
            }
            t.validate()?;
        }
        Ok(())
    }
}
