use serde::{Deserialize, Serialize};

use super::{grow_weighted_tree, Tree, TreeConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

/// Weighted error is clamped to `[EPSILON_CLAMP, 1 - EPSILON_CLAMP]` before
/// computing a stage weight, which caps alpha at [`ALPHA_CAP`].
pub const EPSILON_CLAMP: f64 = 1e-10;
pub const ALPHA_CAP: f64 = 23.025_850_929_840_455;

/// Two-class SAMME over depth-1 trees.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostModel {
    pub stumps: Vec<Tree>,
    pub alphas: Vec<f64>,
}

/// Per-round diagnostics from training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostTrace {
    pub errors: Vec<f64>,
    pub weight_sums: Vec<f64>,
    /// Training error of the ensemble after each accepted round.
    pub train_errors: Vec<f64>,
}

pub(crate) fn stage_weight(error: f64) -> f64 {
    let e = error.clamp(EPSILON_CLAMP, 1.0 - EPSILON_CLAMP);
    ((1.0 - e) / e).ln()
}

/// Trains up to `n_rounds` stumps. Stops early when a stump's weighted
/// error reaches 0.5 (it is discarded) or 0 (it is kept; further rounds
/// would repeat it).
pub fn train_adaboost(
    x: &Matrix,
    y: &[u8],
    n_rounds: usize,
    seed: u64,
) -> Result<(AdaBoostModel, AdaBoostTrace)> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::SingleClass);
    }
    let n = y.len();
    let mut rng = SplitMix64::new(seed);
    let mut weights = vec![1.0 / n as f64; n];
    let mut model = AdaBoostModel {
        stumps: Vec::new(),
        alphas: Vec::new(),
    };
    let mut trace = AdaBoostTrace::default();
    let mut margins = vec![0.0; n];

    for _ in 0..n_rounds {
        let stump = grow_weighted_tree(x, y, &weights, &TreeConfig::stump(), &mut rng)?;
        let wrong: Vec<bool> = x.rows().zip(y).map(|(r, &l)| stump.classify(r) != l).collect();
        let error: f64 = weights
            .iter()
            .zip(&wrong)
            .filter(|(_, &w)| w)
            .map(|(v, _)| v)
            .sum();
        trace.errors.push(error);
        if error >= 0.5 {
            break;
        }
        let alpha = stage_weight(error);

        for (i, row) in x.rows().enumerate() {
            margins[i] += alpha * if stump.classify(row) == 1 { 1.0 } else { -1.0 };
        }
        let misclassified = margins
            .iter()
            .zip(y)
            .filter(|(&m, &l)| u8::from(m >= 0.0) != l)
            .count();
        trace.train_errors.push(misclassified as f64 / n as f64);

        model.stumps.push(stump);
        model.alphas.push(alpha);
        if error <= 0.0 {
            trace.weight_sums.push(weights.iter().sum());
            break;
        }

        let boost = alpha.exp();
        for (w, &bad) in weights.iter_mut().zip(&wrong) {
            if bad {
                *w *= boost;
            }
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        trace.weight_sums.push(weights.iter().sum());
    }
    Ok((model, trace))
}

impl AdaBoostModel {
    pub fn n_features(&self) -> Option<usize> {
        self.stumps.first().map(Tree::n_features)
    }

    /// `Σ α_t h_t(x)` with `h ∈ {-1, +1}`.
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.stumps
            .iter()
            .zip(&self.alphas)
            .map(|(s, a)| if s.classify(row) == 1 { *a } else { -*a })
            .sum()
    }

    /// Margin rescaled to `[0, 1]`; 0.5 for an empty ensemble.
    pub fn score(&self, row: &[f64]) -> f64 {
        let total: f64 = self.alphas.iter().sum();
        if total <= 0.0 {
            return 0.5;
        }
        ((self.margin(row) / total + 1.0) / 2.0).clamp(0.0, 1.0)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.stumps.len() != self.alphas.len() {
            return Err("adaboost stumps and alphas differ in length".into());
        }
        if self.alphas.iter().any(|a| !a.is_finite() || *a < 0.0 || *a > ALPHA_CAP + 1e-9) {
            return Err("adaboost stage weight outside [0, cap]".into());
        }
        for s in &self.stumps {
            s.validate()?;
        }
        Ok(())
    }
}
