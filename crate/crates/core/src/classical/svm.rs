use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, SplitMix64};

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_EPOCHS: usize = 200;

/// Linear SVM trained with Pegasos-style stochastic subgradient descent on
/// the L2-regularised hinge loss. The bias is not regularised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

pub fn train_linear_svm(
    x: &Matrix,
    y: &[u8],
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearSvmModel> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::SingleClass);
    }

    let mut rng = SplitMix64::new(derive_seed(seed, 0x5f3));
    let mut w = vec![0.0; x.n_cols()];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.n_rows()).collect();
    let mut t = 0u64;
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let target = if y[i] == 1 { 1.0 } else { -1.0 };
            let row = x.row(i);
            let margin = target * (dot(&w, row) + b);
            let shrink = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, &xj) in w.iter_mut().zip(row) {
                    *wj += eta * target * xj;
                }
                b += eta * target;
            }
        }
    }

    Ok(LinearSvmModel {
        weights: w,
        bias: b,
        lambda,
        epochs,
        seed,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSvmModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// Raw margin `w·x + b`.
    pub fn decision(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        Ok(dot(&self.weights, row) + self.bias)
    }

    pub fn classify(&self, row: &[f64]) -> Result<u8> {
        Ok(u8::from(self.decision(row)? >= 0.0))
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.weights.iter().chain([&self.bias]).any(|v| !v.is_finite()) {
            return Err("svm weights must be finite".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_margin_is_positive() {
        let m = LinearSvmModel {
            weights: vec![1.0, -1.0],
            bias: 0.0,
            lambda: 1.0,
            epochs: 0,
            seed: 0,
        };
        assert_eq!(m.classify(&[2.0, 2.0]).unwrap(), 1);
        assert_eq!(m.classify(&[1.0, 2.0]).unwrap(), 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [3.0, 4.0], [4.0, 3.0]]).unwrap();
        let y = [0, 0, 1, 1];
        let a = train_linear_svm(&x, &y, 0.1, 20, 5).unwrap();
        let b = train_linear_svm(&x, &y, 0.1, 20, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn label_invariant_under_positive_scaling() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [3.0, 4.0], [4.0, 3.0]]).unwrap();
        let m = train_linear_svm(&x, &[0, 0, 1, 1], 0.1, 20, 1).unwrap();
        let scaled = LinearSvmModel {
            weights: m.weights.iter().map(|w| w * 3.5).collect(),
            bias: m.bias * 3.5,
            ..m.clone()
        };
        for q in [[0.5, 0.5], [2.0, 2.0], [5.0, -1.0]] {
            assert_eq!(m.classify(&q).unwrap(), scaled.classify(&q).unwrap());
        }
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(train_linear_svm(&x, &[0, 1], 0.0, 1, 0).is_err());
        assert!(matches!(train_linear_svm(&x, &[1, 1], 0.1, 1, 0), Err(Error::SingleClass)));
    }
}
