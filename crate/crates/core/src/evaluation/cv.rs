use serde::Serialize;

use super::metrics::accuracy;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::LearnerSpec;
use crate::rng::SplitMix64;

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    /// Row indices held out in `fold`.
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Each class is shuffled on its own and dealt round-robin into folds. The
/// dealing position carries over from one class to the next, so both the
/// overall fold sizes and every per-class count differ by at most one.
///
/// A class with fewer than `k` members is allowed (some folds then lack it),
/// which keeps leave-one-out (`k = n`) available; a warning is logged.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = y.len();
    if k < 2 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 2..={n}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut fold_of = vec![0; n];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..n).filter(|&i| y[i] == class).collect();
        if !members.is_empty() && members.len() < k {
            log::warn!("class {class} has {} rows, fewer than k = {k}", members.len());
        }
        rng.shuffle(&mut members);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    Ok(FoldAssignment { k, fold_of, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Stratified k-fold accuracy of `spec` on `(x, y)`.
pub fn cross_validate(spec: &LearnerSpec, x: &Matrix, y: &[u8], k: usize, seed: u64) -> Result<CvResult> {
    let folds = stratified_kfold(y, k, seed)?;
    cross_validate_with(spec, x, y, &folds)
}

/// Cross-validation over a fixed fold assignment. Every fold trains with
/// the same learner seed.
pub fn cross_validate_with(
    spec: &LearnerSpec,
    x: &Matrix,
    y: &[u8],
    folds: &FoldAssignment,
) -> Result<CvResult> {
    if x.n_rows() != y.len() || folds.fold_of.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: x.n_rows().min(folds.fold_of.len()),
        });
    }
    let fold_scores = (0..folds.k)
        .map(|f| {
            let train = folds.train_rows(f);
            let test = folds.test_rows(f);
            let y_train: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let y_test: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let model = spec.fit(&x.select_rows(&train), &y_train)?;
            let pred = model.predict(&x.select_rows(&test))?;
            accuracy(&y_test, &pred.labels)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CvResult {
        mean: mean(&fold_scores),
        fold_scores,
    })
}
