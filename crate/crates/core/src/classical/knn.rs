use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_K: usize = 5;

/// Euclidean k-nearest-neighbour vote over a stored training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Matrix,
    pub y: Vec<u8>,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[u8], k: usize) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.n_rows(),
                found: y.len(),
            });
        }
        let model = Self {
            k,
            x: x.clone(),
            y: y.to_vec(),
        };
        model.validate().map_err(Error::InvalidArgument)?;
        Ok(model)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.k == 0 || self.k > self.x.n_rows() {
            return Err(format!(
                "k = {} must lie in 1..={} (training rows)",
                self.k,
                self.x.n_rows()
            ));
        }
        if self.y.len() != self.x.n_rows() {
            return Err("knn labels do not match stored rows".into());
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    /// Returns `(label, positive_fraction)`. Distance ties at the k-th slot
    /// go to the lower training-row index; the label is 1 when at least half
    /// of the neighbours are positive.
    pub fn classify(&self, query: &[f64]) -> Result<(u8, f64)> {
        if query.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: query.len(),
            });
        }
        let mut dist: Vec<(f64, usize)> = self
            .x
            .rows()
            .enumerate()
            .map(|(i, row)| {
                let d: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_distance);
        }
        let positives = dist[..self.k].iter().filter(|&&(_, i)| self.y[i] == 1).count();
        let fraction = positives as f64 / self.k as f64;
        Ok((u8::from(fraction >= 0.5), fraction))
    }
}
