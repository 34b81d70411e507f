use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const VAR_SMOOTHING: f64 = 1e-9;

/// Gaussian naive Bayes for the two-class problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub var_floor: f64,
}

fn mean_and_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

pub fn train_gaussian_nb(x: &Matrix, y: &[u8]) -> Result<GaussianNbModel> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = y.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }

    // Floor scaled by the largest per-feature variance of the whole set.
    let global = (0..x.n_cols())
        .map(|j| mean_and_var(x.column(j)).1)
        .fold(0.0, f64::max);
    let var_floor = VAR_SMOOTHING * (global + 1.0);

    let mut means: [Vec<f64>; 2] = Default::default();
    let mut variances: [Vec<f64>; 2] = Default::default();
    for class in 0..2u8 {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        for j in 0..x.n_cols() {
            let (m, v) = mean_and_var(rows.iter().map(|&i| x.get(i, j)));
            means[class as usize].push(m);
            variances[class as usize].push(v + var_floor);
        }
    }
    let n = y.len() as f64;
    Ok(GaussianNbModel {
        priors: [n0 as f64 / n, n1 as f64 / n],
        means,
        variances,
        var_floor,
    })
}

impl GaussianNbModel {
    pub fn n_features(&self) -> usize {
        self.means[0].len()
    }

    /// Class posteriors `[P(0|x), P(1|x)]`, computed in log space.
    pub fn posteriors(&self, row: &[f64]) -> Result<[f64; 2]> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        let mut log_joint = [0.0; 2];
        for (c, lj) in log_joint.iter_mut().enumerate() {
            *lj = self.priors[c].ln()
                + row
                    .iter()
                    .zip(&self.means[c])
                    .zip(&self.variances[c])
                    .map(|((&v, &m), &var)| {
                        -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - m) * (v - m) / (2.0 * var)
                    })
                    .sum::<f64>();
        }
        let top = log_joint[0].max(log_joint[1]);
        let w = [(log_joint[0] - top).exp(), (log_joint[1] - top).exp()];
        let total = w[0] + w[1];
        Ok([w[0] / total, w[1] / total])
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        let d = self.n_features();
        if self.means[1].len() != d || self.variances.iter().any(|v| v.len() != d) {
            return Err("naive bayes parameter vectors differ in length".into());
        }
        if (self.priors[0] + self.priors[1] - 1.0).abs() > 1e-9 || self.priors.iter().any(|&p| p <= 0.0) {
            return Err("naive bayes priors must be positive and sum to 1".into());
        }
        if self.variances.iter().flatten().any(|&v| !(v >= self.var_floor) || !v.is_finite()) {
            return Err("naive bayes variance below floor".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_classes() {
        let x = Matrix::from_rows(&[[-1.0], [0.0], [1.0], [9.0], [10.0], [11.0]]).unwrap();
        let m = train_gaussian_nb(&x, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_eq!(m.priors, [0.5, 0.5]);
        let p = m.posteriors(&[0.0]).unwrap();
        // Equal variances 2/3: log-likelihood ratio (10^2 - 0) / (2 * 2/3) = 75.
        assert!(p[0] > 0.999);
        assert!((p[1] - 1.0 / (1.0 + 75f64.exp())).abs() < 1e-30);
    }

    #[test]
    fn symmetric_query_is_even() {
        let x = Matrix::from_rows(&[[-1.0], [0.0], [1.0], [9.0], [10.0], [11.0]]).unwrap();
        let m = train_gaussian_nb(&x, &[0, 0, 0, 1, 1, 1]).unwrap();
        let p = m.posteriors(&[5.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn posteriors_sum_to_one() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 3.0], [3.0, 9.0], [4.0, 4.0]]).unwrap();
        let m = train_gaussian_nb(&x, &[0, 1, 0, 1]).unwrap();
        for q in [[0.0, 0.0], [2.5, 4.0], [100.0, -3.0]] {
            let p = m.posteriors(&q).unwrap();
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_feature_respects_floor() {
        let x = Matrix::from_rows(&[[1.0, 7.0], [2.0, 7.0], [3.0, 7.0], [4.0, 7.0]]).unwrap();
        let m = train_gaussian_nb(&x, &[0, 1, 0, 1]).unwrap();
        assert!(m.validate().is_ok());
        assert!(m.variances[0][1] >= m.var_floor);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(matches!(train_gaussian_nb(&x, &[1, 1]), Err(Error::SingleClass)));
    }
}
