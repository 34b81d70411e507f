use serde::Serialize;

use crate::error::{Error, Result};

/// Confusion-matrix tallies with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn accuracy(&self) -> Result<f64> {
        if self.total() == 0 {
            return Err(Error::invalid("accuracy of zero predictions"));
        }
        Ok((self.true_pos + self.true_neg) as f64 / self.total() as f64)
    }

    /// Matthews correlation coefficient. Defined as 0 when any marginal
    /// total is zero.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, tn, fneg) = (
            self.true_pos as i128,
            self.false_pos as i128,
            self.true_neg as i128,
            self.false_neg as i128,
        );
        let factors = [tp + fp, tp + fneg, tn + fp, tn + fneg];
        if factors.iter().any(|&f| f == 0) {
            return 0.0;
        }
        let numerator = (tp * tn - fp * fneg) as f64;
        // Exact integer product keeps the result independent of factor order.
        let denominator = (factors.iter().map(|&f| f as u128).product::<u128>() as f64).sqrt();
        (numerator / denominator).clamp(-1.0, 1.0)
    }
}

fn check_binary(labels: &[u8]) -> Result<()> {
    match labels.iter().find(|&&v| v > 1) {
        Some(v) => Err(Error::invalid(format!("label {v} is not binary"))),
        None => Ok(()),
    }
}

pub fn confusion_counts(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    check_binary(y_true)?;
    check_binary(y_pred)?;
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => c.true_pos += 1,
            (0, 1) => c.false_pos += 1,
            (0, 0) => c.true_neg += 1,
            _ => c.false_neg += 1,
        }
    }
    Ok(c)
}

pub fn accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    confusion_counts(y_true, y_pred)?.accuracy()
}

pub fn mcc(counts: &ConfusionCounts) -> f64 {
    counts.mcc()
}

/// ROC curve over descending unique score thresholds. A row is predicted
/// positive when its score is `>= threshold`. The first threshold is a
/// sentinel above every score, giving the `(0, 0)` point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.fpr.iter().copied().zip(self.tpr.iter().copied())
    }

    /// `threshold,fpr,tpr` rows, one per curve point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for ((t, f), p) in self.thresholds.iter().zip(&self.fpr).zip(&self.tpr) {
            out.push_str(&format!("{t},{f},{p}\n"));
        }
        out
    }
}

pub fn roc_curve_auc(y_true: &[u8], scores: &[f64]) -> Result<RocCurve> {
    if y_true.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: scores.len(),
        });
    }
    check_binary(y_true)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let positives = y_true.iter().filter(|&&v| v == 1).count() as u64;
    let negatives = y_true.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let top = scores[order[0]];
    let sentinel = if top.is_finite() { top + 1.0 } else { f64::INFINITY };
    let mut thresholds = vec![sentinel];
    let mut tp_counts = vec![0u64];
    let mut fp_counts = vec![0u64];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if y_true[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(threshold);
        tp_counts.push(tp);
        fp_counts.push(fp);
    }

    // Trapezoids in integer units; one division at the end.
    let twice_area: u128 = fp_counts
        .windows(2)
        .zip(tp_counts.windows(2))
        .map(|(f, t)| u128::from(f[1] - f[0]) * u128::from(t[1] + t[0]))
        .sum();
    let auc = twice_area as f64 / (2 * u128::from(positives) * u128::from(negatives)) as f64;

    Ok(RocCurve {
        thresholds,
        fpr: fp_counts.iter().map(|&f| f as f64 / negatives as f64).collect(),
        tpr: tp_counts.iter().map(|&t| t as f64 / positives as f64).collect(),
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let c = confusion_counts(&[1, 0, 1, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!(
            c,
            ConfusionCounts { true_pos: 1, false_pos: 0, true_neg: 2, false_neg: 1 }
        );
        let y = [1, 0, 0, 1, 1];
        let same = confusion_counts(&y, &y).unwrap();
        assert_eq!((same.false_pos, same.false_neg), (0, 0));
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        let c = confusion_counts(&y, &flipped).unwrap();
        assert_eq!((c.true_pos, c.true_neg), (0, 0));
    }

    #[test]
    fn confusion_errors() {
        assert!(confusion_counts(&[1, 0], &[1]).is_err());
        assert!(confusion_counts(&[1, 2], &[1, 0]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0, 1, 0], &[1, 0, 0, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        let y = [1, 0, 1, 1, 0, 0, 1];
        let p = [1, 1, 0, 1, 0, 1, 1];
        let q: Vec<u8> = p.iter().map(|v| 1 - v).collect();
        assert_eq!(accuracy(&y, &p).unwrap() + accuracy(&y, &q).unwrap(), 1.0);
    }

    #[test]
    fn mcc_examples() {
        let y = [1, 0, 1, 0, 0];
        assert_eq!(mcc(&confusion_counts(&y, &y).unwrap()), 1.0);
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        assert_eq!(mcc(&confusion_counts(&y, &flipped).unwrap()), -1.0);
        let c = ConfusionCounts { true_pos: 1, false_pos: 1, true_neg: 2, false_neg: 1 };
        assert!((mcc(&c) - 1.0 / 6.0).abs() < 1e-15);
        let degenerate = ConfusionCounts { true_pos: 3, false_pos: 2, true_neg: 0, false_neg: 0 };
        assert_eq!(mcc(&degenerate), 0.0);
    }

    #[test]
    fn roc_examples() {
        let perfect = roc_curve_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert_eq!(perfect.auc, 1.0);
        let flat = roc_curve_auc(&[0, 1, 0, 1, 1], &[0.3; 5]).unwrap();
        assert_eq!(flat.auc, 0.5);
        let r = roc_curve_auc(&[1, 0, 1], &[0.9, 0.8, 0.7]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points().next(), Some((0.0, 0.0)));
        assert_eq!(r.points().last(), Some((1.0, 1.0)));
        assert!(roc_curve_auc(&[1, 1], &[0.2, 0.3]).is_err());
    }

    #[test]
    fn roc_csv_header() {
        let r = roc_curve_auc(&[0, 1], &[0.25, 0.75]).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("threshold,fpr,tpr\n"));
        assert_eq!(csv.lines().count(), 1 + r.thresholds.len());
    }
}
