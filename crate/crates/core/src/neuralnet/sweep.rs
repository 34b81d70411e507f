use serde::Serialize;

use super::{bce_loss, build_network, train_sgd, NetworkSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_SWEEP_EPOCHS: [usize; 8] = [10, 25, 50, 100, 200, 350, 500, 1000];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epochs: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub final_loss: f64,
}

/// Retrains from the same initial weights once per entry of `epoch_list`.
/// Rows come back sorted by epoch count.
pub fn epoch_sweep(
    spec: &NetworkSpec,
    train: (&Matrix, &[u8]),
    test: (&Matrix, &[u8]),
    epoch_list: &[usize],
    config: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    if epoch_list.is_empty() {
        return Err(Error::invalid("epoch list is empty"));
    }
    let mut epochs = epoch_list.to_vec();
    epochs.sort_unstable();
    let init = build_network(spec, config.seed)?;
    epochs
        .into_iter()
        .map(|e| {
            let cfg = TrainConfig { epochs: e, ..*config };
            let (net, history) = train_sgd(&init, train.0, train.1, &cfg, Some(test))?;
            let train_probs = net.predict_proba(train.0)?;
            let hits = super::labels_from(&train_probs)
                .iter()
                .zip(train.1)
                .filter(|(a, b)| a == b)
                .count();
            Ok(SweepRow {
                epochs: e,
                train_accuracy: hits as f64 / train.1.len() as f64,
                test_accuracy: history.test_accuracy.unwrap_or(f64::NAN),
                final_loss: bce_loss(&train_probs, train.1)?,
            })
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("epochs,train_accuracy,test_accuracy,final_loss\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.epochs, r.train_accuracy, r.test_accuracy, r.final_loss
        ));
    }
    out
}
