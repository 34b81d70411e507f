//! Experiment building blocks shared by the subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use cardiodx_core::data::{load_and_clean, split_train_test, PatientRecord, SplitDataset};
use cardiodx_core::evaluation::{
    accuracy, apply_combination, confusion_counts, cross_validate, grid_search, mcc, roc_curve_auc,
    Combination, GridResult, HyperGrid, ParamValue, RocCurve,
};
use cardiodx_core::store::fingerprint;
use cardiodx_core::{LearnerSpec, ModelType, TrainedModel};
use serde::Serialize;

/// Learners reported by `compare`, in report order.
pub const COMPARE_SET: [ModelType; 8] = [
    ModelType::Knn,
    ModelType::LinearSvm,
    ModelType::RandomForest,
    ModelType::GaussianNb,
    ModelType::Adaboost,
    ModelType::Bagging,
    ModelType::ExtraTrees,
    ModelType::GradientBoosting,
];

/// Learners whose ROC curve `compare` writes without `--roc-all`.
pub const ROC_SET: [ModelType; 3] = [ModelType::RandomForest, ModelType::Knn, ModelType::GaussianNb];

pub struct Dataset {
    pub records: Vec<PatientRecord>,
    pub raw_rows: usize,
    pub dropped: usize,
    pub fingerprint: String,
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let loaded = load_and_clean(path)?;
    Ok(Dataset {
        records: loaded.records,
        raw_rows: loaded.raw_rows,
        dropped: loaded.dropped,
        fingerprint: fingerprint(&bytes),
    })
}

impl Dataset {
    pub fn split(&self, seed: u64, train_count: usize) -> Result<SplitDataset> {
        Ok(split_train_test(&self.records, seed, train_count)?)
    }
}

/// Held-out performance of one fitted learner.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub model_type: ModelType,
    pub accuracy: f64,
    pub mcc: f64,
    /// Curve over the model's probability-like scores, or SVM margins.
    pub roc: RocCurve,
}

pub fn evaluate(model: &TrainedModel, split: &SplitDataset) -> Result<Evaluation> {
    let pred = model.predict(&split.x_test)?;
    let counts = confusion_counts(&split.y_test, &pred.labels)?;
    let scores = match model.svm_margins(&split.x_test)? {
        Some(margins) => margins,
        None => pred.scores,
    };
    Ok(Evaluation {
        model_type: model.model_type(),
        accuracy: accuracy(&split.y_test, &pred.labels)?,
        mcc: mcc(&counts),
        roc: roc_curve_auc(&split.y_test, &scores)?,
    })
}

pub fn fit_and_evaluate(spec: &LearnerSpec, split: &SplitDataset) -> Result<(TrainedModel, Evaluation)> {
    let model = spec.fit(&split.x_train, &split.y_train)?;
    let eval = evaluate(&model, split)?;
    Ok((model, eval))
}

/// One learner's section of the metrics document. The SVM carries accuracy only.
#[derive(Debug, Clone, Serialize)]
pub struct LearnerReport {
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub seed: u64,
    pub folds: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub dataset_fingerprint: String,
    pub learners: BTreeMap<String, LearnerReport>,
    #[serde(skip)]
    pub curves: Vec<(ModelType, RocCurve)>,
}

pub fn compare(data: &Dataset, split: &SplitDataset, folds: usize) -> Result<CompareReport> {
    let mut learners = BTreeMap::new();
    let mut curves = Vec::new();
    for t in COMPARE_SET {
        let spec = LearnerSpec::default_for(t, split.seed);
        let (_, eval) = fit_and_evaluate(&spec, split)?;
        let cv = cross_validate(&spec, &split.x_train, &split.y_train, folds, split.seed)?;
        let scored = t != ModelType::LinearSvm;
        learners.insert(
            t.as_str().to_string(),
            LearnerReport {
                accuracy: eval.accuracy,
                mcc: scored.then_some(eval.mcc),
                auc: scored.then_some(eval.roc.auc),
                fold_scores: cv.fold_scores,
                mean: cv.mean,
            },
        );
        curves.push((t, eval.roc));
    }
    Ok(CompareReport {
        seed: split.seed,
        folds,
        train_rows: split.y_train.len(),
        test_rows: split.y_test.len(),
        dataset_fingerprint: data.fingerprint.clone(),
        learners,
        curves,
    })
}

/// Grid search on the training rows, then the winning random forest.
pub fn tune_forest(split: &SplitDataset, grid: &HyperGrid, folds: usize) -> Result<(GridResult, LearnerSpec)> {
    let base = LearnerSpec::default_for(ModelType::RandomForest, split.seed);
    let result = grid_search(grid, &base, &split.x_train, &split.y_train, folds, split.seed)?;
    let winner = apply_combination(&base, &result.best_params)?;
    Ok((result, winner))
}

/// Reads a `{"name": value, ...}` parameter file.
pub fn read_params(path: &Path) -> Result<Combination> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let map: BTreeMap<String, ParamValue> =
        serde_json::from_str(&text).with_context(|| format!("{} is not a parameter object", path.display()))?;
    Ok(map.into_iter().collect())
}

pub fn params_to_json(params: &Combination) -> String {
    let map: BTreeMap<&str, &ParamValue> = params.iter().map(|(k, v)| (k.as_str(), v)).collect();
    serde_json::to_string_pretty(&map).expect("parameters serialize") + "\n"
}
