//! Metrics, stratified cross-validation and exhaustive grid search.

mod cv;
mod grid;
mod metrics;

pub use cv::{cross_validate, cross_validate_with, mean, stratified_kfold, CvResult, FoldAssignment, DEFAULT_FOLDS};
pub use grid::{apply_combination, grid_search, Combination, GridResult, GridRow, HyperGrid, ParamValue};
pub use metrics::{accuracy, confusion_counts, mcc, roc_curve_auc, ConfusionCounts, RocCurve};
