//! Instance-based, probabilistic and linear-margin learners.

pub mod knn;
pub mod naive_bayes;
pub mod svm;

pub use knn::KnnModel;
pub use naive_bayes::{train_gaussian_nb, GaussianNbModel};
pub use svm::{train_linear_svm, LinearSvmModel};
