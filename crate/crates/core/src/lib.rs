//! Heart-disease classification toolkit: data preparation, classical and
//! tree learners, a small dense network, evaluation and model storage.

pub mod classical;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod matrix;
pub mod model;
pub mod neuralnet;
pub mod rng;
pub mod store;
pub mod tree;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{LearnerConfig, LearnerSpec, ModelParams, ModelType, Prediction, TrainedModel};
pub use store::{load_model, save_model, ModelEnvelope, ModelMetadata};
