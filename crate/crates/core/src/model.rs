//! One training and prediction contract over every learner family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classical::{self, GaussianNbModel, KnnModel, LinearSvmModel};
use crate::data::MinMaxScaler;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::neuralnet::{self, Network, NetworkSpec, TrainConfig};
use crate::rng::SplitMix64;
use crate::tree::{
    self, AdaBoostModel, Criterion, ForestKind, ForestModel, GbmModel, MaxFeatures, Tree, TreeConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelType {
    Knn,
    GaussianNb,
    LinearSvm,
    DecisionTree,
    RandomForest,
    Bagging,
    ExtraTrees,
    Adaboost,
    GradientBoosting,
    Dnn,
}

impl ModelType {
    pub const ALL: [ModelType; 10] = [
        ModelType::Knn,
        ModelType::GaussianNb,
        ModelType::LinearSvm,
        ModelType::DecisionTree,
        ModelType::RandomForest,
        ModelType::Bagging,
        ModelType::ExtraTrees,
        ModelType::Adaboost,
        ModelType::GradientBoosting,
        ModelType::Dnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelType::Knn => "knn",
            ModelType::GaussianNb => "gaussian_nb",
            ModelType::LinearSvm => "linear_svm",
            ModelType::DecisionTree => "decision_tree",
            ModelType::RandomForest => "random_forest",
            ModelType::Bagging => "bagging",
            ModelType::ExtraTrees => "extra_trees",
            ModelType::Adaboost => "adaboost",
            ModelType::GradientBoosting => "gradient_boosting",
            ModelType::Dnn => "dnn",
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        ModelType::ALL
            .into_iter()
            .find(|t| t.as_str() == key)
            .ok_or_else(|| Error::invalid(format!("unknown model type `{s}`")))
    }
}

/// Hyperparameters for one learner family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LearnerConfig {
    Knn { k: usize },
    GaussianNb,
    LinearSvm { lambda: f64, epochs: usize },
    DecisionTree { tree: TreeConfig },
    RandomForest { tree: TreeConfig, n_estimators: usize, bootstrap: bool },
    Bagging { tree: TreeConfig, n_estimators: usize, bootstrap: bool },
    ExtraTrees { tree: TreeConfig, n_estimators: usize, bootstrap: bool },
    Adaboost { n_estimators: usize },
    GradientBoosting { tree: TreeConfig, n_estimators: usize, learning_rate: f64 },
    Dnn { spec: NetworkSpec, train: TrainConfig },
}

impl LearnerConfig {
    /// Defaults per family. Tree ensembles use 10 estimators with depth 16.
    pub fn default_for(model_type: ModelType) -> Self {
        let tree = TreeConfig::default();
        let n_estimators = tree::DEFAULT_N_ESTIMATORS;
        match model_type {
            ModelType::Knn => LearnerConfig::Knn { k: classical::knn::DEFAULT_K },
            ModelType::GaussianNb => LearnerConfig::GaussianNb,
            ModelType::LinearSvm => LearnerConfig::LinearSvm {
                lambda: classical::svm::DEFAULT_LAMBDA,
                epochs: classical::svm::DEFAULT_EPOCHS,
            },
            ModelType::DecisionTree => LearnerConfig::DecisionTree { tree },
            ModelType::RandomForest => LearnerConfig::RandomForest {
                tree: TreeConfig { max_features: MaxFeatures::Sqrt, ..tree },
                n_estimators,
                bootstrap: true,
            },
            ModelType::Bagging => LearnerConfig::Bagging {
                tree,
                n_estimators,
                bootstrap: true,
            },
            ModelType::ExtraTrees => LearnerConfig::ExtraTrees {
                tree: TreeConfig { max_features: MaxFeatures::Sqrt, ..tree },
                n_estimators,
                bootstrap: false,
            },
            ModelType::Adaboost => LearnerConfig::Adaboost { n_estimators: 50 },
            ModelType::GradientBoosting => LearnerConfig::GradientBoosting {
                tree: TreeConfig { max_depth: 3, ..tree },
                n_estimators,
                learning_rate: 0.1,
            },
            ModelType::Dnn => LearnerConfig::Dnn {
                spec: NetworkSpec::default(),
                train: TrainConfig::default(),
            },
        }
    }

    pub fn model_type(&self) -> ModelType {
        match self {
            LearnerConfig::Knn { .. } => ModelType::Knn,
            LearnerConfig::GaussianNb => ModelType::GaussianNb,
            LearnerConfig::LinearSvm { .. } => ModelType::LinearSvm,
            LearnerConfig::DecisionTree { .. } => ModelType::DecisionTree,
            LearnerConfig::RandomForest { .. } => ModelType::RandomForest,
            LearnerConfig::Bagging { .. } => ModelType::Bagging,
            LearnerConfig::ExtraTrees { .. } => ModelType::ExtraTrees,
            LearnerConfig::Adaboost { .. } => ModelType::Adaboost,
            LearnerConfig::GradientBoosting { .. } => ModelType::GradientBoosting,
            LearnerConfig::Dnn { .. } => ModelType::Dnn,
        }
    }

    /// Sets one named hyperparameter, as used by grid search.
    pub fn set_param(&mut self, name: &str, value: &crate::evaluation::ParamValue) -> Result<()> {
        let family = self.model_type();
        let unknown = || Error::UnknownParameter {
            family: family.to_string(),
            name: name.to_string(),
        };
        let tree = match self {
            LearnerConfig::DecisionTree { tree }
            | LearnerConfig::RandomForest { tree, .. }
            | LearnerConfig::Bagging { tree, .. }
            | LearnerConfig::ExtraTrees { tree, .. }
            | LearnerConfig::GradientBoosting { tree, .. } => Some(tree),
            _ => None,
        };
        if let Some(tree) = tree {
            match name {
                "criterion" => {
                    tree.criterion = value.as_text()?.parse::<Criterion>()?;
                    return Ok(());
                }
                "max_depth" => {
                    tree.max_depth = value.as_usize()?;
                    return Ok(());
                }
                "min_samples_split" => {
                    tree.min_samples_split = value.as_usize()?;
                    return Ok(());
                }
                "min_samples_leaf" => {
                    tree.min_samples_leaf = value.as_usize()?;
                    return Ok(());
                }
                "max_features" => {
                    tree.max_features = value.as_text()?.parse::<MaxFeatures>()?;
                    return Ok(());
                }
                _ => {}
            }
        }
        match (self, name) {
            (LearnerConfig::Knn { k }, "k" | "n_neighbors") => *k = value.as_usize()?,
            (LearnerConfig::LinearSvm { lambda, .. }, "lambda") => *lambda = value.as_f64()?,
            (LearnerConfig::LinearSvm { epochs, .. }, "epochs") => *epochs = value.as_usize()?,
            (
                LearnerConfig::RandomForest { n_estimators, .. }
                | LearnerConfig::Bagging { n_estimators, .. }
                | LearnerConfig::ExtraTrees { n_estimators, .. }
                | LearnerConfig::Adaboost { n_estimators }
                | LearnerConfig::GradientBoosting { n_estimators, .. },
                "n_estimators",
            ) => *n_estimators = value.as_usize()?,
            (
                LearnerConfig::RandomForest { bootstrap, .. }
                | LearnerConfig::Bagging { bootstrap, .. }
                | LearnerConfig::ExtraTrees { bootstrap, .. },
                "bootstrap",
            ) => *bootstrap = value.as_bool()?,
            (LearnerConfig::GradientBoosting { learning_rate, .. }, "learning_rate") => {
                *learning_rate = value.as_f64()?
            }
            (LearnerConfig::Dnn { train, .. }, "epochs") => train.epochs = value.as_usize()?,
            (LearnerConfig::Dnn { train, .. }, "batch_size") => train.batch_size = value.as_usize()?,
            (LearnerConfig::Dnn { train, .. }, "learning_rate") => train.learning_rate = value.as_f64()?,
            _ => return Err(unknown()),
        }
        Ok(())
    }
}

/// A learner family with its hyperparameters, seed and scaling choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub config: LearnerConfig,
    /// Fit a min-max scaler on the training rows first. Always on for the DNN.
    pub scaled: bool,
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(config: LearnerConfig, seed: u64) -> Self {
        Self {
            scaled: matches!(config, LearnerConfig::Dnn { .. }),
            config,
            seed,
        }
    }

    pub fn default_for(model_type: ModelType, seed: u64) -> Self {
        Self::new(LearnerConfig::default_for(model_type), seed)
    }

    pub fn model_type(&self) -> ModelType {
        self.config.model_type()
    }

    pub fn uses_scaler(&self) -> bool {
        self.scaled || matches!(self.config, LearnerConfig::Dnn { .. })
    }

    pub fn fit(&self, x: &Matrix, y: &[u8]) -> Result<TrainedModel> {
        TrainedModel::fit(self, x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Knn(KnnModel),
    GaussianNb(GaussianNbModel),
    LinearSvm(LinearSvmModel),
    DecisionTree(Tree),
    Forest(ForestModel),
    Adaboost(AdaBoostModel),
    GradientBoosting(GbmModel),
    Dnn(Network),
}

impl ModelParams {
    pub fn model_type(&self) -> ModelType {
        match self {
            ModelParams::Knn(_) => ModelType::Knn,
            ModelParams::GaussianNb(_) => ModelType::GaussianNb,
            ModelParams::LinearSvm(_) => ModelType::LinearSvm,
            ModelParams::DecisionTree(_) => ModelType::DecisionTree,
            ModelParams::Forest(f) => match f.kind {
                ForestKind::RandomForest => ModelType::RandomForest,
                ForestKind::Bagging => ModelType::Bagging,
                ForestKind::ExtraTrees => ModelType::ExtraTrees,
            },
            ModelParams::Adaboost(_) => ModelType::Adaboost,
            ModelParams::GradientBoosting(_) => ModelType::GradientBoosting,
            ModelParams::Dnn(_) => ModelType::Dnn,
        }
    }

    /// Feature count the model expects, when it can be known.
    pub fn n_features(&self) -> Option<usize> {
        match self {
            ModelParams::Knn(m) => Some(m.n_features()),
            ModelParams::GaussianNb(m) => Some(m.n_features()),
            ModelParams::LinearSvm(m) => Some(m.n_features()),
            ModelParams::DecisionTree(t) => Some(t.n_features()),
            ModelParams::Forest(f) => Some(f.n_features()),
            ModelParams::Adaboost(m) => m.n_features(),
            ModelParams::GradientBoosting(m) => m.n_features(),
            ModelParams::Dnn(n) => Some(n.n_inputs()),
        }
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        match self {
            ModelParams::Knn(m) => m.validate(),
            ModelParams::GaussianNb(m) => m.validate(),
            ModelParams::LinearSvm(m) => m.validate(),
            ModelParams::DecisionTree(t) => t.validate(),
            ModelParams::Forest(f) => f.validate(),
            ModelParams::Adaboost(m) => m.validate(),
            ModelParams::GradientBoosting(m) => m.validate(),
            ModelParams::Dnn(n) => n.validate(),
        }
    }
}

/// Labels and positive-class scores for a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

/// A fitted model plus the scaler applied to its inputs, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub scaler: Option<MinMaxScaler>,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn fit(spec: &LearnerSpec, x: &Matrix, y: &[u8]) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.n_rows(),
                found: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::EmptyInput);
        }
        let scaler = if spec.uses_scaler() {
            Some(MinMaxScaler::fit(x)?)
        } else {
            None
        };
        let scaled;
        let x = match &scaler {
            Some(s) => {
                scaled = s.transform(x)?;
                &scaled
            }
            None => x,
        };
        let seed = spec.seed;
        let params = match &spec.config {
            LearnerConfig::Knn { k } => ModelParams::Knn(KnnModel::fit(x, y, *k)?),
            LearnerConfig::GaussianNb => ModelParams::GaussianNb(classical::train_gaussian_nb(x, y)?),
            LearnerConfig::LinearSvm { lambda, epochs } => {
                ModelParams::LinearSvm(classical::train_linear_svm(x, y, *lambda, *epochs, seed)?)
            }
            LearnerConfig::DecisionTree { tree: cfg } => {
                ModelParams::DecisionTree(tree::grow_tree(x, y, cfg, &mut SplitMix64::new(seed))?)
            }
            LearnerConfig::RandomForest { tree: cfg, n_estimators, bootstrap } => ModelParams::Forest(
                tree::train_random_forest(x, y, cfg, *n_estimators, seed, *bootstrap)?,
            ),
            LearnerConfig::Bagging { tree: cfg, n_estimators, bootstrap } => {
                ModelParams::Forest(tree::train_bagging(x, y, cfg, *n_estimators, seed, *bootstrap)?)
            }
            LearnerConfig::ExtraTrees { tree: cfg, n_estimators, bootstrap } => {
                ModelParams::Forest(tree::train_extra_trees(x, y, cfg, *n_estimators, seed, *bootstrap)?)
            }
            LearnerConfig::Adaboost { n_estimators } => {
                ModelParams::Adaboost(tree::train_adaboost(x, y, *n_estimators, seed)?.0)
            }
            LearnerConfig::GradientBoosting { tree: cfg, n_estimators, learning_rate } => {
                ModelParams::GradientBoosting(tree::train_gradient_boosting(
                    x,
                    y,
                    *n_estimators,
                    *learning_rate,
                    cfg,
                    seed,
                )?)
            }
            LearnerConfig::Dnn { spec: net_spec, train } => {
                let init = neuralnet::build_network(net_spec, seed)?;
                let cfg = TrainConfig { seed, ..*train };
                ModelParams::Dnn(neuralnet::train_sgd(&init, x, y, &cfg, None)?.0)
            }
        };
        Ok(Self { scaler, params })
    }

    pub fn model_type(&self) -> ModelType {
        self.params.model_type()
    }

    pub fn n_features(&self) -> Option<usize> {
        self.scaler
            .as_ref()
            .map(MinMaxScaler::n_features)
            .or_else(|| self.params.n_features())
    }

    /// Labels are `score >= 0.5`, except the SVM whose label is the sign
    /// of its raw margin (`margin >= 0`) and whose score is its logistic.
    pub fn predict(&self, x: &Matrix) -> Result<Prediction> {
        if let Some(d) = self.n_features() {
            x.expect_cols(d)?;
        }
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                scaled = s.transform(x)?;
                &scaled
            }
            None => x,
        };
        if let Some(d) = self.params.n_features() {
            x.expect_cols(d)?;
        }
        let scores: Vec<f64> = match &self.params {
            ModelParams::Dnn(net) => net.predict_proba(x)?,
            ModelParams::LinearSvm(m) => {
                let margins = x.rows().map(|r| m.decision(r)).collect::<Result<Vec<f64>>>()?;
                let labels = margins.iter().map(|&v| u8::from(v >= 0.0)).collect();
                let scores = margins.into_iter().map(tree::sigmoid).collect();
                return Ok(Prediction { labels, scores });
            }
            params => x.rows().map(|r| row_score(params, r)).collect::<Result<Vec<f64>>>()?,
        };
        let labels = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
        Ok(Prediction { labels, scores })
    }

    /// Raw SVM margins, or `None` for other families.
    pub fn svm_margins(&self, x: &Matrix) -> Result<Option<Vec<f64>>> {
        let ModelParams::LinearSvm(m) = &self.params else {
            return Ok(None);
        };
        let x = match &self.scaler {
            Some(s) => s.transform(x)?,
            None => x.clone(),
        };
        x.rows().map(|r| m.decision(r)).collect::<Result<Vec<f64>>>().map(Some)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        self.params.validate()?;
        if let Some(s) = &self.scaler {
            s.validate()?;
            if let Some(d) = self.params.n_features() {
                if d != s.n_features() {
                    return Err(format!(
                        "scaler has {} features but the model expects {d}",
                        s.n_features()
                    ));
                }
            }
        }
        Ok(())
    }
}

fn row_score(params: &ModelParams, row: &[f64]) -> Result<f64> {
    Ok(match params {
        ModelParams::Knn(m) => m.classify(row)?.1,
        ModelParams::GaussianNb(m) => m.posteriors(row)?[1],
        ModelParams::DecisionTree(t) => t.value(row),
        ModelParams::Forest(f) => f.score(row),
        ModelParams::Adaboost(m) => m.score(row),
        ModelParams::GradientBoosting(m) => m.score(row),
        ModelParams::LinearSvm(m) => tree::sigmoid(m.decision(row)?),
        ModelParams::Dnn(n) => n.predict_proba(&Matrix::from_rows(&[row])?)?[0],
    })
}
