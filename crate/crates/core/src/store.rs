//! Portable JSON model files.
//!
//! A `.model` file is one JSON object with the keys `schema_version`,
//! `model_type`, `feature_order`, `scaler`, `payload` and `metadata`. Floats
//! are written in shortest round-trip form so a reload is bit-exact.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::classical::{GaussianNbModel, KnnModel, LinearSvmModel};
use crate::data::{MinMaxScaler, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::model::{ModelParams, ModelType, TrainedModel};
use crate::neuralnet::{Activation, DenseLayer, Network};
use crate::tree::{AdaBoostModel, ForestKind, ForestModel, GbmModel, Node, Tree, TreeConfig};

pub const SCHEMA_VERSION: u64 = 1;
pub const MODEL_EXTENSION: &str = "model";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    /// ISO-8601 training time.
    pub trained_at: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    /// Hex SHA-256 of the training data file.
    pub dataset_fingerprint: String,
}

/// A trained model with everything needed to serve it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEnvelope {
    pub model: TrainedModel,
    pub metadata: ModelMetadata,
}

impl ModelEnvelope {
    pub fn new(model: TrainedModel, metadata: ModelMetadata) -> Result<Self> {
        let env = Self { model, metadata };
        env.validate()?;
        Ok(env)
    }

    pub fn model_type(&self) -> ModelType {
        self.model.model_type()
    }

    fn validate(&self) -> Result<()> {
        self.model.validate().map_err(Error::ModelValidation)?;
        if self.model_type() == ModelType::Dnn && self.model.scaler.is_none() {
            return Err(Error::ModelValidation("a dnn model requires a scaler".into()));
        }
        if let Some(d) = self.model.n_features() {
            if d != FEATURE_NAMES.len() {
                return Err(Error::ModelValidation(format!(
                    "model expects {d} features, the envelope fixes {}",
                    FEATURE_NAMES.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let file = EnvelopeFile {
            schema_version: SCHEMA_VERSION,
            model_type: self.model_type(),
            feature_order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            scaler: self.model.scaler.clone(),
            payload: payload_to_value(&self.model.params)?,
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::ModelValidation(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| Error::ModelParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let version = raw
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::ModelValidation("missing or non-integer schema_version".into()))?;
        if version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        let file: EnvelopeFile =
            serde_json::from_value(raw).map_err(|e| Error::ModelValidation(e.to_string()))?;
        if file.feature_order != FEATURE_NAMES {
            return Err(Error::ModelValidation(format!(
                "feature_order must be {}",
                FEATURE_NAMES.join(",")
            )));
        }
        let params = payload_from_value(file.model_type, file.payload)?;
        let env = Self {
            model: TrainedModel {
                scaler: file.scaler,
                params,
            },
            metadata: file.metadata,
        };
        env.validate()?;
        Ok(env)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeFile {
    schema_version: u64,
    model_type: ModelType,
    feature_order: Vec<String>,
    scaler: Option<MinMaxScaler>,
    payload: Value,
    metadata: ModelMetadata,
}

/// Writes to a temporary file in the target directory, then renames.
pub fn save_model(envelope: &ModelEnvelope, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = envelope.to_json()?;
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(text.as_bytes()).map_err(io_err)?;
    tmp.write_all(b"\n").map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelEnvelope> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ModelEnvelope::from_json(&text)
}

/// Hex SHA-256 of raw dataset bytes.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// Payload representations. Trees are flat node arrays in which `-1` marks
// "no child"; network layers carry explicit row and column counts.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRepr {
    feature: i64,
    threshold: f64,
    left: i64,
    right: i64,
    counts: [f64; 2],
    value: f64,
    samples: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRepr {
    n_features: usize,
    nodes: Vec<NodeRepr>,
}

impl From<&Tree> for TreeRepr {
    fn from(t: &Tree) -> Self {
        let nodes = t
            .nodes()
            .iter()
            .map(|n| match *n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    samples,
                } => NodeRepr {
                    feature: feature as i64,
                    threshold,
                    left: left as i64,
                    right: right as i64,
                    counts: [0.0, 0.0],
                    value: 0.0,
                    samples,
                },
                Node::Leaf { counts, value, samples } => NodeRepr {
                    feature: -1,
                    threshold: 0.0,
                    left: -1,
                    right: -1,
                    counts,
                    value,
                    samples,
                },
            })
            .collect();
        Self {
            n_features: t.n_features(),
            nodes,
        }
    }
}

impl TryFrom<TreeRepr> for Tree {
    type Error = Error;

    fn try_from(r: TreeRepr) -> Result<Self> {
        let count = r.nodes.len();
        let index = |v: i64, what: &str| -> Result<usize> {
            usize::try_from(v)
                .ok()
                .filter(|&i| i < count)
                .ok_or_else(|| Error::ModelValidation(format!("tree {what} index {v} out of range")))
        };
        let nodes = r
            .nodes
            .into_iter()
            .map(|n| {
                if n.feature < 0 {
                    if n.left != -1 || n.right != -1 {
                        return Err(Error::ModelValidation("leaf node has children".into()));
                    }
                    Ok(Node::Leaf {
                        counts: n.counts,
                        value: n.value,
                        samples: n.samples,
                    })
                } else {
                    let feature = n.feature as usize;
                    if feature >= r.n_features {
                        return Err(Error::ModelValidation(format!(
                            "split feature {feature} exceeds {} features",
                            r.n_features
                        )));
                    }
                    Ok(Node::Split {
                        feature,
                        threshold: n.threshold,
                        left: index(n.left, "left child")?,
                        right: index(n.right, "right child")?,
                        samples: n.samples,
                    })
                }
            })
            .collect::<Result<Vec<Node>>>()?;
        let tree = Tree::from_parts(nodes, r.n_features);
        tree.validate().map_err(Error::ModelValidation)?;
        Ok(tree)
    }
}

fn trees_from(reprs: Vec<TreeRepr>) -> Result<Vec<Tree>> {
    reprs.into_iter().map(Tree::try_from).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForestRepr {
    n_estimators: usize,
    bootstrap: bool,
    tree_seeds: Vec<u64>,
    config: TreeConfig,
    trees: Vec<TreeRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdaBoostRepr {
    alphas: Vec<f64>,
    stumps: Vec<TreeRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GbmRepr {
    base_log_odds: f64,
    learning_rate: f64,
    n_stages: usize,
    stages: Vec<TreeRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRepr {
    rows: usize,
    cols: usize,
    activation: Activation,
    /// `rows` arrays of `cols` weights each.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRepr {
    layers: Vec<LayerRepr>,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::ModelValidation(e.to_string()))
}

fn payload_to_value(params: &ModelParams) -> Result<Value> {
    match params {
        ModelParams::Knn(m) => to_value(m),
        ModelParams::GaussianNb(m) => to_value(m),
        ModelParams::LinearSvm(m) => to_value(m),
        ModelParams::DecisionTree(t) => to_value(&TreeRepr::from(t)),
        ModelParams::Forest(f) => to_value(&ForestRepr {
            n_estimators: f.n_estimators,
            bootstrap: f.bootstrap,
            tree_seeds: f.tree_seeds.clone(),
            config: f.config,
            trees: f.trees.iter().map(TreeRepr::from).collect(),
        }),
        ModelParams::Adaboost(m) => to_value(&AdaBoostRepr {
            alphas: m.alphas.clone(),
            stumps: m.stumps.iter().map(TreeRepr::from).collect(),
        }),
        ModelParams::GradientBoosting(m) => to_value(&GbmRepr {
            base_log_odds: m.base_log_odds,
            learning_rate: m.learning_rate,
            n_stages: m.stages.len(),
            stages: m.stages.iter().map(TreeRepr::from).collect(),
        }),
        ModelParams::Dnn(net) => to_value(&NetworkRepr {
            layers: net
                .layers
                .iter()
                .map(|l| LayerRepr {
                    rows: l.inputs,
                    cols: l.outputs,
                    activation: l.activation,
                    weights: l.weights.chunks(l.outputs).map(<[f64]>::to_vec).collect(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }),
    }
}

fn payload_from_value(model_type: ModelType, payload: Value) -> Result<ModelParams> {
    fn parse<T: for<'de> Deserialize<'de>>(model_type: ModelType, v: Value) -> Result<T> {
        serde_json::from_value(v)
            .map_err(|e| Error::ModelValidation(format!("payload does not match model_type {model_type}: {e}")))
    }
    let forest = |kind: ForestKind, v: Value| -> Result<ModelParams> {
        let r: ForestRepr = parse(model_type, v)?;
        Ok(ModelParams::Forest(ForestModel {
            kind,
            trees: trees_from(r.trees)?,
            n_estimators: r.n_estimators,
            tree_seeds: r.tree_seeds,
            bootstrap: r.bootstrap,
            config: r.config,
        }))
    };
    Ok(match model_type {
        ModelType::Knn => ModelParams::Knn(parse::<KnnModel>(model_type, payload)?),
        ModelType::GaussianNb => ModelParams::GaussianNb(parse::<GaussianNbModel>(model_type, payload)?),
        ModelType::LinearSvm => ModelParams::LinearSvm(parse::<LinearSvmModel>(model_type, payload)?),
        ModelType::DecisionTree => {
            ModelParams::DecisionTree(Tree::try_from(parse::<TreeRepr>(model_type, payload)?)?)
        }
        ModelType::RandomForest => forest(ForestKind::RandomForest, payload)?,
        ModelType::Bagging => forest(ForestKind::Bagging, payload)?,
        ModelType::ExtraTrees => forest(ForestKind::ExtraTrees, payload)?,
        ModelType::Adaboost => {
            let r: AdaBoostRepr = parse(model_type, payload)?;
            ModelParams::Adaboost(AdaBoostModel {
                stumps: trees_from(r.stumps)?,
                alphas: r.alphas,
            })
        }
        ModelType::GradientBoosting => {
            let r: GbmRepr = parse(model_type, payload)?;
            if r.n_stages != r.stages.len() {
                return Err(Error::ModelValidation("n_stages does not match the stage list".into()));
            }
            ModelParams::GradientBoosting(GbmModel {
                base_log_odds: r.base_log_odds,
                learning_rate: r.learning_rate,
                stages: trees_from(r.stages)?,
            })
        }
        ModelType::Dnn => {
            let r: NetworkRepr = parse(model_type, payload)?;
            let layers = r
                .layers
                .into_iter()
                .map(|l| {
                    if l.weights.len() != l.rows || l.weights.iter().any(|row| row.len() != l.cols) {
                        return Err(Error::ModelValidation(format!(
                            "layer weights are not {}x{}",
                            l.rows, l.cols
                        )));
                    }
                    Ok(DenseLayer {
                        inputs: l.rows,
                        outputs: l.cols,
                        weights: l.weights.concat(),
                        bias: l.bias,
                        activation: l.activation,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ModelParams::Dnn(Network { layers })
        }
    })
}
