//! Dense feed-forward network for binary classification: forward pass,
//! binary cross-entropy, backpropagation and plain minibatch SGD.
//!
//! Layer weights are stored row-major with shape `(inputs, outputs)`, so a
//! batch is propagated as `activation(X · W + b)`.

mod sweep;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, SplitMix64};

pub use sweep::{epoch_sweep, sweep_to_csv, SweepRow, DEFAULT_SWEEP_EPOCHS};

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => crate::tree::open_sigmoid(z),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Default for NetworkSpec {
    /// 13 inputs, hidden layers of 8 and 5 relu units, one sigmoid output.
    fn default() -> Self {
        Self {
            layer_sizes: vec![crate::data::N_FEATURES, 8, 5, 1],
            activations: vec![Activation::Relu, Activation::Relu, Activation::Sigmoid],
        }
    }
}

impl NetworkSpec {
    /// `hidden` relu layers between `inputs` and a single sigmoid output.
    pub fn with_hidden(inputs: usize, hidden: &[usize]) -> Self {
        let mut layer_sizes = vec![inputs];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);
        let mut activations = vec![Activation::Relu; hidden.len()];
        activations.push(Activation::Sigmoid);
        Self {
            layer_sizes,
            activations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::invalid("a network needs at least an input and an output layer"));
        }
        if self.activations.len() != self.layer_sizes.len() - 1 {
            return Err(Error::invalid("one activation per non-input layer is required"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        if self.layer_sizes.last() != Some(&1) || self.activations.last() != Some(&Activation::Sigmoid) {
            return Err(Error::invalid("the output layer must be a single sigmoid unit"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `inputs × outputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn weight(&self, i: usize, o: usize) -> f64 {
        self.weights[i * self.outputs + o]
    }

    fn forward(&self, input: &Matrix) -> (Matrix, Matrix) {
        let mut pre = Matrix::zeros(input.n_rows(), self.outputs);
        for r in 0..input.n_rows() {
            let x = input.row(r);
            let z = pre.row_mut(r);
            z.copy_from_slice(&self.bias);
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let w = &self.weights[i * self.outputs..(i + 1) * self.outputs];
                for (zo, &wo) in z.iter_mut().zip(w) {
                    *zo += xi * wo;
                }
            }
        }
        let mut out = pre.clone();
        for r in 0..out.n_rows() {
            for v in out.row_mut(r) {
                *v = self.activation.apply(*v);
            }
        }
        (pre, out)
    }
}

/// Weights and biases of every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

/// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn build_network(spec: &NetworkSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    let mut rng = SplitMix64::new(seed);
    let layers = spec
        .layer_sizes
        .windows(2)
        .zip(&spec.activations)
        .map(|(io, &activation)| {
            let (inputs, outputs) = (io[0], io[1]);
            let bound = glorot_bound(inputs, outputs);
            let weights = (0..inputs * outputs)
                .map(|_| (2.0 * rng.next_f64() - 1.0) * bound)
                .collect();
            DenseLayer {
                inputs,
                outputs,
                weights,
                bias: vec![0.0; outputs],
                activation,
            }
        })
        .collect();
    Ok(Network { layers })
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Layer-by-layer cache from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `activations[0]` is the input; `activations[k]` the output of layer `k-1`.
    pub activations: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
}

impl ForwardPass {
    pub fn output(&self) -> Vec<f64> {
        self.activations.last().map(|m| m.column(0).collect()).unwrap_or_default()
    }
}

impl Network {
    pub fn n_inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn spec(&self) -> NetworkSpec {
        let mut layer_sizes = vec![self.n_inputs()];
        layer_sizes.extend(self.layers.iter().map(|l| l.outputs));
        NetworkSpec {
            layer_sizes,
            activations: self.layers.iter().map(|l| l.activation).collect(),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardPass> {
        x.expect_cols(self.n_inputs())?;
        let mut activations = vec![x.clone()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (pre, out) = layer.forward(activations.last().expect("input present"));
            pre_activations.push(pre);
            activations.push(out);
        }
        Ok(ForwardPass {
            activations,
            pre_activations,
        })
    }

    /// Output probabilities, one per row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.output())
    }

    /// Exact gradients of the mean BCE over the batch.
    pub fn backprop(&self, x: &Matrix, y: &[u8]) -> Result<Gradients> {
        if x.n_rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.n_rows(),
                found: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::invalid("backprop needs at least one row"));
        }
        let pass = self.forward(x)?;
        let batch = y.len() as f64;
        let out = pass.activations.last().expect("output present");

        // Sigmoid + BCE: dL/dz at the output is (p - y) / batch.
        let mut delta = Matrix::zeros(out.n_rows(), 1);
        for (r, &label) in y.iter().enumerate() {
            delta.set(r, 0, (out.get(r, 0) - f64::from(label)) / batch);
        }

        let mut grads: Vec<LayerGradient> = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &pass.activations[k];
            let mut d_weights = vec![0.0; layer.inputs * layer.outputs];
            let mut d_bias = vec![0.0; layer.outputs];
            for r in 0..input.n_rows() {
                let d = delta.row(r);
                for (b, &dv) in d_bias.iter_mut().zip(d) {
                    *b += dv;
                }
                for (i, &xi) in input.row(r).iter().enumerate() {
                    let row = &mut d_weights[i * layer.outputs..(i + 1) * layer.outputs];
                    for (g, &dv) in row.iter_mut().zip(d) {
                        *g += xi * dv;
                    }
                }
            }
            if k > 0 {
                let below = &self.layers[k - 1];
                let pre = &pass.pre_activations[k - 1];
                let mut next = Matrix::zeros(input.n_rows(), layer.inputs);
                for r in 0..input.n_rows() {
                    let d = delta.row(r);
                    for i in 0..layer.inputs {
                        let back: f64 = (0..layer.outputs).map(|o| layer.weight(i, o) * d[o]).sum();
                        let z = pre.get(r, i);
                        let slope = match below.activation {
                            Activation::Relu => f64::from(u8::from(z > 0.0)),
                            Activation::Sigmoid => {
                                let s = crate::tree::open_sigmoid(z);
                                s * (1.0 - s)
                            }
                        };
                        next.set(r, i, back * slope);
                    }
                }
                delta = next;
            }
            grads.push(LayerGradient {
                weights: d_weights,
                bias: d_bias,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// `w ← w − lr · g` for every parameter.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, d) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= learning_rate * d;
            }
            for (b, d) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= learning_rate * d;
            }
        }
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        self.spec().validate().map_err(|e| e.to_string())?;
        for (k, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(format!("layer {k} parameter shapes do not match {}x{}", l.inputs, l.outputs));
            }
            if k > 0 && self.layers[k - 1].outputs != l.inputs {
                return Err(format!("layer {k} input size does not match the previous layer"));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(format!("layer {k} has non-finite parameters"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients with the same shapes as [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

/// Mean binary cross-entropy with probabilities clamped to
/// `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn bce_loss(probs: &[f64], y: &[u8]) -> Result<f64> {
    if probs.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: probs.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::invalid("loss of an empty batch"));
    }
    let total: f64 = probs
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if t == 1 { -p.ln() } else { -(1.0 - p).ln() }
        })
        .sum();
    Ok(total / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 350,
            batch_size: 8,
            learning_rate: 0.01,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainHistory {
    /// Mean BCE over the training set after each epoch.
    pub loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Option<f64>,
}

pub(crate) fn labels_from(probs: &[f64]) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

fn accuracy_of(net: &Network, x: &Matrix, y: &[u8]) -> Result<(f64, f64)> {
    let p = net.predict_proba(x)?;
    let hits = labels_from(&p).iter().zip(y).filter(|(a, b)| a == b).count();
    Ok((bce_loss(&p, y)?, hits as f64 / y.len() as f64))
}

/// Minibatch SGD with a seeded reshuffle every epoch.
pub fn train_sgd(
    net: &Network,
    x: &Matrix,
    y: &[u8],
    config: &TrainConfig,
    test: Option<(&Matrix, &[u8])>,
) -> Result<(Network, TrainHistory)> {
    let mut rng = SplitMix64::new(derive_seed(config.seed, 0x5a17));
    let n = x.n_rows();
    let mut order: Vec<usize> = (0..n).collect();
    let shuffle = config.shuffle;
    train_with_schedule(net, x, y, config, test, |_| {
        if shuffle {
            rng.shuffle(&mut order);
        }
        order.clone()
    })
}

/// Like [`train_sgd`] but the row order of each epoch comes from `schedule`.
pub fn train_with_schedule(
    net: &Network,
    x: &Matrix,
    y: &[u8],
    config: &TrainConfig,
    test: Option<(&Matrix, &[u8])>,
    mut schedule: impl FnMut(usize) -> Vec<usize>,
) -> Result<(Network, TrainHistory)> {
    config.validate()?;
    x.expect_cols(net.n_inputs())?;
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::invalid("cannot train on zero rows"));
    }
    let mut net = net.clone();
    let mut history = TrainHistory::default();
    for epoch in 0..config.epochs {
        let order = schedule(epoch);
        if order.len() != y.len() || order.iter().any(|&i| i >= y.len()) {
            return Err(Error::invalid("epoch schedule must list every row index"));
        }
        for chunk in order.chunks(config.batch_size) {
            let bx = x.select_rows(chunk);
            let by: Vec<u8> = chunk.iter().map(|&i| y[i]).collect();
            let grads = net.backprop(&bx, &by)?;
            net.apply_gradients(&grads, config.learning_rate);
        }
        let (loss, acc) = accuracy_of(&net, x, y)?;
        history.loss.push(loss);
        history.train_accuracy.push(acc);
    }
    if let Some((tx, ty)) = test {
        history.test_accuracy = Some(accuracy_of(&net, tx, ty)?.1);
    }
    Ok((net, history))
}
