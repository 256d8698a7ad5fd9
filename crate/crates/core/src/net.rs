//! Small dense networks with hand-written backpropagation.
//!
//! A [`Model`] is one encoder (flattened flow → feature vector) followed by
//! a three-layer decoder (feature → scalar state). Parameters are exposed as
//! one flat vector (layer by layer, weights then biases, encoder first) so
//! the optimizer and gradient checks can treat them uniformly.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::EulerPose6D;
use crate::rank::RankError;
use crate::rng::rng_from_seed;
use crate::synth::FlowField;

pub mod adam;
pub mod checkpoint;
pub mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT};
pub use train::{train_dof, train_dof_from, TrainConfig, TrainReport, GRAD_CLIP_NORM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {value} at step {step}")]
    NonFiniteLoss { step: usize, value: f64 },
    #[error("non-finite prediction for {dof}")]
    NonFinitePrediction { dof: &'static str },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Rank(#[from] RankError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative; ReLU's derivative at exactly 0 is 0.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// `y = act(W x + b)` with `W` stored row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], biases: vec![0.0; outputs], activation }
    }

    /// He-uniform for ReLU layers, Xavier-uniform otherwise; zero biases.
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut crate::rng::Rng) -> Self {
        let limit = match activation {
            Activation::Relu => (6.0 / inputs as f64).sqrt(),
            Activation::Identity => (6.0 / (inputs + outputs) as f64).sqrt(),
        };
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Self { inputs, outputs, weights, biases: vec![0.0; outputs], activation }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn check(&self) -> Result<(), NetError> {
        if self.inputs == 0 || self.outputs == 0 {
            return Err(NetError::ShapeMismatch("layer with zero width".into()));
        }
        if self.weights.len() != self.inputs * self.outputs || self.biases.len() != self.outputs {
            return Err(NetError::ShapeMismatch(format!(
                "layer {}x{} has {} weights and {} biases",
                self.outputs,
                self.inputs,
                self.weights.len(),
                self.biases.len()
            )));
        }
        if self.weights.iter().chain(&self.biases).any(|v| !v.is_finite()) {
            return Err(NetError::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Returns (pre-activation, output).
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(x.len(), self.inputs);
        let pre: Vec<f64> = self
            .weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        let out = pre.iter().map(|&z| self.activation.apply(z)).collect();
        (pre, out)
    }

    /// Accumulates `dW`, `db` into `grad` (weights then biases) and returns
    /// `dL/dx` when `want_input_grad`.
    fn backward(&self, cache: &LayerCache, d_out: &[f64], grad: &mut [f64], want_input_grad: bool) -> Vec<f64> {
        let (gw, gb) = grad.split_at_mut(self.weights.len());
        let mut d_in = if want_input_grad { vec![0.0; self.inputs] } else { Vec::new() };
        for o in 0..self.outputs {
            let dz = d_out[o] * self.activation.derivative(cache.pre[o]);
            if dz == 0.0 {
                continue;
            }
            gb[o] += dz;
            let row = o * self.inputs..(o + 1) * self.inputs;
            for (g, x) in gw[row.clone()].iter_mut().zip(&cache.input) {
                *g += dz * x;
            }
            if want_input_grad {
                for (d, w) in d_in.iter_mut().zip(&self.weights[row]) {
                    *d += dz * w;
                }
            }
        }
        d_in
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerCache {
    input: Vec<f64>,
    pre: Vec<f64>,
}

/// Intermediate values of one forward pass through a layer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
}

fn forward_stack(layers: &[DenseLayer], input: Vec<f64>) -> (Vec<f64>, ForwardCache) {
    let mut caches = Vec::with_capacity(layers.len());
    let mut x = input;
    for layer in layers {
        let (pre, out) = layer.forward(&x);
        caches.push(LayerCache { input: x, pre });
        x = out;
    }
    (x, ForwardCache { layers: caches })
}

/// Backprop through a stack; `grad` is the stack's slice of the flat gradient.
fn backward_stack(
    layers: &[DenseLayer],
    cache: &ForwardCache,
    d_out: Vec<f64>,
    grad: &mut [f64],
    want_input_grad: bool,
) -> Vec<f64> {
    let mut offsets = Vec::with_capacity(layers.len());
    let mut acc = 0;
    for l in layers {
        offsets.push(acc);
        acc += l.parameter_count();
    }
    let mut d = d_out;
    for (idx, layer) in layers.iter().enumerate().rev() {
        let slice = &mut grad[offsets[idx]..offsets[idx] + layer.parameter_count()];
        d = layer.backward(&cache.layers[idx], &d, slice, idx > 0 || want_input_grad);
    }
    d
}

/// `(inputs, outputs, activation)` of one dense layer.
type LayerShape = (usize, usize, Activation);

/// Layer widths of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub feature_dim: usize,
    pub decoder_hidden: usize,
}

impl Architecture {
    fn layer_shapes(&self) -> (Vec<LayerShape>, Vec<LayerShape>) {
        let mut enc = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.encoder_hidden {
            enc.push((prev, h, Activation::Relu));
            prev = h;
        }
        enc.push((prev, self.feature_dim, Activation::Identity));
        let h = self.decoder_hidden;
        let dec = vec![(self.feature_dim, h, Activation::Relu), (h, h, Activation::Relu), (h, 1, Activation::Identity)];
        (enc, dec)
    }
}

/// Encoder plus three-layer decoder for one degree of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    encoder: Vec<DenseLayer>,
    decoder: Vec<DenseLayer>,
    dof_index: usize,
}

impl Model {
    pub fn new(encoder: Vec<DenseLayer>, decoder: Vec<DenseLayer>, dof_index: usize) -> Result<Self, NetError> {
        if dof_index >= 6 {
            return Err(NetError::InvalidConfig(format!("dof_index {dof_index} not in 0..6")));
        }
        if encoder.is_empty() {
            return Err(NetError::ShapeMismatch("encoder needs at least one layer".into()));
        }
        if decoder.len() != 3 {
            return Err(NetError::ShapeMismatch(format!("decoder must have 3 layers, got {}", decoder.len())));
        }
        for layer in encoder.iter().chain(&decoder) {
            layer.check()?;
        }
        let chain = encoder.iter().chain(&decoder).collect::<Vec<_>>();
        for w in chain.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(NetError::ShapeMismatch(format!(
                    "layer output {} feeds layer input {}",
                    w[0].outputs, w[1].inputs
                )));
            }
        }
        let last = decoder.last().unwrap();
        if last.outputs != 1 || last.activation != Activation::Identity {
            return Err(NetError::ShapeMismatch("decoder must end in a single identity unit".into()));
        }
        Ok(Self { encoder, decoder, dof_index })
    }

    pub fn init(arch: &Architecture, dof_index: usize, seed: u64) -> Result<Self, NetError> {
        let mut rng = rng_from_seed(seed);
        let (enc, dec) = arch.layer_shapes();
        let build = |shapes: Vec<(usize, usize, Activation)>, rng: &mut crate::rng::Rng| {
            shapes.into_iter().map(|(i, o, a)| DenseLayer::init(i, o, a, rng)).collect::<Vec<_>>()
        };
        let encoder = build(enc, &mut rng);
        let decoder = build(dec, &mut rng);
        Self::new(encoder, decoder, dof_index)
    }

    /// All-zero parameters: every input maps to a zero feature and a zero prediction.
    pub fn zeros(arch: &Architecture, dof_index: usize) -> Result<Self, NetError> {
        let (enc, dec) = arch.layer_shapes();
        let build = |shapes: Vec<(usize, usize, Activation)>| {
            shapes.into_iter().map(|(i, o, a)| DenseLayer::zeros(i, o, a)).collect::<Vec<_>>()
        };
        Self::new(build(enc), build(dec), dof_index)
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[DenseLayer] {
        &self.decoder
    }

    pub fn decoder_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.decoder
    }

    pub fn dof_index(&self) -> usize {
        self.dof_index
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs
    }

    pub fn feature_dim(&self) -> usize {
        self.decoder[0].inputs
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.input_dim(),
            encoder_hidden: self.encoder[..self.encoder.len() - 1].iter().map(|l| l.outputs).collect(),
            feature_dim: self.feature_dim(),
            decoder_hidden: self.decoder[0].outputs,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(DenseLayer::parameter_count).sum()
    }

    fn encoder_parameter_count(&self) -> usize {
        self.encoder.iter().map(DenseLayer::parameter_count).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder.iter().chain(&self.decoder)
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in self.layers() {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<(), NetError> {
        if params.len() != self.parameter_count() {
            return Err(NetError::ShapeMismatch(format!(
                "{} parameters given, model has {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let mut at = 0;
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }
}

/// Cached forward pass of one sample through encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCache {
    pub encoder: ForwardCache,
    pub decoder: ForwardCache,
}

pub fn encoder_forward_raw(model: &Model, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), NetError> {
    if input.len() != model.input_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "input has {} values, encoder expects {}",
            input.len(),
            model.input_dim()
        )));
    }
    Ok(forward_stack(&model.encoder, input.to_vec()))
}

/// Feature vector for a flow field.
pub fn encoder_forward(model: &Model, flow: &FlowField) -> Result<(Vec<f64>, ForwardCache), NetError> {
    let input: Vec<f64> = flow.data().iter().map(|&v| v as f64).collect();
    encoder_forward_raw(model, &input).map_err(|e| match e {
        NetError::ShapeMismatch(_) => NetError::ShapeMismatch(format!(
            "{}x{} flow has {} values, encoder expects {}",
            flow.width(),
            flow.height(),
            input.len(),
            model.input_dim()
        )),
        other => other,
    })
}

pub fn decoder_forward(model: &Model, feature: &[f64]) -> Result<(f64, ForwardCache), NetError> {
    if feature.len() != model.feature_dim() {
        return Err(NetError::ShapeMismatch(format!(
            "feature has {} values, decoder expects {}",
            feature.len(),
            model.feature_dim()
        )));
    }
    let (out, cache) = forward_stack(&model.decoder, feature.to_vec());
    Ok((out[0], cache))
}

/// Full forward pass keeping everything [`backward`] needs.
pub fn forward_sample(model: &Model, flow: &FlowField) -> Result<(Vec<f64>, f64, SampleCache), NetError> {
    let (feature, encoder) = encoder_forward(model, flow)?;
    let (prediction, decoder) = decoder_forward(model, &feature)?;
    Ok((feature, prediction, SampleCache { encoder, decoder }))
}

/// Gradient of `sum_s <d_features[s], feature_s> + d_predictions[s] * prediction_s`
/// w.r.t. every parameter, in [`Model::parameters`] order. `d_features` is
/// row-major `samples × feature_dim`.
pub fn backward(
    model: &Model,
    caches: &[SampleCache],
    d_features: &[f64],
    d_predictions: &[f64],
) -> Result<Vec<f64>, NetError> {
    let dim = model.feature_dim();
    if d_features.len() != caches.len() * dim || d_predictions.len() != caches.len() {
        return Err(NetError::ShapeMismatch(format!(
            "{} caches, {} feature gradients (dim {dim}), {} prediction gradients",
            caches.len(),
            d_features.len(),
            d_predictions.len()
        )));
    }
    let mut grad = vec![0.0; model.parameter_count()];
    let (enc_grad, dec_grad) = grad.split_at_mut(model.encoder_parameter_count());
    for (s, cache) in caches.iter().enumerate() {
        if cache.encoder.layers.len() != model.encoder.len() || cache.decoder.layers.len() != model.decoder.len() {
            return Err(NetError::ShapeMismatch("cache does not match model depth".into()));
        }
        let mut d_feat = backward_stack(&model.decoder, &cache.decoder, vec![d_predictions[s]], dec_grad, true);
        for (d, up) in d_feat.iter_mut().zip(&d_features[s * dim..(s + 1) * dim]) {
            *d += up;
        }
        backward_stack(&model.encoder, &cache.encoder, d_feat, enc_grad, false);
    }
    Ok(grad)
}

/// Decoder output for one flow field.
pub fn infer(model: &Model, flow: &FlowField) -> Result<f64, NetError> {
    let (feature, _) = encoder_forward(model, flow)?;
    decoder_forward(model, &feature).map(|(p, _)| p)
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Assembles the six per-DoF predictions into a pose. `models[d]` predicts
/// component `d`; angles are wrapped into (-pi, pi].
pub fn infer_all(models: &[Model], flow: &FlowField) -> Result<EulerPose6D, NetError> {
    if models.len() != 6 {
        return Err(NetError::ShapeMismatch(format!("need 6 models, got {}", models.len())));
    }
    let mut v = [0.0; 6];
    for (d, model) in models.iter().enumerate() {
        let p = infer(model, flow)?;
        if !p.is_finite() {
            return Err(NetError::NonFinitePrediction { dof: EulerPose6D::DOF_NAMES[d] });
        }
        v[d] = if d >= 3 { wrap_angle(p) } else { p };
    }
    EulerPose6D::from_array(v).map_err(|e| NetError::ShapeMismatch(e.to_string()))
}
