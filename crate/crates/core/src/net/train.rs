//! Joint encoder/decoder training for one degree of freedom.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{adam_step, backward, forward_sample, AdamState, Architecture, Model, NetError};
use crate::rank::{suprnc_batch, LossHyper, RankingBatch};
use crate::rng::{derive_seed, rng_from_seed};
use crate::synth::{augment, MotionSample};

/// Gradients with a larger global L2 norm are rescaled to this norm.
pub const GRAD_CLIP_NORM: f64 = 10.0;

// sub-stream indices of the run seed
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_AUGMENT: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Anchors per batch (the batch holds twice as many samples).
    pub batch_n: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub tau: f64,
    pub lambda: f64,
    pub feature_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: usize,
    /// Standard deviation of the Gaussian augmentation, in pixels.
    pub sigma_noise: f64,
    pub seed: u64,
    pub dof_index: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_n: 16,
            epochs: 40,
            learning_rate: 1e-3,
            tau: 2.0,
            lambda: 2.0,
            feature_dim: 32,
            encoder_hidden: vec![64],
            decoder_hidden: 32,
            sigma_noise: 0.05,
            seed: 0,
            dof_index: 2,
        }
    }
}

impl TrainConfig {
    pub fn hyper(&self) -> LossHyper {
        LossHyper { tau: self.tau, lambda: self.lambda }
    }

    pub fn architecture(&self, input_dim: usize) -> Architecture {
        Architecture {
            input_dim,
            encoder_hidden: self.encoder_hidden.clone(),
            feature_dim: self.feature_dim,
            decoder_hidden: self.decoder_hidden,
        }
    }

    /// Seed used for parameter initialization.
    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, STREAM_INIT)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.to_string()));
        if self.batch_n == 0 {
            return bad("batch_n must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.feature_dim == 0 || self.decoder_hidden == 0 || self.encoder_hidden.contains(&0) {
            return bad("layer widths must be >= 1");
        }
        if !(self.sigma_noise >= 0.0 && self.sigma_noise.is_finite()) {
            return bad("sigma_noise must be >= 0");
        }
        if self.dof_index >= 6 {
            return bad("dof_index must be in 0..6");
        }
        self.hyper().validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Batch loss before each update.
    pub loss_trace: Vec<f64>,
    pub model: Model,
    pub wall_seconds: f64,
}

/// Trains a freshly initialized model (seeded from `config.seed`).
pub fn train_dof(dataset: &[MotionSample], config: &TrainConfig) -> Result<TrainReport, NetError> {
    config.validate()?;
    let first = dataset.first().ok_or_else(|| NetError::InvalidConfig("dataset is empty".into()))?;
    let input_dim = first.flow.data().len();
    let model = Model::init(&config.architecture(input_dim), config.dof_index, config.init_seed())?;
    train_dof_from(model, dataset, config)
}

/// Trains `model` in place of a fresh initialization.
///
/// Each epoch visits a seeded shuffle of the dataset in `len / batch_n`
/// batches. Every anchor gets a fresh noise augmentation, both go through
/// the network, and the loss gradient flows into the encoder through the
/// features and into the decoder through the predictions.
pub fn train_dof_from(
    mut model: Model,
    dataset: &[MotionSample],
    config: &TrainConfig,
) -> Result<TrainReport, NetError> {
    config.validate()?;
    if dataset.len() < config.batch_n {
        return Err(NetError::InvalidConfig(format!(
            "dataset has {} samples, fewer than batch_n = {}",
            dataset.len(),
            config.batch_n
        )));
    }
    if model.dof_index() != config.dof_index {
        return Err(NetError::InvalidConfig("model and config disagree on dof_index".into()));
    }
    let start = Instant::now();
    let hyper = config.hyper();
    let dim = model.feature_dim();
    let steps_per_epoch = dataset.len() / config.batch_n;
    let mut shuffle_rng = rng_from_seed(derive_seed(config.seed, STREAM_SHUFFLE));
    let augment_seed = derive_seed(config.seed, STREAM_AUGMENT);

    let mut params = model.parameters();
    let mut adam = AdamState::new(params.len());
    let mut trace = Vec::with_capacity(steps_per_epoch * config.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let samples = 2 * config.batch_n;

    for _epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks_exact(config.batch_n).take(steps_per_epoch) {
            let step = trace.len();
            let mut features = Vec::with_capacity(samples * dim);
            let mut predictions = Vec::with_capacity(samples);
            let mut labels = Vec::with_capacity(samples);
            let mut caches = Vec::with_capacity(samples);
            for (slot, &idx) in chunk.iter().enumerate() {
                let sample = &dataset[idx];
                let label = sample.state.component(config.dof_index);
                let noise_seed = derive_seed(augment_seed, (step * config.batch_n + slot) as u64);
                let aug = augment(&sample.flow, config.sigma_noise, noise_seed);
                for flow in [&sample.flow, &aug] {
                    let (f, p, cache) = forward_sample(&model, flow)?;
                    features.extend_from_slice(&f);
                    predictions.push(p);
                    labels.push(label);
                    caches.push(cache);
                }
            }
            let loss_value;
            {
                let targets = labels.clone();
                let batch = match RankingBatch::new(features, dim, labels, predictions, targets) {
                    Ok(b) => b,
                    Err(_) => return Err(NetError::NonFiniteLoss { step, value: f64::NAN }),
                };
                let loss = suprnc_batch(&batch, &hyper)?;
                if !loss.value.is_finite() {
                    return Err(NetError::NonFiniteLoss { step, value: loss.value });
                }
                loss_value = loss.value;
                let mut grad = backward(&model, &caches, &loss.d_features, &loss.d_predictions)?;
                clip_global_norm(&mut grad, GRAD_CLIP_NORM);
                adam_step(&mut params, &grad, &mut adam, config.learning_rate, step as u64 + 1);
            }
            model.set_parameters(&params)?;
            trace.push(loss_value);
        }
    }
    Ok(TrainReport { loss_trace: trace, model, wall_seconds: start.elapsed().as_secs_f64() })
}

fn clip_global_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
}
