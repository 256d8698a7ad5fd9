//! Model checkpoints: a JSON document whose parameter blocks are base64
//! encoded little-endian `f64` arrays, so values round-trip bit-exactly.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, Model, NetError, TrainConfig};

pub const CHECKPOINT_FORMAT: &str = "rank-odo-model/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    weights: String,
    biases: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    dof_index: usize,
    config: Option<TrainConfig>,
    encoder: Vec<LayerRecord>,
    decoder: Vec<LayerRecord>,
}

/// A loaded checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub config: Option<TrainConfig>,
}

fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode(text: &str, expected: usize, what: &str) -> Result<Vec<f64>, NetError> {
    let bytes = B64.decode(text).map_err(|e| NetError::Checkpoint(format!("{what}: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(NetError::Checkpoint(format!("{what}: expected {expected} values, found {} bytes", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn record(layer: &DenseLayer) -> LayerRecord {
    LayerRecord {
        inputs: layer.inputs,
        outputs: layer.outputs,
        activation: layer.activation,
        weights: encode(&layer.weights),
        biases: encode(&layer.biases),
    }
}

fn layer(rec: &LayerRecord, what: &str) -> Result<DenseLayer, NetError> {
    let n =
        rec.inputs.checked_mul(rec.outputs).ok_or_else(|| NetError::Checkpoint(format!("{what}: layer too large")))?;
    Ok(DenseLayer {
        inputs: rec.inputs,
        outputs: rec.outputs,
        activation: rec.activation,
        weights: decode(&rec.weights, n, &format!("{what} weights"))?,
        biases: decode(&rec.biases, rec.outputs, &format!("{what} biases"))?,
    })
}

pub fn save_checkpoint(model: &Model, config: Option<&TrainConfig>) -> String {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        dof_index: model.dof_index(),
        config: config.cloned(),
        encoder: model.encoder().iter().map(record).collect(),
        decoder: model.decoder().iter().map(record).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
    s.push('\n');
    s
}

pub fn load_checkpoint(text: &str) -> Result<Checkpoint, NetError> {
    let file: CheckpointFile = serde_json::from_str(text).map_err(|e| NetError::Checkpoint(e.to_string()))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(NetError::Checkpoint(format!(
            "unsupported format `{}` (expected `{CHECKPOINT_FORMAT}`)",
            file.format
        )));
    }
    let encoder = file
        .encoder
        .iter()
        .enumerate()
        .map(|(i, r)| layer(r, &format!("encoder layer {i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let decoder = file
        .decoder
        .iter()
        .enumerate()
        .map(|(i, r)| layer(r, &format!("decoder layer {i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let model = Model::new(encoder, decoder, file.dof_index)?;
    Ok(Checkpoint { model, config: file.config })
}
