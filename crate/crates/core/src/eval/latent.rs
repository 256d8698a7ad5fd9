//! Latent-space dumps and prediction/state rank alignment.

use super::corr::{kendall, spearman, Coefficient};
use super::EvalError;
use crate::net::{decoder_forward, encoder_forward, Model};
use crate::synth::MotionSample;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentRow {
    pub feature: Vec<f64>,
    pub label: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatentDump {
    pub rows: Vec<LatentRow>,
}

impl LatentDump {
    pub fn labels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.prediction).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.feature.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub r_s: Coefficient,
    pub r_k: Coefficient,
    pub n: usize,
}

/// Feature, label (state component of the model's DoF) and prediction for
/// every sample's clean flow.
pub fn latent_dump(model: &Model, dataset: &[MotionSample]) -> Result<LatentDump, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::TooFewSamples { needed: 1, got: 0 });
    }
    let rows = dataset
        .iter()
        .map(|s| {
            let (feature, _) = encoder_forward(model, &s.flow)?;
            let (prediction, _) = decoder_forward(model, &feature)?;
            Ok(LatentRow { feature, label: s.state.component(model.dof_index()), prediction })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(LatentDump { rows })
}

/// Rank correlation between predictions and labels.
pub fn ranking_alignment(dump: &LatentDump) -> Result<CorrelationReport, EvalError> {
    let (p, l) = (dump.predictions(), dump.labels());
    Ok(CorrelationReport { r_s: spearman(&p, &l)?, r_k: kendall(&p, &l)?, n: p.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{infer, Architecture};
    use crate::pose::EulerPose6D;
    use crate::synth::{generate_flow, SceneConfig};

    fn data() -> Vec<MotionSample> {
        let scene = SceneConfig { width: 4, height: 3, cx: 2.0, cy: 1.0, ..Default::default() };
        (0..5)
            .map(|k| {
                let state = EulerPose6D { z: 0.2 * k as f64, ..Default::default() };
                MotionSample { state, flow: generate_flow(&state, &scene).unwrap(), augmented_flow: None }
            })
            .collect()
    }

    fn arch() -> Architecture {
        Architecture { input_dim: 24, encoder_hidden: vec![6], feature_dim: 3, decoder_hidden: 4 }
    }

    #[test]
    fn zero_model_dump() {
        let d = latent_dump(&Model::zeros(&arch(), 2).unwrap(), &data()).unwrap();
        assert_eq!(d.rows.len(), 5);
        assert!(d.rows.iter().all(|r| r.prediction == 0.0 && r.feature.iter().all(|&f| f == 0.0)));
        assert_eq!(d.labels()[1], 0.2);
        let rep = ranking_alignment(&d).unwrap();
        assert!(rep.r_s.constant_input && rep.r_k.constant_input);
    }

    #[test]
    fn dump_predictions_equal_inference() {
        let model = Model::init(&arch(), 2, 4).unwrap();
        let ds = data();
        let d = latent_dump(&model, &ds).unwrap();
        for (row, s) in d.rows.iter().zip(&ds) {
            assert_eq!(row.prediction, infer(&model, &s.flow).unwrap());
        }
        assert!(latent_dump(&model, &[]).is_err());
    }

    #[test]
    fn alignment_extremes() {
        let rows = |sign: f64| LatentDump {
            rows: (0..6).map(|k| LatentRow { feature: vec![], label: k as f64, prediction: sign * k as f64 }).collect(),
        };
        let up = ranking_alignment(&rows(1.0)).unwrap();
        assert!((up.r_s.value - 1.0).abs() < 1e-15 && up.r_k.value == 1.0 && up.n == 6);
        let down = ranking_alignment(&rows(-1.0)).unwrap();
        assert!((down.r_s.value + 1.0).abs() < 1e-15 && down.r_k.value == -1.0);
    }
}
