//! Run configuration: one JSON document drives every command.

use std::path::{Path, PathBuf};

use rank_odo_core::eval::drift::{DEFAULT_LENGTHS, DEFAULT_STRIDE};
use rank_odo_core::eval::{Aggregation, DriftOptions};
use rank_odo_core::net::TrainConfig;
use rank_odo_core::synth::{SceneConfig, StateRanges};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub scene: SceneConfig,
    pub data: DataConfig,
    /// Shared by every DoF; `dof_index` is the DoF used when no `--dof`
    /// flag is given.
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Training samples.
    pub n: usize,
    /// Held-out test samples.
    pub test_n: usize,
    /// `[lo, hi]` per DoF in the order x, y, z, roll, pitch, yaw.
    pub state_ranges: StateRanges,
    /// Noise of the stored augmented observations, in pixels.
    pub sigma: f64,
    pub seed: u64,
}

/// Which stored observation of a test sample the models see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observation {
    /// The noisy copy, i.e. flow as a measurement would deliver it.
    #[default]
    Augmented,
    Clean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub lengths: Vec<f64>,
    pub stride: usize,
    pub aggregation: Aggregation,
    pub observation: Observation,
    /// With both pose files set, `eval` compares them directly instead of
    /// running the models.
    pub gt_poses: Option<PathBuf>,
    pub pred_poses: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            lengths: DEFAULT_LENGTHS.to_vec(),
            stride: DEFAULT_STRIDE,
            aggregation: Aggregation::Mean,
            observation: Observation::Augmented,
            gt_poses: None,
            pred_poses: None,
        }
    }
}

impl EvalConfig {
    pub fn drift_options(&self) -> DriftOptions {
        DriftOptions { lengths: self.lengths.clone(), stride: self.stride, aggregation: self.aggregation }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0] }
    }
}

/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub dataset_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

impl RunConfig {
    /// Parses and validates a config document. Errors name the offending
    /// field path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "config" } else { &path }, e.inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and makes its paths absolute relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.dataset_dir);
        fix(&mut self.paths.checkpoint_dir);
        fix(&mut self.paths.report_dir);
        if let Some(p) = self.eval.gt_poses.as_mut() {
            fix(p);
        }
        if let Some(p) = self.eval.pred_poses.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        self.scene.validate().map_err(|e| invalid("scene", e))?;
        let d = &self.data;
        if d.n == 0 {
            return Err(invalid("data.n", "must be >= 1"));
        }
        if d.test_n == 0 {
            return Err(invalid("data.test_n", "must be >= 1"));
        }
        if !(d.sigma >= 0.0 && d.sigma.is_finite()) {
            return Err(invalid("data.sigma", "must be finite and >= 0"));
        }
        for (k, [lo, hi]) in d.state_ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(invalid(&format!("data.state_ranges[{k}]"), "must be finite with lo <= hi"));
            }
            if k >= 3 && (lo.abs() > std::f64::consts::PI || hi.abs() > std::f64::consts::PI) {
                return Err(invalid(&format!("data.state_ranges[{k}]"), "angles must lie in [-pi, pi]"));
            }
        }
        self.train.validate().map_err(|e| invalid("train", e))?;
        if self.train.batch_n > d.n {
            return Err(invalid("train.batch_n", format!("exceeds data.n = {}", d.n)));
        }
        let e = &self.eval;
        if e.stride == 0 {
            return Err(invalid("eval.stride", "must be >= 1"));
        }
        if e.lengths.is_empty() || e.lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(invalid("eval.lengths", "must be a non-empty list of positive lengths"));
        }
        if e.gt_poses.is_some() != e.pred_poses.is_some() {
            return Err(invalid("eval", "gt_poses and pred_poses must be given together"));
        }
        for (k, f) in self.sweep.fractions.iter().enumerate() {
            if !(*f > 0.0 && *f <= 1.0) {
                return Err(invalid(&format!("sweep.fractions[{k}]"), "must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Checks that every sweep fraction selects at least one batch.
    pub fn validate_sweep(&self) -> Result<(), CliError> {
        if self.sweep.fractions.is_empty() {
            return Err(invalid("sweep.fractions", "must not be empty"));
        }
        for (k, f) in self.sweep.fractions.iter().enumerate() {
            if sweep_count(*f, self.data.n) < self.train.batch_n {
                return Err(invalid(
                    &format!("sweep.fractions[{k}]"),
                    format!("selects fewer than train.batch_n = {} samples", self.train.batch_n),
                ));
            }
        }
        Ok(())
    }
}

/// Number of training samples used at `fraction` of `n`.
pub fn sweep_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}
