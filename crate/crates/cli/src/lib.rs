//! Config-driven runner for ranking-based odometry experiments: dataset
//! generation, per-DoF training, evaluation, latent export and the
//! training-set scale sweep.
//!
//! Every command is a pure function of the config and its input files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rank_odo_core::eval::EvalError;
use rank_odo_core::net::NetError;
use rank_odo_core::pose::EulerPose6D;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod dataset;
mod report;

pub use commands::{cmd_eval, cmd_gen, cmd_latent, cmd_scale_sweep, cmd_train, EvalSummary, SweepRow, TrainedDof};
pub use config::{RunConfig, CONFIG_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Data { path: PathBuf, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn data(path: &Path, message: impl fmt::Display) -> Self {
        CliError::Data { path: path.to_path_buf(), message: message.to_string() }
    }

    /// 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::NonFiniteLoss { .. } | NetError::NonFinitePrediction { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Net(n) => n.into(),
            EvalError::NonFinite => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// The `--dof` argument: one DoF (index or name) or all six.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofSelection {
    One(usize),
    All,
}

impl DofSelection {
    pub fn indices(self) -> Vec<usize> {
        match self {
            DofSelection::One(d) => vec![d],
            DofSelection::All => (0..6).collect(),
        }
    }
}

impl FromStr for DofSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(DofSelection::All);
        }
        if let Some(d) = EulerPose6D::DOF_NAMES.iter().position(|n| *n == s) {
            return Ok(DofSelection::One(d));
        }
        match s.parse::<usize>() {
            Ok(d) if d < 6 => Ok(DofSelection::One(d)),
            _ => Err(format!("expected 0-5, a DoF name (x, y, z, roll, pitch, yaw) or `all`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gen,
    Train,
    Eval,
    Latent,
    ScaleSweep,
}

/// Loads the config, applies `--out` to the command's output directory and
/// runs the command.
pub fn run(
    command: Command,
    config_path: &Path,
    dof: Option<DofSelection>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(out) = out {
        match command {
            Command::Gen => cfg.paths.dataset_dir = out,
            Command::Train => cfg.paths.checkpoint_dir = out,
            Command::Eval | Command::Latent | Command::ScaleSweep => cfg.paths.report_dir = out,
        }
    }
    let dofs = dof.map(DofSelection::indices);
    match command {
        Command::Gen => {
            let (train, test) = cmd_gen(&cfg)?;
            log::info!("wrote {train} training and {test} test samples to {}", cfg.paths.dataset_dir.display());
        }
        Command::Train => {
            for t in cmd_train(&cfg, &dofs.unwrap_or_else(|| vec![cfg.train.dof_index]))? {
                let first = t.loss_trace.first().copied().unwrap_or(0.0);
                let last = t.loss_trace.last().copied().unwrap_or(0.0);
                log::info!(
                    "{}: {} steps, loss {first:.4} -> {last:.4}",
                    EulerPose6D::DOF_NAMES[t.dof],
                    t.loss_trace.len()
                );
            }
        }
        Command::Eval => {
            let s = cmd_eval(&cfg, dofs.as_deref())?;
            for (dof, c) in &s.correlations {
                log::info!("{}: r_s {:.4}, r_k {:.4}", EulerPose6D::DOF_NAMES[*dof], c.r_s.value, c.r_k.value);
            }
            if s.drift.is_empty() {
                log::warn!("trajectory shorter than the shortest segment length; drift is undefined");
            } else {
                log::info!(
                    "t_rel {:.4} %, r_rel {:.4} deg/100m over {} segments",
                    s.drift.t_rel,
                    s.drift.r_rel,
                    s.drift.segments
                );
            }
        }
        Command::Latent => {
            let written = cmd_latent(&cfg, dofs.as_deref())?;
            log::info!("wrote {} latent dumps", written.len());
        }
        Command::ScaleSweep => {
            for r in cmd_scale_sweep(&cfg, &dofs.unwrap_or_else(|| vec![cfg.train.dof_index]))? {
                log::info!(
                    "fraction {} ({} samples), {}: r_s {:.4}, t_rel {:.4}",
                    r.fraction,
                    r.n_train,
                    EulerPose6D::DOF_NAMES[r.dof],
                    r.r_s,
                    r.t_rel
                );
            }
        }
    }
    Ok(())
}
