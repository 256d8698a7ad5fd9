//! The five commands. Each takes a validated, path-resolved config.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rank_odo_core::eval::{kitti_drift, latent_dump, ranking_alignment, CorrelationReport, DriftReport};
use rank_odo_core::net::{infer_all, load_checkpoint, save_checkpoint, train_dof, Model};
use rank_odo_core::pose::{accumulate, euler_to_transform, parse_kitti_poses, write_kitti_poses, Trajectory};
use rank_odo_core::rng::{derive_seed, rng_from_seed};
use rank_odo_core::synth::{sample_dataset, MotionSample};

use crate::config::{sweep_count, Observation, RunConfig};
use crate::dataset::{read_split, write_split, Split};
use crate::{report, CliError};

// sub-streams of data.seed
const STREAM_TRAIN: u64 = 0;
const STREAM_TEST: u64 = 1;
const STREAM_SWEEP: u64 = 2;

pub const CORRELATION_FILE: &str = "correlation.csv";
pub const DRIFT_FILE: &str = "drift.csv";
pub const GT_POSES_FILE: &str = "gt_poses.txt";
pub const PRED_POSES_FILE: &str = "pred_poses.txt";
pub const SWEEP_FILE: &str = "scale_sweep.csv";

pub fn checkpoint_path(dir: &Path, dof: usize) -> PathBuf {
    dir.join(format!("dof{dof}.json"))
}

pub fn loss_trace_path(dir: &Path, dof: usize) -> PathBuf {
    dir.join(format!("dof{dof}_loss.csv"))
}

pub fn latent_path(dir: &Path, dof: usize) -> PathBuf {
    dir.join(format!("latent_dof{dof}.csv"))
}

/// Writes the train and test splits; returns their sizes.
pub fn cmd_gen(cfg: &RunConfig) -> Result<(usize, usize), CliError> {
    let d = &cfg.data;
    let mut sizes = (0, 0);
    for (split, n, stream) in [(Split::Train, d.n, STREAM_TRAIN), (Split::Test, d.test_n, STREAM_TEST)] {
        let samples = sample_dataset(n, &d.state_ranges, &cfg.scene, d.sigma, derive_seed(d.seed, stream))
            .map_err(|e| CliError::Config(format!("data: {e}")))?;
        write_split(&split.dir(&cfg.paths.dataset_dir), &samples)?;
        match split {
            Split::Train => sizes.0 = samples.len(),
            Split::Test => sizes.1 = samples.len(),
        }
    }
    Ok(sizes)
}

#[derive(Debug, Clone)]
pub struct TrainedDof {
    pub dof: usize,
    pub loss_trace: Vec<f64>,
    pub model: Model,
}

fn train_one(cfg: &RunConfig, dataset: &[MotionSample], dof: usize) -> Result<TrainedDof, CliError> {
    let mut tc = cfg.train.clone();
    tc.dof_index = dof;
    let report = train_dof(dataset, &tc)?;
    Ok(TrainedDof { dof, loss_trace: report.loss_trace, model: report.model })
}

/// Trains one model per requested DoF on the training split and writes
/// `dof{d}.json` and `dof{d}_loss.csv` to the checkpoint directory.
pub fn cmd_train(cfg: &RunConfig, dofs: &[usize]) -> Result<Vec<TrainedDof>, CliError> {
    let train = read_split(&Split::Train.dir(&cfg.paths.dataset_dir), &cfg.scene)?;
    let dir = &cfg.paths.checkpoint_dir;
    let mut out = Vec::with_capacity(dofs.len());
    for &dof in dofs {
        log::info!("training dof {dof} on {} samples", train.len());
        let trained = train_one(cfg, &train, dof)?;
        let mut tc = cfg.train.clone();
        tc.dof_index = dof;
        report::write_text(&checkpoint_path(dir, dof), &save_checkpoint(&trained.model, Some(&tc)))?;
        report::loss_trace(&loss_trace_path(dir, dof), &trained.loss_trace)?;
        out.push(trained);
    }
    Ok(out)
}

/// Loads `dof{d}.json` for each requested DoF, or every checkpoint present
/// when `dofs` is `None`.
fn load_models(cfg: &RunConfig, dofs: Option<&[usize]>) -> Result<Vec<(usize, Model)>, CliError> {
    let dir = &cfg.paths.checkpoint_dir;
    let mut out = Vec::new();
    for dof in 0..6 {
        let path = checkpoint_path(dir, dof);
        let requested = dofs.is_some_and(|d| d.contains(&dof));
        if dofs.is_some() && !requested {
            continue;
        }
        if !requested && !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let ckpt = load_checkpoint(&text).map_err(|e| CliError::data(&path, e))?;
        if ckpt.model.dof_index() != dof {
            return Err(CliError::data(&path, format!("checkpoint is for dof {}", ckpt.model.dof_index())));
        }
        out.push((dof, ckpt.model));
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("no checkpoints found in {}", dir.display())));
    }
    Ok(out)
}

fn check_input_dims(cfg: &RunConfig, models: &[(usize, Model)], samples: &[MotionSample]) -> Result<(), CliError> {
    let inputs = samples[0].flow.data().len();
    for (dof, m) in models {
        if m.input_dim() != inputs {
            return Err(CliError::data(
                &checkpoint_path(&cfg.paths.checkpoint_dir, *dof),
                format!(
                    "model expects {} inputs but flows in {} have {inputs}",
                    m.input_dim(),
                    Split::Test.dir(&cfg.paths.dataset_dir).display()
                ),
            ));
        }
    }
    Ok(())
}

/// The test samples as the models see them: the chosen observation in
/// `flow`, no augmented copy.
fn observations(samples: &[MotionSample], which: Observation) -> Vec<MotionSample> {
    samples
        .iter()
        .map(|s| MotionSample {
            state: s.state,
            flow: match which {
                Observation::Augmented => s.augmented_flow.clone().unwrap_or_else(|| s.flow.clone()),
                Observation::Clean => s.flow.clone(),
            },
            augmented_flow: None,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub correlations: Vec<(usize, CorrelationReport)>,
    pub drift: DriftReport,
    pub gt: Option<Trajectory>,
    pub pred: Option<Trajectory>,
}

/// Correlations of every given model and drift of the trajectory assembled
/// from all six DoFs. DoFs without a model predict 0.
fn evaluate(cfg: &RunConfig, models: &[(usize, Model)], obs: &[MotionSample]) -> Result<EvalSummary, CliError> {
    let mut correlations = Vec::with_capacity(models.len());
    for (dof, m) in models {
        correlations.push((*dof, ranking_alignment(&latent_dump(m, obs)?)?));
    }
    let arch = models[0].1.architecture();
    let mut six = Vec::with_capacity(6);
    for d in 0..6 {
        match models.iter().find(|(dof, _)| *dof == d) {
            Some((_, m)) => six.push(m.clone()),
            None => six.push(Model::zeros(&arch, d)?),
        }
    }
    let mut pred_rel = Vec::with_capacity(obs.len());
    for s in obs {
        pred_rel.push(euler_to_transform(&infer_all(&six, &s.flow)?));
    }
    let gt_rel: Vec<_> = obs.iter().map(|s| euler_to_transform(&s.state)).collect();
    let (gt, pred) = (accumulate(&gt_rel), accumulate(&pred_rel));
    let drift = kitti_drift(&gt, &pred, &cfg.eval.drift_options())?;
    Ok(EvalSummary { correlations, drift, gt: Some(gt), pred: Some(pred) })
}

fn read_poses(path: &Path) -> Result<Trajectory, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_kitti_poses(&text).map_err(|e| CliError::data(path, e))
}

/// Evaluates checkpoints on the test split, writing `correlation.csv`,
/// `drift.csv` and both trajectories as KITTI pose files. With
/// `eval.gt_poses`/`eval.pred_poses` set, only compares those files.
pub fn cmd_eval(cfg: &RunConfig, dofs: Option<&[usize]>) -> Result<EvalSummary, CliError> {
    let out = &cfg.paths.report_dir;
    if let (Some(gt_path), Some(pred_path)) = (&cfg.eval.gt_poses, &cfg.eval.pred_poses) {
        let (gt, pred) = (read_poses(gt_path)?, read_poses(pred_path)?);
        if gt.len() != pred.len() {
            return Err(CliError::Usage(format!(
                "{} has {} poses but {} has {}",
                gt_path.display(),
                gt.len(),
                pred_path.display(),
                pred.len()
            )));
        }
        let drift = kitti_drift(&gt, &pred, &cfg.eval.drift_options())?;
        report::drift(&out.join(DRIFT_FILE), &drift)?;
        return Ok(EvalSummary { correlations: Vec::new(), drift, gt: None, pred: None });
    }

    let models = load_models(cfg, dofs)?;
    let test = read_split(&Split::Test.dir(&cfg.paths.dataset_dir), &cfg.scene)?;
    check_input_dims(cfg, &models, &test)?;
    let summary = evaluate(cfg, &models, &observations(&test, cfg.eval.observation))?;
    report::correlations(&out.join(CORRELATION_FILE), &summary.correlations)?;
    report::drift(&out.join(DRIFT_FILE), &summary.drift)?;
    if let (Some(gt), Some(pred)) = (&summary.gt, &summary.pred) {
        report::write_text(&out.join(GT_POSES_FILE), &write_kitti_poses(gt))?;
        report::write_text(&out.join(PRED_POSES_FILE), &write_kitti_poses(pred))?;
    }
    Ok(summary)
}

/// Writes `latent_dof{d}.csv` (features, label, prediction per test
/// sample) for each checkpoint; returns the files written.
pub fn cmd_latent(cfg: &RunConfig, dofs: Option<&[usize]>) -> Result<Vec<PathBuf>, CliError> {
    let models = load_models(cfg, dofs)?;
    let test = read_split(&Split::Test.dir(&cfg.paths.dataset_dir), &cfg.scene)?;
    check_input_dims(cfg, &models, &test)?;
    let obs = observations(&test, cfg.eval.observation);
    let mut written = Vec::with_capacity(models.len());
    for (dof, m) in &models {
        let path = latent_path(&cfg.paths.report_dir, *dof);
        report::latent(&path, &latent_dump(m, &obs)?)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fraction: f64,
    pub n_train: usize,
    pub dof: usize,
    pub r_s: f64,
    pub r_k: f64,
    pub t_rel: f64,
    pub r_rel: f64,
}

/// Training-set indices for each fraction: a prefix of one seeded
/// permutation, in ascending order, so the subsets are nested and the full
/// fraction is the whole training split in its original order.
pub fn sweep_subsets(cfg: &RunConfig) -> Vec<Vec<usize>> {
    let n = cfg.data.n;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(derive_seed(cfg.data.seed, STREAM_SWEEP)));
    cfg.sweep
        .fractions
        .iter()
        .map(|&f| {
            let mut idx = perm[..sweep_count(f, n)].to_vec();
            idx.sort_unstable();
            idx
        })
        .collect()
}

/// For every fraction and DoF, trains on the subset and evaluates that
/// model alone on the test split. Writes `scale_sweep.csv`.
pub fn cmd_scale_sweep(cfg: &RunConfig, dofs: &[usize]) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate_sweep()?;
    let train_dir = Split::Train.dir(&cfg.paths.dataset_dir);
    let train = read_split(&train_dir, &cfg.scene)?;
    if train.len() != cfg.data.n {
        return Err(CliError::data(&train_dir, format!("holds {} samples but data.n is {}", train.len(), cfg.data.n)));
    }
    let test = read_split(&Split::Test.dir(&cfg.paths.dataset_dir), &cfg.scene)?;
    let obs = observations(&test, cfg.eval.observation);
    let mut rows = Vec::new();
    for (&fraction, subset) in cfg.sweep.fractions.iter().zip(sweep_subsets(cfg)) {
        let data: Vec<MotionSample> = subset.iter().map(|&k| train[k].clone()).collect();
        for &dof in dofs {
            log::info!("sweep fraction {fraction}: training dof {dof} on {} samples", data.len());
            let trained = train_one(cfg, &data, dof)?;
            let summary = evaluate(cfg, &[(dof, trained.model)], &obs)?;
            let corr = summary.correlations[0].1;
            rows.push(SweepRow {
                fraction,
                n_train: data.len(),
                dof,
                r_s: corr.r_s.value,
                r_k: corr.r_k.value,
                t_rel: summary.drift.t_rel,
                r_rel: summary.drift.r_rel,
            });
        }
    }
    report::write_csv(
        &cfg.paths.report_dir.join(SWEEP_FILE),
        &["fraction", "n_train", "dof", "r_s", "r_k", "t_rel", "r_rel"],
        rows.iter().map(|r| {
            [
                r.fraction.to_string(),
                r.n_train.to_string(),
                r.dof.to_string(),
                r.r_s.to_string(),
                r.r_k.to_string(),
                r.t_rel.to_string(),
                r.r_rel.to_string(),
            ]
        }),
    )?;
    Ok(rows)
}
