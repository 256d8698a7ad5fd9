//! Evaluation: rank correlations between predictions and states, KITTI
//! style drift over path-length segments, and latent-space dumps.

use thiserror::Error;

use crate::net::NetError;

pub mod corr;
pub mod drift;
pub mod latent;

pub use corr::{kendall, spearman, Coefficient};
pub use drift::{kitti_drift, path_distances, rotation_angle, Aggregation, DriftOptions, DriftReport, SegmentStats};
pub use latent::{latent_dump, ranking_alignment, CorrelationReport, LatentDump, LatentRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite input value")]
    NonFinite,
    #[error(transparent)]
    Net(#[from] NetError),
}
