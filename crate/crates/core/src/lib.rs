//! Visual odometry as label ranking.
//!
//! Each degree of freedom of the camera motion gets its own encoder/decoder
//! network. The encoder maps an optical-flow observation to a feature
//! vector and is trained with a ranking contrastive loss so that features
//! of similar camera states end up close together; the decoder regresses
//! the state from the feature.
//!
//! Modules:
//!
//! * [`pose`]: Euler/matrix poses, trajectories, KITTI pose files.
//! * [`synth`]: analytic planar-scene flow, noise augmentation, `.flo` I/O.
//! * [`rank`]: ranking sets, Plackett–Luce probabilities, the loss and its gradients.
//! * [`net`]: dense networks with manual backprop, Adam, per-DoF training.
//! * [`eval`]: rank correlations, KITTI drift, latent dumps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eval;
pub mod net;
pub mod pose;
pub mod rank;
pub mod rng;
pub mod synth;
pub mod util;
