//! Synthetic optical flow over a fronto-parallel planar scene.
//!
//! A pinhole camera looks at the plane `Z = plane_depth` (first-camera
//! frame). For a relative motion `T = [R|t]` (second camera expressed in the
//! first camera's frame) every pixel is back-projected onto the plane,
//! moved into the second camera frame with `T⁻¹` and re-projected. The
//! difference of pixel positions is the flow.

use nalgebra::{Matrix3, Vector3};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{euler_to_transform, EulerPose6D, PoseError};
use crate::rng::{derive_seed, rng_from_seed};

pub mod flo;

pub use flo::{read_flo, write_flo, FloError};

/// Minimum depth of any scene point in front of the second camera.
pub const MIN_DEPTH: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("degenerate geometry: pixel ({u}, {v}) lands at depth {depth} m")]
    DegenerateGeometry { u: usize, v: usize, depth: f64 },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

/// Dense two-channel flow, row-major with interleaved `(u, v)` per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "flow field must be at least 1x1");
        Self { width, height, data: vec![0.0; width * height * 2] }
    }

    /// Returns `None` when the sizes disagree, a side is zero or a value is not finite.
    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Option<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 2 {
            return None;
        }
        if data.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, u: usize, v: usize) -> (f32, f32) {
        let i = 2 * (v * self.width + u);
        (self.data[i], self.data[i + 1])
    }

    /// Mean per-pixel displacement magnitude.
    pub fn mean_magnitude(&self) -> f64 {
        let sum: f64 = self.data.chunks_exact(2).map(|c| (c[0] as f64).hypot(c[1] as f64)).sum();
        sum / (self.width * self.height) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub focal_length: f64,
    pub cx: f64,
    pub cy: f64,
    pub plane_depth: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { focal_length: 32.0, cx: 16.0, cy: 16.0, plane_depth: 10.0, width: 32, height: 32 }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.focal_length > 0.0 && self.focal_length.is_finite()) {
            return Err(SynthError::InvalidScene("focal_length must be > 0".into()));
        }
        if !(self.plane_depth > 0.1 && self.plane_depth.is_finite()) {
            return Err(SynthError::InvalidScene("plane_depth must be > 0.1 m".into()));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(SynthError::InvalidScene("principal point must be finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::InvalidScene("image must be at least 1x1".into()));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.focal_length, 0.0, self.cx, 0.0, self.focal_length, self.cy, 0.0, 0.0, 1.0)
    }
}

/// One training/evaluation sample: camera state, observation and an
/// optional noise-augmented copy of the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSample {
    pub state: EulerPose6D,
    pub flow: FlowField,
    pub augmented_flow: Option<FlowField>,
}

pub fn generate_flow(motion: &EulerPose6D, scene: &SceneConfig) -> Result<FlowField, SynthError> {
    motion.validate()?;
    scene.validate()?;
    let t = euler_to_transform(motion);
    let r_inv = t.rotation.transpose();
    let f = scene.focal_length;
    let d = scene.plane_depth;
    let mut data = Vec::with_capacity(scene.width * scene.height * 2);
    for v in 0..scene.height {
        for u in 0..scene.width {
            let (uf, vf) = (u as f64, v as f64);
            let p = Vector3::new(d * (uf - scene.cx) / f, d * (vf - scene.cy) / f, d);
            let q = r_inv * (p - t.translation);
            if !(q.z > MIN_DEPTH) {
                return Err(SynthError::DegenerateGeometry { u, v, depth: q.z });
            }
            let u2 = f * q.x / q.z + scene.cx;
            let v2 = f * q.y / q.z + scene.cy;
            data.push((u2 - uf) as f32);
            data.push((v2 - vf) as f32);
        }
    }
    Ok(FlowField { width: scene.width, height: scene.height, data })
}

/// Adds iid `N(0, sigma²)` noise to every component. `sigma = 0` returns an
/// exact copy.
pub fn augment(flow: &FlowField, sigma: f64, seed: u64) -> FlowField {
    assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and >= 0");
    if sigma == 0.0 {
        return flow.clone();
    }
    let mut rng = rng_from_seed(seed);
    let data = flow
        .data
        .iter()
        .map(|&x| {
            let n: f64 = rng.sample(StandardNormal);
            (x as f64 + sigma * n) as f32
        })
        .collect();
    FlowField { width: flow.width, height: flow.height, data }
}

/// Per-DoF closed sampling interval `[lo, hi]`.
pub type StateRanges = [[f64; 2]; 6];

/// Draws `n` states uniformly from `ranges`, renders their flow and attaches
/// an augmented copy. Sample `k`'s noise uses `derive_seed(seed, k)`.
pub fn sample_dataset(
    n: usize,
    ranges: &StateRanges,
    scene: &SceneConfig,
    sigma: f64,
    seed: u64,
) -> Result<Vec<MotionSample>, SynthError> {
    if n == 0 {
        return Err(SynthError::InvalidArgument("n must be >= 1".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SynthError::InvalidArgument("sigma must be finite and >= 0".into()));
    }
    for (dof, [lo, hi]) in ranges.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(SynthError::InvalidArgument(format!(
                "range for {} must be finite with lo <= hi",
                EulerPose6D::DOF_NAMES[dof]
            )));
        }
    }
    scene.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = [0.0; 6];
        for (dof, [lo, hi]) in ranges.iter().enumerate() {
            let u: f64 = rng.random();
            v[dof] = lo + (hi - lo) * u;
        }
        let state = EulerPose6D::from_array(v)?;
        let flow = generate_flow(&state, scene)?;
        let augmented = augment(&flow, sigma, derive_seed(seed, k as u64));
        out.push(MotionSample { state, flow, augmented_flow: Some(augmented) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_ranges() -> StateRanges {
        [[0.0, 0.0]; 6]
    }

    #[test]
    fn zero_motion_zero_flow() {
        let f = generate_flow(&EulerPose6D::default(), &SceneConfig::default()).unwrap();
        assert!(f.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn retreating_camera_flows_to_principal_point() {
        let scene = SceneConfig { width: 17, height: 13, cx: 8.0, cy: 6.0, ..Default::default() };
        let motion = EulerPose6D { z: -0.7, ..Default::default() };
        let f = generate_flow(&motion, &scene).unwrap();
        assert_eq!(f.get(8, 6), (0.0, 0.0));
        for v in 0..scene.height {
            for u in 0..scene.width {
                let (du, dv) = f.get(u, v);
                let (ru, rv) = (u as f32 - 8.0, v as f32 - 6.0);
                // anti-parallel to the radial direction
                assert!(du * ru + dv * rv <= 0.0);
                assert!((du * rv - dv * ru).abs() < 1e-5);
                if ru != 0.0 || rv != 0.0 {
                    assert!(du * ru + dv * rv < 0.0);
                }
            }
        }
    }

    #[test]
    fn plane_behind_camera_is_degenerate() {
        let motion = EulerPose6D { z: 9.95, ..Default::default() };
        let err = generate_flow(&motion, &SceneConfig::default()).unwrap_err();
        assert!(matches!(err, SynthError::DegenerateGeometry { .. }));
    }

    #[test]
    fn pure_z_translation_magnitude_is_monotone() {
        let scene = SceneConfig::default();
        let mut prev = 0.0;
        for k in 1..=20 {
            let motion = EulerPose6D { z: 0.01 * k as f64, ..Default::default() };
            let f = generate_flow(&motion, &scene).unwrap();
            let (du, dv) = f.get(0, 0);
            let m = (du as f64).hypot(dv as f64);
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn augment_zero_sigma_is_identity_and_seed_is_deterministic() {
        let flow = generate_flow(&EulerPose6D { z: 1.0, ..Default::default() }, &SceneConfig::default()).unwrap();
        assert_eq!(augment(&flow, 0.0, 3), flow);
        let a = augment(&flow, 0.05, 11);
        let b = augment(&flow, 0.05, 11);
        assert_eq!(a, b);
        assert_ne!(a, augment(&flow, 0.05, 12));
    }

    #[test]
    fn single_zero_sample() {
        let ds = sample_dataset(1, &zero_ranges(), &SceneConfig::default(), 0.05, 1).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].state, EulerPose6D::default());
        assert!(ds[0].flow.data().iter().all(|&x| x == 0.0));
        assert!(ds[0].augmented_flow.is_some());
    }

    #[test]
    fn dataset_is_deterministic() {
        let mut ranges = zero_ranges();
        ranges[2] = [0.5, 2.0];
        ranges[5] = [-0.05, 0.05];
        let scene = SceneConfig { width: 8, height: 8, cx: 4.0, cy: 4.0, ..Default::default() };
        let a = sample_dataset(100, &ranges, &scene, 0.05, 42).unwrap();
        let b = sample_dataset(100, &ranges, &scene, 0.05, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dataset_rejects_bad_arguments() {
        let scene = SceneConfig::default();
        assert!(sample_dataset(0, &zero_ranges(), &scene, 0.05, 1).is_err());
        assert!(sample_dataset(1, &zero_ranges(), &scene, -1.0, 1).is_err());
        let mut bad = zero_ranges();
        bad[0] = [1.0, 0.0];
        assert!(sample_dataset(1, &bad, &scene, 0.05, 1).is_err());
        let mut far = zero_ranges();
        far[2] = [20.0, 20.0];
        assert!(matches!(sample_dataset(1, &far, &scene, 0.05, 1), Err(SynthError::DegenerateGeometry { .. })));
    }
}
