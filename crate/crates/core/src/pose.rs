//! Camera-state algebra: 6-DoF Euler poses, rigid transforms, trajectories
//! and the KITTI odometry pose-file format.
//!
//! Conventions used throughout the crate:
//!
//! * Rotations are intrinsic ZYX: `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
//! * Poses are camera-to-world. The relative motion between two absolute
//!   poses is `T_rel = T_a⁻¹ · T_b`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Matrix4, Vector3};
use thiserror::Error;

/// Orthonormality tolerance for a valid rotation matrix.
pub const ROTATION_TOLERANCE: f64 = 1e-9;
/// Parsed rotations whose orthonormality error exceeds this are rejected.
pub const REORTHONORMALIZE_LIMIT: f64 = 1e-4;
/// `|R[2][0]|` above this is treated as gimbal lock.
pub const GIMBAL_THRESHOLD: f64 = 1.0 - 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("pose field `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("angle `{name}` = {value} is outside (-pi, pi]")]
    AngleOutOfRange { name: &'static str, value: f64 },
    #[error("rotation is not orthonormal (max deviation {deviation:e})")]
    InvalidRotation { deviation: f64 },
    #[error("gimbal lock: |R[2][0]| = {0} leaves roll and yaw undetermined")]
    GimbalLock(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: rotation is not orthonormal (max deviation {deviation:e})")]
    InvalidRotationAt { line: usize, deviation: f64 },
}

/// Relative camera motion as translation (meters) and roll/pitch/yaw
/// (radians, about the camera x/y/z axes).
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct EulerPose6D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerPose6D {
    pub const DOF_NAMES: [&'static str; 6] = ["x", "y", "z", "roll", "pitch", "yaw"];

    pub fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Result<Self, PoseError> {
        let p = Self { x, y, z, roll, pitch, yaw };
        p.validate()?;
        Ok(p)
    }

    pub fn from_array(v: [f64; 6]) -> Result<Self, PoseError> {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }

    /// Component by degree-of-freedom index (0..6, same order as [`Self::DOF_NAMES`]).
    pub fn component(&self, dof: usize) -> f64 {
        self.to_array()[dof]
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        for (name, v) in Self::DOF_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(PoseError::NonFinite(name));
            }
        }
        for (name, v) in [("roll", self.roll), ("pitch", self.pitch), ("yaw", self.yaw)] {
            if !(v > -PI && v <= PI) {
                return Err(PoseError::AngleOutOfRange { name, value: v });
            }
        }
        Ok(())
    }
}

/// Rotation plus translation. Applies as `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    /// Checked constructor: the rotation must be orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, PoseError> {
        let deviation = orthonormality_error(&rotation);
        let det_err = (rotation.determinant() - 1.0).abs();
        if !deviation.is_finite() || deviation >= ROTATION_TOLERANCE || det_err > ROTATION_TOLERANCE {
            return Err(PoseError::InvalidRotation { deviation: deviation.max(det_err) });
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(PoseError::NonFinite("translation"));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::new(x, y, z) }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Max-abs entry of `RᵀR − I`.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn euler_to_transform(p: &EulerPose6D) -> RigidTransform {
    RigidTransform { rotation: rot_z(p.yaw) * rot_y(p.pitch) * rot_x(p.roll), translation: Vector3::new(p.x, p.y, p.z) }
}

pub fn transform_to_euler(t: &RigidTransform) -> Result<EulerPose6D, PoseError> {
    let r = &t.rotation;
    let r20 = r[(2, 0)];
    if r20.abs() > GIMBAL_THRESHOLD {
        return Err(PoseError::GimbalLock(r20.abs()));
    }
    // atan2 keeps precision near |pitch| -> pi/2 where asin degrades.
    let pitch = (-r20).atan2(r[(0, 0)].hypot(r[(1, 0)]));
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    Ok(EulerPose6D { x: t.translation.x, y: t.translation.y, z: t.translation.z, roll, pitch, yaw })
}

/// `a ∘ b`: applies `b` first, then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform { rotation: a.rotation * b.rotation, translation: a.rotation * b.translation + a.translation }
}

pub fn inverse(t: &RigidTransform) -> RigidTransform {
    let rt = t.rotation.transpose();
    RigidTransform { rotation: rt, translation: -(rt * t.translation) }
}

/// Motion from absolute pose `a` to absolute pose `b`: `a⁻¹ · b`.
pub fn relative_pose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    compose(&inverse(a), b)
}

/// Ordered camera-to-world poses.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<RigidTransform>,
}

impl Trajectory {
    pub fn new(poses: Vec<RigidTransform>) -> Option<Self> {
        if poses.is_empty() {
            None
        } else {
            Some(Self { poses })
        }
    }

    pub fn poses(&self) -> &[RigidTransform] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Relative motions between consecutive frames.
    pub fn relatives(&self) -> Vec<RigidTransform> {
        self.poses.windows(2).map(|w| relative_pose(&w[0], &w[1])).collect()
    }

    /// Applies `t` on the left of every pose (change of world frame).
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self { poses: self.poses.iter().map(|p| compose(t, p)).collect() }
    }
}

/// Chains relative motions into a trajectory starting at the identity.
pub fn accumulate(relatives: &[RigidTransform]) -> Trajectory {
    let mut poses = Vec::with_capacity(relatives.len() + 1);
    poses.push(RigidTransform::identity());
    for rel in relatives {
        let next = compose(poses.last().unwrap(), rel);
        poses.push(next);
    }
    Trajectory { poses }
}

/// Nearest rotation in the Frobenius sense (polar factor), with det = +1.
fn nearest_rotation(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    Some(r)
}

/// Parses a KITTI odometry pose file: one `[R|t]` row-major 3×4 matrix per
/// line. Blank lines are skipped. Rotations that are slightly off
/// (deviation up to [`REORTHONORMALIZE_LIMIT`]) are projected back onto SO(3).
pub fn parse_kitti_poses(text: &str) -> Result<Trajectory, PoseError> {
    let mut poses = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut vals = [0.0f64; 12];
        let mut count = 0;
        for tok in line.split_whitespace() {
            if count == 12 {
                count += 1;
                break;
            }
            vals[count] = tok
                .parse::<f64>()
                .map_err(|_| PoseError::Parse { line: line_no, message: format!("non-numeric token `{tok}`") })?;
            if !vals[count].is_finite() {
                return Err(PoseError::Parse { line: line_no, message: format!("non-finite value `{tok}`") });
            }
            count += 1;
        }
        if count != 12 {
            return Err(PoseError::Parse {
                line: line_no,
                message: format!("expected 12 numbers, found {}", line.split_whitespace().count()),
            });
        }
        let mut rotation =
            Matrix3::new(vals[0], vals[1], vals[2], vals[4], vals[5], vals[6], vals[8], vals[9], vals[10]);
        let translation = Vector3::new(vals[3], vals[7], vals[11]);
        let deviation = orthonormality_error(&rotation);
        let det = rotation.determinant();
        if deviation > REORTHONORMALIZE_LIMIT || det <= 0.0 {
            return Err(PoseError::InvalidRotationAt { line: line_no, deviation });
        }
        if deviation > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            rotation = nearest_rotation(&rotation).ok_or(PoseError::InvalidRotationAt { line: line_no, deviation })?;
        }
        poses.push(RigidTransform { rotation, translation });
    }
    Trajectory::new(poses).ok_or(PoseError::Parse { line: 0, message: "no poses in input".into() })
}

/// Writes poses in KITTI format. Values use the shortest representation
/// that parses back to the identical `f64`.
pub fn write_kitti_poses(traj: &Trajectory) -> String {
    let mut out = String::new();
    for p in traj.poses() {
        for row in 0..3 {
            for col in 0..3 {
                write!(out, "{} ", p.rotation[(row, col)]).unwrap();
            }
            write!(out, "{}", p.translation[row]).unwrap();
            out.push(if row == 2 { '\n' } else { ' ' });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_pose_is_identity() {
        let t = euler_to_transform(&EulerPose6D::default());
        assert_eq!(t, RigidTransform::identity());
        let p = transform_to_euler(&RigidTransform::identity()).unwrap();
        assert_eq!(p, EulerPose6D::default());
    }

    #[test]
    fn quarter_yaw_maps_x_to_y() {
        let p = EulerPose6D::new(0.0, 0.0, 0.0, 0.0, 0.0, PI / 2.0).unwrap();
        let t = euler_to_transform(&p);
        let v = t.rotation * Vector3::x();
        assert_abs_diff_eq!(v, Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn recovers_known_angles() {
        let r = rot_z(0.3) * rot_y(0.2) * rot_x(0.1);
        let p = transform_to_euler(&RigidTransform::from_parts_unchecked(r, Vector3::zeros())).unwrap();
        assert_abs_diff_eq!(p.roll, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(p.pitch, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.yaw, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn gimbal_lock_is_an_error() {
        // R[2][0] = -1 <=> pitch = pi/2
        let r = rot_y(PI / 2.0);
        assert_abs_diff_eq!(r[(2, 0)], -1.0, epsilon = 1e-15);
        let t = RigidTransform::from_parts_unchecked(r, Vector3::zeros());
        assert!(matches!(transform_to_euler(&t), Err(PoseError::GimbalLock(_))));
    }

    #[test]
    fn euler_validation() {
        assert!(EulerPose6D::new(0.0, 0.0, 0.0, PI, 0.0, 0.0).is_ok());
        assert!(matches!(
            EulerPose6D::new(0.0, 0.0, 0.0, -PI, 0.0, 0.0),
            Err(PoseError::AngleOutOfRange { name: "roll", .. })
        ));
        assert!(matches!(EulerPose6D::new(f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0), Err(PoseError::NonFinite("x"))));
    }

    #[test]
    fn compose_and_inverse_basics() {
        let t = euler_to_transform(&EulerPose6D::new(1.0, -2.0, 0.5, 0.3, -0.2, 1.1).unwrap());
        assert_eq!(compose(&t, &RigidTransform::identity()), t);
        let e = compose(&t, &inverse(&t));
        assert_abs_diff_eq!(e.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.translation, Vector3::zeros(), epsilon = 1e-12);

        assert_eq!(inverse(&RigidTransform::identity()), RigidTransform::identity());
        let inv = inverse(&RigidTransform::from_translation(0.0, 0.0, 5.0));
        assert_eq!(inv.translation, Vector3::new(0.0, 0.0, -5.0));
    }

    #[test]
    fn relative_pose_basics() {
        let a = euler_to_transform(&EulerPose6D::new(1.0, 2.0, 3.0, 0.1, 0.2, 0.3).unwrap());
        let r = relative_pose(&a, &a);
        assert_abs_diff_eq!(r.rotation, Matrix3::identity(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.translation, Vector3::zeros(), epsilon = 1e-15);
        let b = RigidTransform::from_translation(0.0, 0.0, 5.0);
        assert_eq!(relative_pose(&RigidTransform::identity(), &b), b);
    }

    #[test]
    fn accumulate_straight_line() {
        assert_eq!(accumulate(&[]).poses(), &[RigidTransform::identity()]);
        let step = RigidTransform::from_translation(0.0, 0.0, 1.0);
        let traj = accumulate(&vec![step; 5]);
        assert_eq!(traj.len(), 6);
        for (k, p) in traj.poses().iter().enumerate() {
            assert_eq!(p.translation, Vector3::new(0.0, 0.0, k as f64));
        }
    }

    #[test]
    fn parse_examples() {
        let t = parse_kitti_poses("1 0 0 0 0 1 0 0 0 0 1 0").unwrap();
        assert_eq!(t.poses(), &[RigidTransform::identity()]);
        let t = parse_kitti_poses("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 1.5 0 0 1 0\n").unwrap();
        assert_eq!(t.poses()[1].translation, Vector3::new(0.0, 1.5, 0.0));
        assert_eq!(write_kitti_poses(&accumulate(&[])), "1 0 0 0 0 1 0 0 0 0 1 0\n");
    }

    #[test]
    fn parse_errors_report_lines() {
        let err = parse_kitti_poses("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, PoseError::Parse { line: 2, .. }));
        let err = parse_kitti_poses("1 0 0 0 0 1 0 0 0 0 1 0 7").unwrap_err();
        assert!(matches!(err, PoseError::Parse { line: 1, .. }));
        let err = parse_kitti_poses("1 0 0 0 0 1 0 x 0 0 1 0").unwrap_err();
        assert!(matches!(err, PoseError::Parse { line: 1, .. }));
        let err = parse_kitti_poses("2 0 0 0 0 1 0 0 0 0 1 0").unwrap_err();
        assert!(matches!(err, PoseError::InvalidRotationAt { line: 1, .. }));
    }

    #[test]
    fn parse_reorthonormalizes_small_errors() {
        // 6-digit rotation, as found in ground-truth files
        let r = rot_z(0.3) * rot_y(0.2) * rot_x(0.1);
        let mut line = String::new();
        for row in 0..3 {
            for col in 0..3 {
                write!(line, "{:.6e} ", r[(row, col)]).unwrap();
            }
            write!(line, "{} ", row).unwrap();
        }
        let raw = Matrix3::from_fn(|i, j| format!("{:.6e}", r[(i, j)]).parse::<f64>().unwrap());
        assert!(orthonormality_error(&raw) > ROTATION_TOLERANCE);
        let t = parse_kitti_poses(&line).unwrap();
        assert!(orthonormality_error(&t.poses()[0].rotation) < ROTATION_TOLERANCE);
        assert!((t.poses()[0].rotation.determinant() - 1.0).abs() < ROTATION_TOLERANCE);
        assert_abs_diff_eq!(t.poses()[0].rotation, r, epsilon = 1e-5);
    }

    #[test]
    fn checked_constructor_rejects_bad_rotation() {
        let bad = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(RigidTransform::new(bad, Vector3::zeros()).is_err());
        assert!(RigidTransform::new(Matrix3::identity() * 1.001, Vector3::zeros()).is_err());
        assert!(RigidTransform::new(rot_x(0.4), Vector3::new(1.0, 2.0, 3.0)).is_ok());
    }
}
