//! KITTI odometry drift: relative translation (%) and rotation (deg/100 m)
//! errors averaged over segments of fixed path length.

use nalgebra::Matrix3;

use super::EvalError;
use crate::pose::{compose, inverse, relative_pose, Trajectory};
use crate::util::NeumaierSum;

pub const DEFAULT_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];
pub const DEFAULT_STRIDE: usize = 10;

/// How per-segment errors are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Arithmetic mean, as in the KITTI devkit.
    #[default]
    Mean,
    /// Root mean square.
    Rmse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftOptions {
    pub lengths: Vec<f64>,
    pub stride: usize,
    pub aggregation: Aggregation,
}

impl Default for DriftOptions {
    fn default() -> Self {
        Self { lengths: DEFAULT_LENGTHS.to_vec(), stride: DEFAULT_STRIDE, aggregation: Aggregation::Mean }
    }
}

/// Aggregated errors of all segments of one length: `t_err` in percent,
/// `r_err` in degrees per 100 m.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStats {
    pub length: f64,
    pub t_err: f64,
    pub r_err: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// Percent.
    pub t_rel: f64,
    /// Degrees per 100 m.
    pub r_rel: f64,
    pub per_length: Vec<SegmentStats>,
    pub segments: usize,
}

impl DriftReport {
    /// No segment fit into the trajectory; `t_rel`/`r_rel` are 0.
    pub fn is_empty(&self) -> bool {
        self.segments == 0
    }
}

/// Angle of a rotation matrix in `[0, pi]`.
///
/// Evaluated as `atan2(|axis part|, (trace - 1) / 2)`, which equals
/// `acos((trace - 1) / 2)` but stays accurate near 0 and pi.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let ax = r[(2, 1)] - r[(1, 2)];
    let ay = r[(0, 2)] - r[(2, 0)];
    let az = r[(1, 0)] - r[(0, 1)];
    let s = 0.5 * (ax * ax + ay * ay + az * az).sqrt();
    s.atan2(c)
}

/// Cumulative path length at every frame.
pub fn path_distances(traj: &Trajectory) -> Vec<f64> {
    let mut out = Vec::with_capacity(traj.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in traj.poses().windows(2) {
        acc += (w[1].translation - w[0].translation).norm();
        out.push(acc);
    }
    out
}

fn combine(values: &[f64], agg: Aggregation) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    match agg {
        Aggregation::Mean => values.iter().copied().collect::<NeumaierSum>().total() / n,
        Aggregation::Rmse => (values.iter().map(|v| v * v).collect::<NeumaierSum>().total() / n).sqrt(),
    }
}

/// For every start frame `s` (every `stride` frames) and every length `L`,
/// the end frame is the first `e` with `dist[e] >= dist[s] + L` along the
/// ground truth. The segment error is
/// `E = rel_gt(s, e)⁻¹ · rel_pred(s, e)`, contributing
/// `|t(E)| / L` and `angle(E) / L`.
pub fn kitti_drift(gt: &Trajectory, pred: &Trajectory, opts: &DriftOptions) -> Result<DriftReport, EvalError> {
    if gt.len() != pred.len() {
        return Err(EvalError::LengthMismatch(gt.len(), pred.len()));
    }
    if gt.len() < 2 {
        return Err(EvalError::TooFewSamples { needed: 2, got: gt.len() });
    }
    if opts.stride == 0 || opts.lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(EvalError::NonFinite);
    }
    let dist = path_distances(gt);
    let (g, p) = (gt.poses(), pred.poses());
    let mut t_errs: Vec<Vec<f64>> = vec![Vec::new(); opts.lengths.len()];
    let mut r_errs: Vec<Vec<f64>> = vec![Vec::new(); opts.lengths.len()];

    for s in (0..g.len()).step_by(opts.stride) {
        for (li, &len) in opts.lengths.iter().enumerate() {
            let target = dist[s] + len;
            let Some(e) = (s + 1..g.len()).find(|&e| dist[e] >= target) else {
                continue;
            };
            let err = compose(&inverse(&relative_pose(&g[s], &g[e])), &relative_pose(&p[s], &p[e]));
            t_errs[li].push(err.translation.norm() / len);
            r_errs[li].push(rotation_angle(&err.rotation) / len);
        }
    }

    let to_pct = 100.0;
    let to_deg_per_100m = 180.0 / std::f64::consts::PI * 100.0;
    let per_length = opts
        .lengths
        .iter()
        .enumerate()
        .map(|(li, &length)| SegmentStats {
            length,
            t_err: combine(&t_errs[li], opts.aggregation) * to_pct,
            r_err: combine(&r_errs[li], opts.aggregation) * to_deg_per_100m,
            count: t_errs[li].len(),
        })
        .collect();
    let all_t: Vec<f64> = t_errs.concat();
    let all_r: Vec<f64> = r_errs.concat();
    Ok(DriftReport {
        t_rel: combine(&all_t, opts.aggregation) * to_pct,
        r_rel: combine(&all_r, opts.aggregation) * to_deg_per_100m,
        per_length,
        segments: all_t.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{accumulate, rot_x, rot_z, RigidTransform};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn line(n: usize, step: f64) -> Trajectory {
        accumulate(&vec![RigidTransform::from_translation(0.0, 0.0, step); n])
    }

    #[test]
    fn rotation_angle_basics() {
        assert_eq!(rotation_angle(&Matrix3::identity()), 0.0);
        assert_abs_diff_eq!(rotation_angle(&rot_z(0.3)), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(rotation_angle(&rot_x(-2.0)), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rotation_angle(&rot_x(std::f64::consts::PI)), std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn path_distance_examples() {
        assert_eq!(path_distances(&line(0, 1.0)), vec![0.0]);
        assert_eq!(path_distances(&line(5, 1.0)), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn identical_trajectories_have_zero_drift() {
        let t = line(300, 1.0);
        let r = kitti_drift(&t, &t, &DriftOptions::default()).unwrap();
        assert_eq!((r.t_rel, r.r_rel), (0.0, 0.0));
        assert!(r.segments > 0);
    }

    #[test]
    fn scaled_line_gives_one_percent() {
        let gt = line(900, 1.0);
        let pred =
            Trajectory::new((0..=900).map(|k| RigidTransform::from_translation(0.0, 0.0, 1.01 * k as f64)).collect())
                .unwrap();
        let r = kitti_drift(&gt, &pred, &DriftOptions::default()).unwrap();
        assert_abs_diff_eq!(r.t_rel, 1.0, epsilon = 1e-9);
        assert_eq!(r.r_rel, 0.0);
        assert_eq!(r.per_length.len(), 8);
        assert!(r.per_length.iter().all(|s| s.count > 0));
    }

    #[test]
    fn short_trajectory_reports_empty() {
        let t = line(20, 1.0);
        let r = kitti_drift(&t, &t, &DriftOptions::default()).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.t_rel, 0.0);
    }

    #[test]
    fn argument_errors() {
        assert_eq!(
            kitti_drift(&line(3, 1.0), &line(4, 1.0), &DriftOptions::default()),
            Err(EvalError::LengthMismatch(4, 5))
        );
        assert!(kitti_drift(&line(0, 1.0), &line(0, 1.0), &DriftOptions::default()).is_err());
        let opts = DriftOptions { stride: 0, ..Default::default() };
        assert!(kitti_drift(&line(3, 1.0), &line(3, 1.0), &opts).is_err());
    }

    #[test]
    fn rmse_is_at_least_mean() {
        let gt = line(400, 1.0);
        let pred = Trajectory::new(
            (0..=400)
                .map(|k| {
                    let k = k as f64;
                    RigidTransform::from_parts_unchecked(
                        rot_z(1e-4 * k * k / 50.0),
                        Vector3::new(0.0, 0.0, k * (1.0 + 1e-5 * k)),
                    )
                })
                .collect(),
        )
        .unwrap();
        let mean = kitti_drift(&gt, &pred, &DriftOptions::default()).unwrap();
        let rmse =
            kitti_drift(&gt, &pred, &DriftOptions { aggregation: Aggregation::Rmse, ..Default::default() }).unwrap();
        assert!(rmse.t_rel >= mean.t_rel && rmse.r_rel >= mean.r_rel);
        assert!(mean.t_rel > 0.0);
    }
}
