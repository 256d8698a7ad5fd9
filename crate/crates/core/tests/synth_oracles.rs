use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rank_odo_core::pose::EulerPose6D;
use rank_odo_core::synth::*;

#[test]
fn flow_matches_plane_homography() {
    let scene = SceneConfig { focal_length: 100.0, cx: 8.0, cy: 8.0, plane_depth: 10.0, width: 16, height: 16 };
    let m = [0.2, -0.1, 1.0, 0.01, -0.02, 0.03];
    let flow = generate_flow(&EulerPose6D::from_array(m).unwrap(), &scene).unwrap();

    let k = Matrix3::new(100.0, 0.0, 8.0, 0.0, 100.0, 8.0, 0.0, 0.0, 1.0);
    let r = *Rotation3::from_euler_angles(m[3], m[4], m[5]).matrix();
    let t = Vector3::new(m[0], m[1], m[2]);
    let n = Vector3::new(0.0, 0.0, 1.0);
    let rt = r.transpose();
    let h = k * (rt - rt * t * n.transpose() / 10.0) * k.try_inverse().unwrap();

    let mut worst = 0.0f64;
    for v in 0..16 {
        for u in 0..16 {
            let q = h * Vector3::new(u as f64, v as f64, 1.0);
            let (du, dv) = (q.x / q.z - u as f64, q.y / q.z - v as f64);
            let (fu, fv) = flow.get(u, v);
            worst = worst.max((fu as f64 - du).abs()).max((fv as f64 - dv).abs());
        }
    }
    assert!(worst < 1e-6, "max deviation {worst}");
}

#[test]
fn retreating_camera_flows_toward_principal_point() {
    let scene = SceneConfig { focal_length: 50.0, cx: 4.0, cy: 3.0, plane_depth: 10.0, width: 9, height: 7 };
    let flow = generate_flow(&EulerPose6D { z: -1.0, ..Default::default() }, &scene).unwrap();
    assert_eq!(flow.get(4, 3), (0.0, 0.0));
    for v in 0..7 {
        for u in 0..9 {
            let (fu, fv) = flow.get(u, v);
            let (du, dv) = (4.0 - u as f32, 3.0 - v as f32);
            assert!(fu * du >= 0.0 && fv * dv >= 0.0);
            assert!((fu * dv - fv * du).abs() < 1e-5);
        }
    }
}

#[test]
fn augmentation_noise_moments() {
    let base = FlowField::zeros(1000, 500);
    let sigma = 0.05;
    let a = augment(&base, sigma, 11);
    let n = a.data().len() as f64;
    assert_eq!(n, 1e6);
    let mean = a.data().iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = a.data().iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 3.0 * sigma / n.sqrt(), "mean {mean}");
    assert!((var.sqrt() / sigma - 1.0).abs() < 0.02, "std {}", var.sqrt());

    let b = augment(&base, sigma, 12);
    let (ma, mb) = (mean, b.data().iter().map(|&x| x as f64).sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        let (dx, dy) = (*x as f64 - ma, *y as f64 - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    assert!((sab / (saa * sbb).sqrt()).abs() < 0.01);
}

#[test]
fn mean_flow_grows_with_forward_motion() {
    let mut ranges = [[0.0; 2]; 6];
    ranges[2] = [0.5, 2.0];
    let mut data = sample_dataset(1000, &ranges, &SceneConfig::default(), 0.05, 21).unwrap();
    data.sort_by(|a, b| a.state.z.partial_cmp(&b.state.z).unwrap());
    for w in data.windows(2) {
        if w[0].state.z < w[1].state.z {
            assert!(w[0].flow.mean_magnitude() < w[1].flow.mean_magnitude());
        }
    }
}

#[test]
fn datasets_are_reproducible() {
    let mut ranges = [[-0.1, 0.1]; 6];
    ranges[2] = [0.5, 2.0];
    let scene = SceneConfig { width: 8, height: 8, cx: 4.0, cy: 4.0, ..Default::default() };
    let a = sample_dataset(100, &ranges, &scene, 0.05, 5).unwrap();
    assert_eq!(a, sample_dataset(100, &ranges, &scene, 0.05, 5).unwrap());
    assert_ne!(a, sample_dataset(100, &ranges, &scene, 0.05, 6).unwrap());
}

proptest! {
    #[test]
    fn flo_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let flow = augment(&FlowField::zeros(w, h), 3.0, seed);
        let bytes = write_flo(&flow);
        prop_assert_eq!(bytes.len(), 12 + 8 * w * h);
        let back = read_flo(&bytes).unwrap();
        prop_assert_eq!(&back, &flow);
        prop_assert_eq!(write_flo(&back), bytes);
    }

    #[test]
    fn truncated_flo_rejected(w in 1usize..6, h in 1usize..6, cut in 1usize..8) {
        let bytes = write_flo(&FlowField::zeros(w, h));
        prop_assert!(read_flo(&bytes[..bytes.len() - cut]).is_err());
    }
}
