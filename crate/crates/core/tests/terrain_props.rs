use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use touchdown_core::sim::{render_stereo, SceneKind, SceneSpec};
use touchdown_core::stereo::{compute_disparity, BlockMatchParams};
use touchdown_core::terrain::{
    bin_and_fit, build_point_cloud, classify_footprint, fit_plane, CellVerdict, PointCloud, Thresholds,
};
use touchdown_core::{UnitQuaternion, Vec3};

/// Slope, roughness and normal of a point set from nalgebra's eigensolver.
fn eigen_oracle(points: &[Vec3]) -> (f64, f64, Vec3) {
    let n = points.len() as f64;
    let c = points.iter().fold(Vec3::ZERO, |a, p| a + *p) * (1.0 / n);
    let mut m = Matrix3::zeros();
    for p in points {
        let d = nalgebra::Vector3::new(p.x - c.x, p.y - c.y, p.z - c.z);
        m += d * d.transpose();
    }
    m /= n;
    let eig = SymmetricEigen::new(m);
    let (k, lambda) = eig.eigenvalues.argmin();
    let v = eig.eigenvectors.column(k);
    let mut normal = Vec3::new(v[0], v[1], v[2]);
    if normal.z < 0.0 {
        normal = -normal;
    }
    (
        normal.z.clamp(-1.0, 1.0).acos().to_degrees(),
        lambda.max(0.0).sqrt(),
        normal,
    )
}

fn stereo_cloud(spec: &SceneSpec) -> PointCloud {
    let scene = render_stereo(spec).unwrap();
    let d = compute_disparity(&scene.left, &scene.right, &BlockMatchParams::default()).unwrap();
    let up = spec.camera_orientation().inverse().rotate(Vec3::Z);
    build_point_cloud(&d, &spec.camera, up, 20.0).unwrap()
}

#[test]
fn ramp_cells_match_eigen_oracle() {
    let spec = SceneSpec {
        ramp_deg: 20.0,
        ..SceneSpec::new(SceneKind::Ramp)
    };
    let cloud = stereo_cloud(&spec);
    let grid = bin_and_fit(&cloud, 0.5, 20).unwrap();
    let mut by_key: HashMap<(i64, i64), Vec<Vec3>> = HashMap::new();
    for p in &cloud.points {
        by_key
            .entry(((p.x / 0.5).floor() as i64, (p.y / 0.5).floor() as i64))
            .or_default()
            .push(*p);
    }
    let mut checked = 0;
    for (i, j, count, stats) in grid.iter_cells() {
        let key = grid.cell_key(i as i64, j as i64);
        let pts = by_key.get(&key).map_or(&[][..], |v| &v[..]);
        assert_eq!(count, pts.len());
        let Some(s) = stats else {
            assert!(count < 20);
            continue;
        };
        let (slope, rough, normal) = eigen_oracle(pts);
        assert!(
            (s.slope_deg - slope).abs() < 1e-6,
            "{key:?}: {} vs {slope}",
            s.slope_deg
        );
        assert!((s.roughness_m - rough).abs() < 1e-9);
        assert!((s.normal - normal).norm() < 1e-6);
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn camera_tilt_with_matching_orientation() {
    for tilt in [-20.0, -10.0, 10.0, 20.0] {
        let spec = SceneSpec {
            tilt_deg: tilt,
            ..SceneSpec::new(SceneKind::FlatPlane)
        };
        let grid = bin_and_fit(&stereo_cloud(&spec), 0.5, 20).unwrap();
        let mut n = 0;
        for (_, _, count, stats) in grid.iter_cells() {
            if let Some(s) = stats.filter(|_| count > 2000) {
                assert!(s.slope_deg < 1.5, "tilt {tilt}: {}", s.slope_deg);
                n += 1;
            }
        }
        assert!(n >= 4, "tilt {tilt}: only {n} cells");
        let decision = classify_footprint(&grid, 15.0, 0.05, 1.0).unwrap();
        assert!(decision.safe, "tilt {tilt}");
    }
}

fn noisy_plane(seed: u64, n: usize, tilt: f64, noise: f64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 0.4, 0.0), tilt);
    (0..n)
        .map(|_| {
            let p = Vec3::new(
                rng.random_range(0.0..0.5),
                rng.random_range(0.0..0.5),
                rng.random_range(-noise..=noise),
            );
            q.rotate(p) + Vec3::new(0.1, 0.2, -2.0)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_beats_random_planes(seed in 0u64..10_000, tilt in 0.0..0.8f64, noise in 0.001..0.05f64) {
        let pts = noisy_plane(seed, 60, tilt, noise);
        let s = fit_plane(&pts).unwrap();
        let c = pts.iter().fold(Vec3::ZERO, |a, p| a + *p) * (1.0 / pts.len() as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for _ in 0..100 {
            let n = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let Some(n) = n.normalized() else { continue };
            let rms = (pts.iter().map(|p| (*p - c).dot(n).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
            prop_assert!(s.roughness_m <= rms + 1e-12);
        }
    }

    #[test]
    fn fit_invariances(seed in 0u64..10_000, t in prop::array::uniform3(-50.0..50.0f64), yaw in -PI..PI) {
        let pts = noisy_plane(seed, 40, 0.3, 0.02);
        let base = fit_plane(&pts).unwrap();
        let shifted: Vec<_> = pts.iter().map(|p| *p + Vec3::new(t[0], t[1], t[2])).collect();
        prop_assert!((fit_plane(&shifted).unwrap().roughness_m - base.roughness_m).abs() < 1e-9);
        let q = UnitQuaternion::from_axis_angle(Vec3::Z, yaw);
        let turned: Vec<_> = pts.iter().map(|p| q.rotate(*p)).collect();
        prop_assert!((fit_plane(&turned).unwrap().slope_deg - base.slope_deg).abs() < 1e-6);
    }

    #[test]
    fn looser_thresholds_never_unsafe(seed in 0u64..10_000, s1 in 1.0..40.0f64, ds in 0.0..20.0f64, r1 in 0.005..0.1f64, dr in 0.0..0.1f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        for k in 0..4 {
            let (ox, oy) = ([-0.5, 0.0][k % 2], [-0.5, 0.0][k / 2]);
            let tilt = rng.random_range(0.0..0.5);
            let noise = rng.random_range(0.0..0.08);
            let n = if rng.random_bool(0.15) { 10 } else { 50 };
            for p in noisy_plane(rng.random(), n, tilt, noise) {
                // confine each patch to its own cell
                points.push(Vec3::new(ox + (p.x - 0.1).clamp(0.0, 0.499), oy + (p.y - 0.2).clamp(0.0, 0.499), p.z));
            }
        }
        let grid = bin_and_fit(&PointCloud { points }, 0.5, 20).unwrap();
        let strict = classify_footprint(&grid, s1, r1, 1.0).unwrap();
        let loose = classify_footprint(&grid, s1 + ds, r1 + dr, 1.0).unwrap();
        prop_assert!(!strict.safe || loose.safe);
        for (a, b) in strict.per_cell_verdict.iter().zip(&loose.per_cell_verdict) {
            prop_assert!(*a != CellVerdict::Safe || *b == CellVerdict::Safe);
        }
    }

    #[test]
    fn thinning_below_min_points_is_never_safe(seed in 0u64..10_000, keep in 0usize..20) {
        let pts = noisy_plane(seed, 50, 0.05, 0.001);
        let th = Thresholds::default();
        let full = fit_plane(&pts);
        prop_assert_eq!(th.judge(full.as_ref()).0, CellVerdict::Safe);
        // a cell under min_points carries no stats
        prop_assert_eq!(th.judge(None).0, CellVerdict::Unknown);
        let key = ((pts[0].x / 10.0).floor() as i64, (pts[0].y / 10.0).floor() as i64);
        let grid = bin_and_fit(&PointCloud { points: pts.clone() }, 10.0, 20).unwrap();
        let (i, j) = grid.index_of_key(key);
        prop_assert_eq!(th.judge(grid.stats(i, j)).0, CellVerdict::Safe);
        let thin = bin_and_fit(&PointCloud { points: pts[..keep].to_vec() }, 10.0, 20).unwrap();
        let (i, j) = thin.index_of_key(key);
        prop_assert_eq!(thin.count(i, j), keep);
        prop_assert_eq!(th.judge(thin.stats(i, j)).0, CellVerdict::Unknown);
    }

    #[test]
    fn subsets_of_steep_planes_stay_unsafe(seed in 0u64..10_000, keep in 3usize..50) {
        let pts = noisy_plane(seed, 50, 0.6, 0.0);
        let th = Thresholds::default();
        prop_assert_eq!(th.judge(fit_plane(&pts).as_ref()).0, CellVerdict::Unsafe);
        prop_assert_ne!(th.judge(fit_plane(&pts[..keep]).as_ref()).0, CellVerdict::Safe);
    }
}
