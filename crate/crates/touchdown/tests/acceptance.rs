//! Acceptance criteria AC1-AC8, run in order. Each prints one
//! `[PASS]`/`[FAIL]` line; the process exits nonzero if any criterion fails.
//! Runs without the libtest harness so the lines are never captured.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use touchdown::pipeline::{combine, run_mono, run_stereo};
use touchdown::PipelineConfig;
use touchdown_core::flow::FlowField;
use touchdown_core::homography::{fit_homography, homography_error};
use touchdown_core::imu::{madgwick_update, OrientationState};
use touchdown_core::sim::{
    generate_imu, noise_image, render_mono_sequence, render_stereo, spin_trajectory, static_trajectory,
    SceneKind, SceneSpec,
};
use touchdown_core::stereo::{
    bad_pixel_rate, compute_disparity, left_right_check, BlockMatchParams, DisparityMap, INVALID_DISPARITY,
};
use touchdown_core::terrain::{bin_and_fit, build_point_cloud, Reason};
use touchdown_core::{GrayImage, UnitQuaternion, Vec3};

// AC1
const MONO_SIZE: (usize, usize) = (320, 240);
const MONO_FRAMES: usize = 20;
const DESCENT_RATE: f64 = 0.5;
const FRAME_DT: f64 = 0.1;
const RIGID_MAX_PX: f64 = 0.2;
const RIPPLE_MIN_PX: f64 = 1.0;
const MIN_SEPARATION: f64 = 5.0;
const MONO_BUDGET: Duration = Duration::from_secs(30);
// AC2
const HOMOGRAPHY_FIELDS: usize = 100;
const HOMOGRAPHY_POINTS: usize = 25;
const LOOP_TOL: f64 = 1e-9;
const RECOVERY_TOL: f64 = 1e-6;
// AC3
const SHIFTS: [usize; 4] = [1, 8, 24, 60];
const MEDIAN_TOL: f32 = 0.25;
const MIN_VALID_INTERIOR: f64 = 0.80;
const BAD_PIXEL_TAU: f64 = 4.0;
const MAX_BAD_PERCENT: f64 = 10.0;
// AC4
const RAMP_DEGS: [f64; 4] = [5.0, 10.0, 20.0, 30.0];
const SLOPE_TOL_DEG: f64 = 1.5;
const MAX_ROUGHNESS_M: f64 = 0.02;
const ORACLE_SLOPE_TOL_DEG: f64 = 1e-6;
const ORACLE_ROUGH_TOL_M: f64 = 1e-9;
// AC6
const IMU_RATE: f64 = 100.0;
const INITIAL_TILT_DEG: f64 = 30.0;
const LEVEL_TOL_DEG: f64 = 1.0;
const LEVEL_WITHIN_S: f64 = 10.0;
const SPIN_TOL_DEG: f64 = 0.5;
// AC7
const LR_PAIRS: usize = 100;
// AC8
const STEREO_SIZE: (usize, usize) = (640, 480);
const STEREO_BUDGET: Duration = Duration::from_secs(1);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mono_filtered(kind: SceneKind) -> f64 {
    let spec = SceneSpec::new(kind).with_size(MONO_SIZE.0, MONO_SIZE.1);
    let seq = render_mono_sequence(&spec, MONO_FRAMES, DESCENT_RATE, FRAME_DT).unwrap();
    let out = run_mono(&seq.frames, &PipelineConfig::default()).unwrap();
    out.states.last().unwrap().filtered_error
}

fn ac1() -> Outcome {
    let t0 = Instant::now();
    let rigid = mono_filtered(SceneKind::FlatPlane);
    let ripple = mono_filtered(SceneKind::RippleSurface);
    let elapsed = t0.elapsed();
    check(
        rigid < RIGID_MAX_PX
            && ripple > RIPPLE_MIN_PX
            && ripple >= MIN_SEPARATION * rigid
            && elapsed < MONO_BUDGET,
        format!(
            "rigid {rigid:.3} px, ripple {ripple:.3} px, ratio {:.1}, {:.1} s",
            ripple / rigid,
            elapsed.as_secs_f64()
        ),
    )
}

fn apply(m: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    let v = m * Vector3::new(p[0], p[1], 1.0);
    [v[0] / v[2], v[1] / v[2]]
}

fn ac2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_loop = 0.0f64;
    let mut worst_rec = 0.0f64;
    for _ in 0..HOMOGRAPHY_FIELDS {
        let mut h = Matrix3::identity();
        for i in 0..2 {
            for j in 0..2 {
                h[(i, j)] += rng.random_range(-0.05..0.05);
            }
            h[(i, 2)] = rng.random_range(-15.0..15.0);
        }
        h[(2, 0)] = rng.random_range(-1e-4..1e-4);
        h[(2, 1)] = rng.random_range(-1e-4..1e-4);
        let inv = h.try_inverse().unwrap();

        // exact field: P + Q maps onto P through h
        let pts: Vec<[f64; 2]> = (0..HOMOGRAPHY_POINTS)
            .map(|_| [rng.random_range(40.0..600.0), rng.random_range(40.0..440.0)])
            .collect();
        let exact: Vec<[f64; 2]> = pts
            .iter()
            .map(|p| {
                let m = apply(&inv, *p);
                [m[0] - p[0], m[1] - p[1]]
            })
            .collect();
        let flow = FlowField::new(pts.clone(), exact, vec![true; pts.len()], (640, 480)).unwrap();
        let fit = fit_homography(&flow).unwrap();
        let f = Matrix3::from_fn(|i, j| fit.matrix()[i][j]);
        let (a, b) = (f / f.norm(), h / h.norm());
        let rec = (a - b).norm().min((a + b).norm());
        worst_rec = worst_rec.max(rec);

        // noisy field, scored by a plain loop under the fitted model
        let noisy: Vec<[f64; 2]> = flow
            .displacements()
            .iter()
            .map(|q| {
                [
                    q[0] + rng.random_range(-1.0..1.0),
                    q[1] + rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let valid: Vec<bool> = (0..pts.len()).map(|_| rng.random_bool(0.9)).collect();
        let noisy = FlowField::new(pts.clone(), noisy, valid, (640, 480)).unwrap();
        let hn = fit_homography(&noisy).unwrap();
        let m = hn.matrix();
        let (mut sum, mut n) = (0.0, 0usize);
        for ((p, q), ok) in pts.iter().zip(noisy.displacements()).zip(noisy.valid()) {
            if !ok {
                continue;
            }
            let x = [p[0] + q[0], p[1] + q[1], 1.0];
            let hx: Vec<f64> = (0..3).map(|r| (0..3).map(|c| m[r][c] * x[c]).sum()).collect();
            let (ex, ey) = (p[0] - hx[0] / hx[2], p[1] - hx[1] / hx[2]);
            sum += ex * ex + ey * ey;
            n += 1;
        }
        let looped = (sum / n as f64).sqrt();
        worst_loop = worst_loop.max((homography_error(&noisy, &hn).unwrap() - looped).abs());
    }
    check(
        worst_loop < LOOP_TOL && worst_rec < RECOVERY_TOL,
        format!(
            "loop diff {worst_loop:.1e}, recovery rel err {worst_rec:.1e} over {HOMOGRAPHY_FIELDS} fields"
        ),
    )
}

fn ac3() -> Outcome {
    let p = BlockMatchParams::default();
    let (w, h) = (320usize, 120usize);
    let mut parts = Vec::new();
    let mut ok = true;
    for s in SHIFTS {
        // left pixel u shows what the right view has at u - s
        let base = noise_image(w + s, h, 30 + s as u64, 2.0);
        let left = GrayImage::from_fn(w, h, |x, y| base.get(x, y));
        let right = GrayImage::from_fn(w, h, |x, y| base.get(x + s, y));
        let d = compute_disparity(&left, &right, &p).unwrap();
        let r = p.block / 2;
        let mut vals = Vec::new();
        let mut total = 0usize;
        for v in r..h - r {
            for u in p.max_disp + r..w - r {
                total += 1;
                if let Some(x) = d.get(u, v) {
                    vals.push(x);
                }
            }
        }
        let frac = vals.len() as f64 / total as f64;
        vals.sort_by(|a, b| a.total_cmp(b));
        let med = vals.get(vals.len() / 2).copied().unwrap_or(f32::NAN);
        ok &= (med - s as f32).abs() <= MEDIAN_TOL && frac >= MIN_VALID_INTERIOR;
        parts.push(format!("s={s}: median {med:.2} valid {:.0}%", 100.0 * frac));
    }
    for kind in [SceneKind::FlatPlane, SceneKind::Ramp, SceneKind::BoxOnPlane] {
        let scene = render_stereo(&SceneSpec::new(kind)).unwrap();
        let d = compute_disparity(&scene.left, &scene.right, &p).unwrap();
        let rate = bad_pixel_rate(&d, scene.gt.disparity.as_ref().unwrap(), BAD_PIXEL_TAU).unwrap();
        ok &= rate < MAX_BAD_PERCENT;
        parts.push(format!("{} bad {rate:.2}%", kind.as_str()));
    }
    check(ok, parts.join(", "))
}

fn eigen_oracle(points: &[Vec3]) -> (f64, f64) {
    let n = points.len() as f64;
    let c = points.iter().fold(Vec3::ZERO, |a, p| a + *p) * (1.0 / n);
    let mut m = Matrix3::zeros();
    for p in points {
        let d = Vector3::new(p.x - c.x, p.y - c.y, p.z - c.z);
        m += d * d.transpose();
    }
    m /= n;
    let eig = SymmetricEigen::new(m);
    let (k, lambda) = eig.eigenvalues.argmin();
    let nz = eig.eigenvectors.column(k)[2].abs();
    (nz.clamp(0.0, 1.0).acos().to_degrees(), lambda.max(0.0).sqrt())
}

fn ac4() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for deg in RAMP_DEGS {
        let spec = SceneSpec {
            ramp_deg: deg,
            ..SceneSpec::new(SceneKind::Ramp)
        };
        let scene = render_stereo(&spec).unwrap();
        let d = compute_disparity(&scene.left, &scene.right, &cfg.block).unwrap();
        let up = spec.camera_orientation().inverse().rotate(Vec3::Z);
        let cloud = build_point_cloud(&d, &spec.camera, up, cfg.grid.max_range).unwrap();
        let cs = cfg.grid.cell_size;
        let grid = bin_and_fit(&cloud, cs, cfg.grid.min_points).unwrap();
        let mut by_key: HashMap<(i64, i64), Vec<Vec3>> = HashMap::new();
        for p in &cloud.points {
            let key = ((p.x / cs).floor() as i64, (p.y / cs).floor() as i64);
            by_key.entry(key).or_default().push(*p);
        }
        let (mut cells, mut worst_slope, mut worst_rough, mut worst_oracle) = (0, 0.0f64, 0.0f64, 0.0f64);
        for truth in &scene.gt.cell_slopes {
            let (i, j) = grid.index_of_key(truth.key);
            let Some(s) = grid.stats(i, j) else { continue };
            let (o_slope, o_rough) = eigen_oracle(&by_key[&truth.key]);
            worst_oracle = worst_oracle.max((s.slope_deg - o_slope).abs());
            ok &= (s.roughness_m - o_rough).abs() < ORACLE_ROUGH_TOL_M;
            worst_slope = worst_slope.max((s.slope_deg - truth.slope_deg).abs());
            worst_rough = worst_rough.max(s.roughness_m);
            cells += 1;
        }
        ok &= cells > 0
            && worst_slope <= SLOPE_TOL_DEG
            && worst_rough < MAX_ROUGHNESS_M
            && worst_oracle < ORACLE_SLOPE_TOL_DEG;
        parts.push(format!(
            "{deg}deg: {cells} cells, slope err {worst_slope:.2}, rough {worst_rough:.4} m"
        ));
    }
    check(ok, parts.join(", "))
}

fn stereo_case(kind: SceneKind, cfg: &PipelineConfig) -> (bool, Reason) {
    let spec = SceneSpec::new(kind);
    let scene = render_stereo(&spec).unwrap();
    let traj = static_trajectory(spec.camera_orientation(), 101);
    let imu = generate_imu(&traj, IMU_RATE, 1e-3, 0.02, 7).unwrap();
    let out = run_stereo(&scene.left, &scene.right, &imu, cfg).unwrap();
    (out.decision.safe, out.decision.reason)
}

fn ac5() -> Outcome {
    let cfg = PipelineConfig::default();
    let flat = stereo_case(SceneKind::FlatPlane, &cfg);
    let boxed = stereo_case(SceneKind::BoxOnPlane, &cfg);
    let blank = stereo_case(SceneKind::Textureless, &cfg);
    let ripple_safe = mono_filtered(SceneKind::RippleSurface) <= cfg.filter_threshold;
    let combined = combine(Some(ripple_safe), Some(flat.0)).unwrap();
    let ok = flat.0
        && !boxed.0
        && boxed.1 == Reason::Roughness
        && !blank.0
        && blank.1 == Reason::InsufficientData
        && !ripple_safe
        && !combined.overall;
    check(
        ok,
        format!(
            "flat {} / box {} ({}) / textureless {} ({}) / ripple mono {} / ripple+flat combined {}",
            label(flat.0),
            label(boxed.0),
            boxed.1.as_str(),
            label(blank.0),
            blank.1.as_str(),
            label(ripple_safe),
            label(combined.overall)
        ),
    )
}

fn label(safe: bool) -> &'static str {
    if safe {
        "safe"
    } else {
        "unsafe"
    }
}

fn ac6() -> Outcome {
    let n = (LEVEL_WITHIN_S * IMU_RATE) as usize + 1;
    let traj = static_trajectory(UnitQuaternion::IDENTITY, n);
    let imu = generate_imu(&traj, IMU_RATE, 0.005, 0.05, 6).unwrap();
    let q0 = UnitQuaternion::from_axis_angle(Vec3::X, INITIAL_TILT_DEG.to_radians());
    let mut s = OrientationState::new(q0, 0.1).unwrap();
    for sample in &imu {
        s = madgwick_update(&s, sample).unwrap();
    }
    let level_err = s.tilt().to_degrees();

    let w = std::f64::consts::FRAC_PI_2;
    let axis = Vec3::new(0.3, -0.5, 0.8).normalized().unwrap();
    let traj = spin_trajectory(
        UnitQuaternion::IDENTITY,
        axis,
        w,
        1.0 / IMU_RATE,
        IMU_RATE as usize + 1,
    );
    let imu = generate_imu(&traj, IMU_RATE, 0.0, 0.0, 0).unwrap();
    let mut s = OrientationState::new(UnitQuaternion::IDENTITY, 0.0).unwrap();
    for sample in &imu {
        s = madgwick_update(&s, sample).unwrap();
    }
    // q(t) = exp(w t axis / 2), written out
    let half = 0.5 * w * 1.0;
    let (sn, cs) = half.sin_cos();
    let oracle = UnitQuaternion::new_normalize(cs, sn * axis.x, sn * axis.y, sn * axis.z);
    let spin_err = s.q.angle_to(&oracle).to_degrees();
    check(
        level_err < LEVEL_TOL_DEG && spin_err < SPIN_TOL_DEG,
        format!("level error {level_err:.3} deg after {LEVEL_WITHIN_S} s, spin error {spin_err:.4} deg"),
    )
}

fn ac7() -> Outcome {
    let map = |vals: &[f32]| DisparityMap::from_values(vals.len(), 1, vals.to_vec()).unwrap();
    let gt = map(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
    let same = bad_pixel_rate(&gt, &gt, 4.0).unwrap();
    let one_off = map(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 20.0]);
    let ten = bad_pixel_rate(&one_off, &gt, 4.0).unwrap();
    let none = map(&[INVALID_DISPARITY; 10]);
    let all = bad_pixel_rate(&none, &gt, 4.0).unwrap();
    let mut ok = same == 0.0 && ten == 10.0 && all == 100.0;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut removed = 0usize;
    for _ in 0..LR_PAIRS {
        let mut random_map = || {
            let vals: Vec<f32> = (0..32 * 8)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        INVALID_DISPARITY
                    } else {
                        rng.random_range(0.0..12.0)
                    }
                })
                .collect();
            DisparityMap::from_values(32, 8, vals).unwrap()
        };
        let (dl, dr) = (random_map(), random_map());
        let tol = rng.random_range(0.0..3.0);
        let out = left_right_check(&dl, &dr, tol).unwrap();
        for v in 0..8 {
            for u in 0..32 {
                if out.is_valid(u, v) {
                    ok &= dl.is_valid(u, v) && out.get(u, v) == dl.get(u, v);
                } else if dl.is_valid(u, v) {
                    removed += 1;
                }
            }
        }
    }
    check(
        ok,
        format!("hand counts {same}/{ten}/{all}%, LR subset held on {LR_PAIRS} pairs ({removed} removed)"),
    )
}

fn ac8() -> Outcome {
    let spec = SceneSpec::new(SceneKind::FlatPlane).with_size(STEREO_SIZE.0, STEREO_SIZE.1);
    let scene = render_stereo(&spec).unwrap();
    let traj = static_trajectory(spec.camera_orientation(), 101);
    let imu = generate_imu(&traj, IMU_RATE, 1e-3, 0.02, 8).unwrap();
    let cfg = PipelineConfig::default();
    let t0 = Instant::now();
    let out = run_stereo(&scene.left, &scene.right, &imu, &cfg).unwrap();
    let elapsed = t0.elapsed();
    check(
        elapsed < STEREO_BUDGET && out.decision.safe,
        format!(
            "run_stereo {}x{} in {:.0} ms",
            STEREO_SIZE.0,
            STEREO_SIZE.1,
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("AC1 planarity discrimination", ac1),
        ("AC2 homography oracle", ac2),
        ("AC3 stereo translation fidelity", ac3),
        ("AC4 plane-fit correctness", ac4),
        ("AC5 decision reproduction", ac5),
        ("AC6 Madgwick convergence", ac6),
        ("AC7 metric unit checks", ac7),
        ("AC8 stereo performance", ac8),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                println!("[FAIL] {name}: {detail}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}
