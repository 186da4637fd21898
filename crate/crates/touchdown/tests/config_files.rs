use std::fs;

use touchdown::config::KEYS;
use touchdown::scene_file::SceneFile;
use touchdown::PipelineConfig;

#[test]
fn load_records_source() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("tuned.cfg");
    fs::write(
        &p,
        "# thresholds\ngrid.slope_max_deg = 10\nstereo.lr_check = true\n",
    )
    .unwrap();
    let c = PipelineConfig::load(&p).unwrap();
    assert_eq!(c.source.as_deref(), Some(p.as_path()));
    assert_eq!(c.grid.slope_max_deg, 10.0);
    assert!(c.lr_check);
}

#[test]
fn each_key_rejects_garbage() {
    for key in KEYS {
        let err = PipelineConfig::parse(&format!("{key} = x1\n"), "c").unwrap_err();
        assert_eq!(err.kind(), "config", "{key}");
        assert!(err.to_string().starts_with("c:1:"), "{err}");
    }
}

#[test]
fn violations_of_stage_preconditions() {
    let bad = [
        "flow.window = 4",
        "flow.levels = 0",
        "flow.stride = 0",
        "flow.eps = 0",
        "filter.alpha = -0.1",
        "filter.threshold = 0",
        "stereo.max_disp = 0",
        "stereo.uniqueness_ratio = 0.5",
        "imu.beta = -1",
        "grid.cell_size = 0",
        "grid.min_points = 2",
        "grid.max_range = inf",
        "camera.baseline = 0",
        "output.overlay_scale = 0",
        "imu.mount_yaw_deg = nan",
    ];
    for line in bad {
        assert!(PipelineConfig::parse(line, "c").is_err(), "{line}");
    }
}

#[test]
fn mount_rotates_imu_axes() {
    let c = PipelineConfig::parse("imu.mount_roll_deg = 180\n", "c").unwrap();
    let up = c.imu_mount().rotate(touchdown_core::Vec3::Z);
    assert!((up.z + 1.0).abs() < 1e-12);
}

#[test]
fn scene_files_reject_unknown_keys() {
    let err = SceneFile::parse("kind = ramp\nramp = 10\n", "s").unwrap_err();
    assert!(err.to_string().contains("s:2: unknown key `ramp`"), "{err}");
}
