//! End-to-end pipelines behind the CLI subcommands.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use touchdown_core::homography::{mono_evaluate, PlanarityState};
use touchdown_core::imu::{gravity_up, madgwick_update, ImuSample, OrientationState};
use touchdown_core::stereo::{
    bad_pixel_rate, compute_disparity, compute_disparity_right, left_right_check, DisparityMap,
};
use touchdown_core::terrain::{
    bin_and_fit, build_point_cloud, classify_footprint, render_overlay, GridMap, LandingDecision, RgbImage,
};
use touchdown_core::{GrayImage, Vec3};

use crate::config::PipelineConfig;
use crate::csv_io::{BenchRow, MonoLogRow};
use crate::error::{Error, Result};
use crate::formats::{read_pfm, read_pgm};
use crate::report::{MonoReport, StereoReport};

/// Bad-pixel threshold of the bench, pixels.
pub const BENCH_TAU: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MonoOutcome {
    /// One state per consecutive frame pair.
    pub states: Vec<PlanarityState>,
    pub safe: bool,
}

impl MonoOutcome {
    pub fn log(&self) -> Vec<MonoLogRow> {
        self.states
            .iter()
            .enumerate()
            .map(|(k, s)| MonoLogRow::from_state(k + 1, s))
            .collect()
    }

    pub fn report(&self) -> MonoReport {
        let last = self.states.last().expect("at least one pair");
        MonoReport {
            safe: self.safe,
            frames: self.states.len() + 1,
            final_raw_error: last.raw_error,
            final_filtered_error: last.filtered_error,
            threshold: last.threshold,
            degenerate_pairs: self.states.iter().filter(|s| s.degenerate).count(),
        }
    }
}

/// Runs the planarity gate over consecutive frame pairs. The verdict is the
/// gate after the last pair.
pub fn run_mono(frames: &[GrayImage], cfg: &PipelineConfig) -> Result<MonoOutcome> {
    if frames.len() < 2 {
        return Err(Error::Usage(format!(
            "mono needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    cfg.validate()?;
    let mut state = PlanarityState::new(cfg.filter_alpha, cfg.filter_threshold)?;
    let mut states = Vec::with_capacity(frames.len() - 1);
    for pair in frames.windows(2) {
        state = mono_evaluate(&pair[0], &pair[1], &state, &cfg.mono)?;
        states.push(state);
    }
    Ok(MonoOutcome {
        safe: state.safe,
        states,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoOutcome {
    pub disparity: DisparityMap,
    pub up: Vec3,
    pub grid: GridMap,
    pub decision: LandingDecision,
    pub overlay: RgbImage,
    pub report: StereoReport,
}

/// Up direction in camera coordinates from the IMU stream, or the nominal
/// down-looking pose when the stream is empty.
pub fn estimate_up(imu: &[ImuSample], cfg: &PipelineConfig, warnings: &mut Vec<String>) -> Result<Vec3> {
    let Some(first) = imu.first() else {
        warnings.push("no IMU samples; assuming the camera looks straight down".into());
        return Ok(Vec3::new(0.0, 0.0, -1.0));
    };
    let mut state = if first.accel_trusted() {
        OrientationState::from_accel(first.accel, cfg.beta)?
    } else {
        warnings.push("first IMU sample is not near 1 g; starting from identity".into());
        OrientationState::new(Default::default(), cfg.beta)?
    };
    for s in imu {
        state = madgwick_update(&state, s)?;
    }
    let up = cfg.imu_mount().rotate(gravity_up(&state));
    up.normalized()
        .ok_or_else(|| Error::Usage("IMU stream gives no usable up direction".into()))
}

pub fn run_stereo(
    left: &GrayImage,
    right: &GrayImage,
    imu: &[ImuSample],
    cfg: &PipelineConfig,
) -> Result<StereoOutcome> {
    cfg.validate()?;
    if left.size() != right.size() {
        return Err(touchdown_core::Error::SizeMismatch {
            expected: left.size(),
            got: right.size(),
        }
        .into());
    }
    let (w, h) = left.size();
    let camera = cfg.camera.intrinsics(w, h)?;

    let mut warnings = Vec::new();
    let up = estimate_up(imu, cfg, &mut warnings)?;

    let mut disparity = compute_disparity(left, right, &cfg.block)?;
    if cfg.lr_check {
        let right_map = compute_disparity_right(left, right, &cfg.block)?;
        disparity = left_right_check(&disparity, &right_map, cfg.block.lr_tolerance)?;
    }
    let g = &cfg.grid;
    let cloud = build_point_cloud(&disparity, &camera, up, g.max_range)?;
    let grid = bin_and_fit(&cloud, g.cell_size, g.min_points)?;
    let decision = classify_footprint(&grid, g.slope_max_deg, g.rough_max_m, g.footprint_m)?;
    let overlay = render_overlay(&grid, &decision, cfg.overlay_scale);
    let report = StereoReport::new(
        &grid,
        &decision,
        up,
        disparity.valid_count(),
        cloud.len(),
        warnings,
    );
    Ok(StereoOutcome {
        disparity,
        up,
        grid,
        decision,
        overlay,
        report,
    })
}

fn bench_scene(dir: &Path, cfg: &PipelineConfig, inject_gt: bool) -> Result<(f64, f64)> {
    let gt = read_pfm(&dir.join("disp_gt.pfm"))?;
    if inject_gt {
        let bm = bad_pixel_rate(&gt, &gt, BENCH_TAU)?;
        return Ok((bm, bm));
    }
    let left = read_pgm(&dir.join("left.pgm"))?;
    let right = read_pgm(&dir.join("right.pgm"))?;
    let d = compute_disparity(&left, &right, &cfg.block)?;
    let d_right = compute_disparity_right(&left, &right, &cfg.block)?;
    let d_lrc = left_right_check(&d, &d_right, cfg.block.lr_tolerance)?;
    Ok((
        bad_pixel_rate(&d, &gt, BENCH_TAU)?,
        bad_pixel_rate(&d_lrc, &gt, BENCH_TAU)?,
    ))
}

/// Bad-pixel rates of BM and BM+LRC for every scene subdirectory, sorted by
/// name. A scene that fails keeps its row with the error text. With
/// `inject_gt` the ground truth is scored against itself.
pub fn run_bench(dataset: &Path, cfg: &PipelineConfig, inject_gt: bool) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let entries = fs::read_dir(dataset).map_err(|e| Error::io(dataset, e))?;
    let mut scenes = Vec::new();
    for e in entries {
        let e = e.map_err(|e| Error::io(dataset, e))?;
        if e.path().is_dir() {
            scenes.push(e.path());
        }
    }
    if scenes.is_empty() {
        return Err(Error::Usage(format!(
            "{}: no scene directories",
            dataset.display()
        )));
    }
    scenes.sort();
    Ok(scenes
        .iter()
        .map(|dir| {
            let scene = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            match bench_scene(dir, cfg, inject_gt) {
                Ok((bm, bm_lrc)) => BenchRow {
                    scene,
                    bm: Some(bm),
                    bm_lrc: Some(bm_lrc),
                    error: String::new(),
                },
                Err(e) => BenchRow {
                    scene,
                    bm: None,
                    bm_lrc: None,
                    error: e.to_string(),
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedVerdict {
    /// `None` when the monocular gate was not run.
    pub mono_safe: Option<bool>,
    pub stereo_safe: Option<bool>,
    pub overall: bool,
    pub reasons: Vec<String>,
}

/// Conservative AND: a gate that was not run neither vetoes nor approves,
/// but at least one must have run.
pub fn combine(mono: Option<bool>, stereo: Option<bool>) -> Result<CombinedVerdict> {
    if mono.is_none() && stereo.is_none() {
        return Err(Error::Usage(
            "combine needs at least one evaluated verdict".into(),
        ));
    }
    let mut reasons = Vec::new();
    for (name, v) in [("mono", mono), ("stereo", stereo)] {
        match v {
            Some(false) => reasons.push(format!("{name}_unsafe")),
            None => reasons.push(format!("{name}_not_evaluated")),
            Some(true) => {}
        }
    }
    Ok(CombinedVerdict {
        mono_safe: mono,
        stereo_safe: stereo,
        overall: mono != Some(false) && stereo != Some(false),
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_table() {
        assert!(combine(Some(true), Some(true)).unwrap().overall);
        assert!(!combine(Some(false), Some(true)).unwrap().overall);
        assert!(!combine(None, Some(false)).unwrap().overall);
        assert!(combine(None, Some(true)).unwrap().overall);
        assert!(combine(None, None).is_err());
        assert_eq!(
            combine(Some(false), None).unwrap().reasons,
            vec!["mono_unsafe", "stereo_not_evaluated"]
        );
    }

    #[test]
    fn mono_needs_two_frames() {
        let f = GrayImage::constant(64, 64, 0.5);
        let err = run_mono(&[f], &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "usage");
    }

    #[test]
    fn empty_imu_warns() {
        let mut w = Vec::new();
        let up = estimate_up(&[], &PipelineConfig::default(), &mut w).unwrap();
        assert_eq!(up, Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(w.len(), 1);
    }
}
