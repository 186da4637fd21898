//! Writes a simulated scene to disk.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use touchdown_core::sim::{generate_imu, render_mono_sequence, render_stereo, static_trajectory};

use crate::csv_io::{flow_rows, write_rows, ImuRow};
use crate::error::{Error, Result};
use crate::formats::{write_pfm, write_pgm};
use crate::report::write_json;
use crate::scene_file::SceneFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSlopeTruth {
    pub key: [i64; 2],
    pub slope_deg: f64,
}

/// Labels written next to the rendered files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub kind: String,
    pub safe: bool,
    pub width: usize,
    pub height: usize,
    pub cell_slopes: Vec<CellSlopeTruth>,
    /// Row-major 3x3 matrices mapping frame `k + 1` pixels into frame `k`,
    /// present for rigid planar scenes.
    pub homographies: Vec<[[f64; 3]; 3]>,
}

/// Renders `scene` into `out`, returning the paths written in order.
///
/// Files: `left.pgm`, `right.pgm`, `disp_gt.pfm`, `frames/frame_NNN.pgm`,
/// `flow_gt_NNN.csv` (frame NNN to NNN+1), `imu.csv` and `truth.json`.
pub fn write_scene(scene: &SceneFile, out: &Path) -> Result<Vec<PathBuf>> {
    scene.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let spec = &scene.spec;
    let mut written = Vec::new();
    let mut put = |name: String| {
        let p = out.join(name);
        written.push(p.clone());
        p
    };

    let stereo = render_stereo(spec)?;
    write_pgm(&put("left.pgm".into()), &stereo.left)?;
    write_pgm(&put("right.pgm".into()), &stereo.right)?;
    if let Some(d) = &stereo.gt.disparity {
        write_pfm(&put("disp_gt.pfm".into()), d)?;
    }

    let mut homographies = Vec::new();
    if scene.frames >= 2 {
        let seq = render_mono_sequence(spec, scene.frames, scene.descent_rate, scene.frame_dt)?;
        let frames_dir = out.join("frames");
        fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
        for (k, f) in seq.frames.iter().enumerate() {
            write_pgm(&put(format!("frames/frame_{k:03}.pgm")), f)?;
        }
        for (k, step) in seq.steps.iter().enumerate() {
            if let Some(flow) = &step.flow {
                write_rows(&put(format!("flow_gt_{k:03}.csv")), &flow_rows(flow))?;
            }
            if let Some(h) = &step.homography {
                homographies.push(*h.matrix());
            }
        }
    }

    if scene.imu_seconds > 0.0 {
        let traj = static_trajectory(spec.camera_orientation(), scene.imu_poses());
        let imu = generate_imu(
            &traj,
            scene.imu_rate,
            scene.gyro_noise,
            scene.accel_noise,
            spec.texture_seed,
        )?;
        let rows: Vec<ImuRow> = imu.iter().map(ImuRow::from).collect();
        write_rows(&put("imu.csv".into()), &rows)?;
    }

    let truth = SceneTruth {
        kind: spec.kind.as_str().to_string(),
        safe: spec.safe_label(),
        width: spec.image_size.0,
        height: spec.image_size.1,
        cell_slopes: stereo
            .gt
            .cell_slopes
            .iter()
            .map(|c| CellSlopeTruth {
                key: [c.key.0, c.key.1],
                slope_deg: c.slope_deg,
            })
            .collect(),
        homographies,
    };
    write_json(&put("truth.json".into()), &truth)?;
    Ok(written)
}
