//! JSON reports.

use std::path::Path;

use serde::{Deserialize, Serialize};
use touchdown_core::terrain::{CellVerdict, GridMap, LandingDecision};
use touchdown_core::Vec3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub i: usize,
    pub j: usize,
    /// Offset of the cell from the nadir corner, in cells.
    pub key: [i64; 2],
    pub count: usize,
    pub slope_deg: Option<f64>,
    pub roughness_m: Option<f64>,
    pub mean_height: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintCell {
    pub i: i64,
    pub j: i64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoReport {
    pub safe: bool,
    pub reason: String,
    /// World up in camera coordinates.
    pub up: [f64; 3],
    pub slope_max_deg: f64,
    pub rough_max_m: f64,
    pub cell_size: f64,
    pub grid_origin: [f64; 2],
    pub grid_dims: [usize; 2],
    pub valid_disparities: usize,
    pub points: usize,
    pub footprint: Vec<FootprintCell>,
    pub cells: Vec<CellReport>,
    pub warnings: Vec<String>,
}

pub fn verdict_str(v: CellVerdict) -> &'static str {
    match v {
        CellVerdict::Safe => "safe",
        CellVerdict::Unsafe => "unsafe",
        CellVerdict::Unknown => "unknown",
    }
}

impl StereoReport {
    pub fn new(
        grid: &GridMap,
        decision: &LandingDecision,
        up: Vec3,
        valid_disparities: usize,
        points: usize,
        warnings: Vec<String>,
    ) -> Self {
        let footprint = decision
            .footprint_cells
            .iter()
            .zip(&decision.per_cell_verdict)
            .map(|(&(i, j), &v)| FootprintCell {
                i,
                j,
                verdict: verdict_str(v).to_string(),
            })
            .collect();
        let cells = grid
            .iter_cells()
            .filter(|(_, _, count, _)| *count > 0)
            .map(|(i, j, count, stats)| {
                let (ki, kj) = grid.cell_key(i as i64, j as i64);
                CellReport {
                    i,
                    j,
                    key: [ki, kj],
                    count,
                    slope_deg: stats.map(|s| s.slope_deg),
                    roughness_m: stats.map(|s| s.roughness_m),
                    mean_height: stats.map(|s| s.mean_height),
                }
            })
            .collect();
        let (ox, oy) = grid.origin();
        let (nx, ny) = grid.dims();
        Self {
            safe: decision.safe,
            reason: decision.reason.as_str().to_string(),
            up: [up.x, up.y, up.z],
            slope_max_deg: decision.thresholds.slope_max_deg,
            rough_max_m: decision.thresholds.rough_max_m,
            cell_size: grid.cell_size(),
            grid_origin: [ox, oy],
            grid_dims: [nx, ny],
            valid_disparities,
            points,
            footprint,
            cells,
            warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonoReport {
    pub safe: bool,
    pub frames: usize,
    pub final_raw_error: f64,
    pub final_filtered_error: f64,
    pub threshold: f64,
    pub degenerate_pairs: usize,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T, path: &Path) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    crate::formats::write(path, &to_json(value, path)?)
}

/// Only the `safe` flag of any report.
#[derive(Debug, Deserialize)]
struct SafeOnly {
    #[serde(alias = "overall")]
    safe: bool,
}

/// Reads the `safe` field of a mono, stereo or combined report.
pub fn read_safe_flag(path: &Path) -> Result<bool> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let r: SafeOnly = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(r.safe)
}
