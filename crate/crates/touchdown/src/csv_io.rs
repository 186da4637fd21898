//! CSV tables: mono logs, IMU streams, ground-truth flow and bench results.

use std::fs::File;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use touchdown_core::flow::FlowField;
use touchdown_core::homography::PlanarityState;
use touchdown_core::imu::ImuSample;
use touchdown_core::Vec3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonoLogRow {
    /// Index of the second frame of the pair.
    pub frame: usize,
    pub raw_error: f64,
    pub filtered_error: f64,
    pub valid_points: usize,
    pub degenerate: bool,
    pub safe: bool,
}

impl MonoLogRow {
    pub fn from_state(frame: usize, s: &PlanarityState) -> Self {
        Self {
            frame,
            raw_error: s.raw_error,
            filtered_error: s.filtered_error,
            valid_points: s.valid_points,
            degenerate: s.degenerate,
            safe: s.safe,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuRow {
    pub dt: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl From<&ImuSample> for ImuRow {
    fn from(s: &ImuSample) -> Self {
        Self {
            dt: s.dt,
            gx: s.gyro.x,
            gy: s.gyro.y,
            gz: s.gyro.z,
            ax: s.accel.x,
            ay: s.accel.y,
            az: s.accel.z,
        }
    }
}

impl From<ImuRow> for ImuSample {
    fn from(r: ImuRow) -> Self {
        ImuSample {
            gyro: Vec3::new(r.gx, r.gy, r.gz),
            accel: Vec3::new(r.ax, r.ay, r.az),
            dt: r.dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
    pub valid: bool,
}

pub fn flow_rows(f: &FlowField) -> Vec<FlowRow> {
    f.points()
        .iter()
        .zip(f.displacements())
        .zip(f.valid())
        .map(|((p, d), &valid)| FlowRow {
            x: p[0],
            y: p[1],
            dx: d[0],
            dy: d[1],
            valid,
        })
        .collect()
}

/// One bench row; rates are percentages, empty when the scene failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scene: String,
    pub bm: Option<f64>,
    pub bm_lrc: Option<f64>,
    pub error: String,
}

pub fn to_bytes<T: Serialize>(rows: &[T], path: &Path) -> Result<Vec<u8>> {
    let wrap = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| wrap(csv::Error::from(e.into_error())))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let bytes = to_bytes(rows, path)?;
    crate::formats::write(path, &bytes)
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    r.deserialize()
        .map(|row| {
            row.map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })
        })
        .collect()
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuSample>> {
    let rows: Vec<ImuRow> = read_rows(path)?;
    let samples: Vec<ImuSample> = rows.into_iter().map(ImuSample::from).collect();
    for (k, s) in samples.iter().enumerate() {
        s.validate()
            .map_err(|e| Error::format(path, format!("row {}: {e}", k + 1)))?;
    }
    Ok(samples)
}
