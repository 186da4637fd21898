//! Gravity-aligned point cloud, per-cell plane fits and the footprint
//! landing decision.
//!
//! The aligned frame has z pointing up and its origin at the left camera
//! center, so the nadir is `(x, y) = (0, 0)`. Grid cells are square and the
//! nadir always falls on a cell corner; cell `(i, j)` covers
//! `[origin.x + i s, origin.x + (i + 1) s) x [origin.y + j s, origin.y + (j + 1) s)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{disparity_to_point, CameraIntrinsics, UnitQuaternion, Vec3};
use crate::linalg::symmetric_eigen;
use crate::stereo::DisparityMap;
use crate::{math, Error, Result};

pub const DEFAULT_CELL_SIZE: f64 = 0.5;
pub const DEFAULT_FOOTPRINT: f64 = 1.0;
pub const DEFAULT_SLOPE_MAX_DEG: f64 = 15.0;
pub const DEFAULT_ROUGH_MAX_M: f64 = 0.05;
pub const DEFAULT_MIN_POINTS: usize = 20;
pub const DEFAULT_MAX_RANGE: f64 = 20.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rotation from the camera frame into the gravity-aligned frame, given the
/// world up direction expressed in camera coordinates.
///
/// A down-looking camera is the nominal pose, so the camera frame is first
/// turned half a revolution about its x axis (optical axis to world down,
/// image rows to world -y) and then tilted by the minimal rotation that
/// brings the measured up onto +z. Yaw stays tied to the camera x axis.
pub fn gravity_alignment(up: Vec3) -> Result<UnitQuaternion> {
    let up = up
        .normalized()
        .ok_or(Error::InvalidInput("up direction must be non-zero and finite"))?;
    let flip = UnitQuaternion::from_axis_angle(Vec3::X, core::f64::consts::PI);
    let tilt = UnitQuaternion::rotation_between(flip.rotate(up), Vec3::Z, Vec3::X);
    Ok(tilt * flip)
}

/// Lifts every valid disparity into the gravity-aligned frame, dropping
/// points farther than `max_range` along the optical axis.
pub fn build_point_cloud(
    d: &DisparityMap,
    k: &CameraIntrinsics,
    up: Vec3,
    max_range: f64,
) -> Result<PointCloud> {
    k.validate()?;
    if !(max_range > 0.0) || !max_range.is_finite() {
        return Err(Error::InvalidInput("max_range must be positive"));
    }
    if (up.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput("up must be a unit vector"));
    }
    let align = gravity_alignment(up)?;
    let min_disp = k.fx * k.baseline / max_range;
    let mut points = Vec::new();
    for v in 0..d.height() {
        for u in 0..d.width() {
            let Some(disp) = d.get(u, v) else { continue };
            let disp = disp as f64;
            if disp < min_disp || disp <= 0.0 {
                continue;
            }
            let p = disparity_to_point(u as f64, v as f64, disp, k)?;
            if p.z > max_range {
                continue;
            }
            points.push(align.rotate(p));
        }
    }
    Ok(PointCloud { points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    /// Unit plane normal with `z >= 0`.
    pub normal: Vec3,
    pub slope_deg: f64,
    /// RMS orthogonal distance of the cell's points to the fitted plane.
    pub roughness_m: f64,
    pub count: usize,
    pub mean_height: f64,
}

/// Total least-squares plane through `points`: the normal is the eigenvector
/// of the smallest eigenvalue of the centered scatter matrix.
pub fn fit_plane(points: &[Vec3]) -> Option<CellStats> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Vec3::ZERO, |a, p| a + *p) * (1.0 / n);
    let mut cov = [[0.0f64; 3]; 3];
    for p in points {
        let q = *p - c;
        let q = [q.x, q.y, q.z];
        for i in 0..3 {
            for j in i..3 {
                cov[i][j] += q[i] * q[j];
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    let (_, vecs) = symmetric_eigen(&cov);
    let mut normal = Vec3::new(vecs[0][0], vecs[1][0], vecs[2][0]).normalized()?;
    if normal.z < 0.0 {
        normal = -normal;
    }
    let ss: f64 = points
        .iter()
        .map(|p| {
            let r = (*p - c).dot(normal);
            r * r
        })
        .sum();
    Some(CellStats {
        normal,
        slope_deg: math::acos(normal.z.clamp(-1.0, 1.0)).to_degrees(),
        roughness_m: math::sqrt(ss / n),
        count: points.len(),
        mean_height: c.z,
    })
}

/// Terrain grid of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    cell_size: f64,
    /// Integer cell key (`floor(x / cell_size)`) of column/row 0.
    origin_key: (i64, i64),
    nx: usize,
    ny: usize,
    cells: Vec<Option<CellStats>>,
    counts: Vec<usize>,
    min_points: usize,
}

impl GridMap {
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Aligned-frame coordinates of the corner of cell `(0, 0)`.
    pub fn origin(&self) -> (f64, f64) {
        (
            self.origin_key.0 as f64 * self.cell_size,
            self.origin_key.1 as f64 * self.cell_size,
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn min_points(&self) -> usize {
        self.min_points
    }

    /// Cell whose lower corner is the nadir.
    pub fn nadir_cell(&self) -> (usize, usize) {
        ((-self.origin_key.0) as usize, (-self.origin_key.1) as usize)
    }

    pub fn in_bounds(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny
    }

    pub fn stats(&self, i: i64, j: i64) -> Option<&CellStats> {
        if !self.in_bounds(i, j) {
            return None;
        }
        self.cells[j as usize * self.nx + i as usize].as_ref()
    }

    pub fn count(&self, i: i64, j: i64) -> usize {
        if !self.in_bounds(i, j) {
            return 0;
        }
        self.counts[j as usize * self.nx + i as usize]
    }

    /// Cell offset relative to the nadir corner (`floor(x / cell_size)`).
    pub fn cell_key(&self, i: i64, j: i64) -> (i64, i64) {
        (i + self.origin_key.0, j + self.origin_key.1)
    }

    pub fn index_of_key(&self, key: (i64, i64)) -> (i64, i64) {
        (key.0 - self.origin_key.0, key.1 - self.origin_key.1)
    }

    /// Every in-bounds cell, row-major (`j` outer).
    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, usize, usize, Option<&CellStats>)> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).map(move |i| {
                let k = j * self.nx + i;
                (i, j, self.counts[k], self.cells[k].as_ref())
            })
        })
    }
}

fn cell_key_of(x: f64, cell_size: f64) -> i64 {
    math::floor(x / cell_size) as i64
}

/// Bins the cloud into square cells and fits a plane to every cell holding at
/// least `min_points` points.
pub fn bin_and_fit(cloud: &PointCloud, cell_size: f64, min_points: usize) -> Result<GridMap> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::InvalidInput("cell size must be positive"));
    }
    if min_points < 3 {
        return Err(Error::InvalidInput("min_points must be at least 3"));
    }
    // bounds always include the nadir cell
    let (mut kx0, mut ky0, mut kx1, mut ky1) = (0i64, 0i64, 0i64, 0i64);
    let mut keys = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        if !p.is_finite() {
            return Err(Error::InvalidInput("point cloud contains non-finite points"));
        }
        let (kx, ky) = (cell_key_of(p.x, cell_size), cell_key_of(p.y, cell_size));
        kx0 = kx0.min(kx);
        ky0 = ky0.min(ky);
        kx1 = kx1.max(kx);
        ky1 = ky1.max(ky);
        keys.push((kx, ky));
    }
    let nx = (kx1 - kx0 + 1) as usize;
    let ny = (ky1 - ky0 + 1) as usize;
    let index = |(kx, ky): (i64, i64)| (ky - ky0) as usize * nx + (kx - kx0) as usize;

    // counting sort of points by cell
    let mut counts = vec![0usize; nx * ny];
    for k in &keys {
        counts[index(*k)] += 1;
    }
    let mut start = vec![0usize; nx * ny + 1];
    for c in 0..nx * ny {
        start[c + 1] = start[c] + counts[c];
    }
    let mut fill = start.clone();
    let mut sorted = vec![Vec3::ZERO; cloud.len()];
    for (p, k) in cloud.points.iter().zip(&keys) {
        let c = index(*k);
        sorted[fill[c]] = *p;
        fill[c] += 1;
    }

    let cells = (0..nx * ny)
        .map(|c| {
            if counts[c] < min_points {
                None
            } else {
                fit_plane(&sorted[start[c]..start[c + 1]])
            }
        })
        .collect();

    Ok(GridMap {
        cell_size,
        origin_key: (kx0, ky0),
        nx,
        ny,
        cells,
        counts,
        min_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellVerdict {
    Safe,
    Unsafe,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    Slope,
    Roughness,
    InsufficientData,
    None,
}

impl Reason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reason::Slope => "slope",
            Reason::Roughness => "roughness",
            Reason::InsufficientData => "insufficient_data",
            Reason::None => "none",
        }
    }
}

/// Thresholds a cell is judged against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub slope_max_deg: f64,
    pub rough_max_m: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            slope_max_deg: DEFAULT_SLOPE_MAX_DEG,
            rough_max_m: DEFAULT_ROUGH_MAX_M,
        }
    }
}

impl Thresholds {
    /// Verdict and failing criterion of one cell. Roughness is checked before
    /// slope: an obstacle edge inside a cell also tilts the fitted plane.
    pub fn judge(&self, stats: Option<&CellStats>) -> (CellVerdict, Reason) {
        match stats {
            None => (CellVerdict::Unknown, Reason::InsufficientData),
            Some(s) if s.roughness_m > self.rough_max_m => (CellVerdict::Unsafe, Reason::Roughness),
            Some(s) if s.slope_deg > self.slope_max_deg => (CellVerdict::Unsafe, Reason::Slope),
            Some(_) => (CellVerdict::Safe, Reason::None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandingDecision {
    pub safe: bool,
    /// Grid indices `(i, j)` of the footprint, row-major; may lie outside
    /// the grid.
    pub footprint_cells: Vec<(i64, i64)>,
    pub per_cell_verdict: Vec<CellVerdict>,
    pub reason: Reason,
    pub thresholds: Thresholds,
}

impl LandingDecision {
    pub fn in_footprint(&self, i: i64, j: i64) -> bool {
        self.footprint_cells.contains(&(i, j))
    }
}

/// Judges the `ceil(footprint / cell)^2` block of cells centered on the
/// nadir. Any unsafe or unknown cell makes the decision unsafe.
pub fn classify_footprint(
    grid: &GridMap,
    slope_max: f64,
    rough_max: f64,
    footprint: f64,
) -> Result<LandingDecision> {
    if !(slope_max > 0.0) || !(rough_max > 0.0) {
        return Err(Error::InvalidInput("thresholds must be positive"));
    }
    if !(footprint >= grid.cell_size) || !footprint.is_finite() {
        return Err(Error::InvalidInput("footprint must be at least one cell"));
    }
    let thresholds = Thresholds {
        slope_max_deg: slope_max,
        rough_max_m: rough_max,
    };
    let n = math::ceil(footprint / grid.cell_size - 1e-9) as i64;
    let lo = -(n / 2);
    let mut footprint_cells = Vec::with_capacity((n * n) as usize);
    let mut per_cell_verdict = Vec::with_capacity((n * n) as usize);
    let mut reason = Reason::None;
    for kj in lo..lo + n {
        for ki in lo..lo + n {
            let (i, j) = grid.index_of_key((ki, kj));
            let (verdict, why) = thresholds.judge(grid.stats(i, j));
            if verdict != CellVerdict::Safe && reason == Reason::None {
                reason = why;
            }
            footprint_cells.push((i, j));
            per_cell_verdict.push(verdict);
        }
    }
    Ok(LandingDecision {
        safe: per_cell_verdict.iter().all(|v| *v == CellVerdict::Safe),
        footprint_cells,
        per_cell_verdict,
        reason,
        thresholds,
    })
}

/// 8-bit interleaved RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let k = 3 * (y * self.width + x);
        [self.data[k], self.data[k + 1], self.data[k + 2]]
    }
}

pub const GREEN: [u8; 3] = [0, 255, 0];
pub const YELLOW: [u8; 3] = [255, 255, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];
pub const RED: [u8; 3] = [255, 0, 0];
pub const BLACK: [u8; 3] = [0, 0, 0];

/// Color of cell `(i, j)`: footprint green/yellow, elsewhere blue/red, and
/// black for cells without data outside the footprint.
pub fn overlay_color(grid: &GridMap, decision: &LandingDecision, i: i64, j: i64) -> [u8; 3] {
    let (verdict, _) = decision.thresholds.judge(grid.stats(i, j));
    match (decision.in_footprint(i, j), verdict) {
        (true, CellVerdict::Safe) => GREEN,
        (true, _) => YELLOW,
        (false, CellVerdict::Safe) => BLUE,
        (false, CellVerdict::Unsafe) => RED,
        (false, CellVerdict::Unknown) => BLACK,
    }
}

/// One `scale x scale` block per cell, +y up (grid row `ny - 1` on top).
pub fn render_overlay(grid: &GridMap, decision: &LandingDecision, scale: usize) -> RgbImage {
    let scale = scale.max(1);
    let (nx, ny) = grid.dims();
    let (width, height) = (nx * scale, ny * scale);
    let mut data = vec![0u8; width * height * 3];
    for j in 0..ny {
        let color_row: Vec<[u8; 3]> = (0..nx)
            .map(|i| overlay_color(grid, decision, i as i64, j as i64))
            .collect();
        let top = (ny - 1 - j) * scale;
        for y in top..top + scale {
            for (i, c) in color_row.iter().enumerate() {
                for x in i * scale..(i + 1) * scale {
                    let k = 3 * (y * width + x);
                    data[k..k + 3].copy_from_slice(c);
                }
            }
        }
    }
    RgbImage { width, height, data }
}
