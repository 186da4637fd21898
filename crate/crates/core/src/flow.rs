//! Sparse-grid pyramidal Lucas-Kanade tracking.
//!
//! A regular grid of pixels `P` is sampled in the earlier frame and each
//! sample is tracked into the next frame, giving displacements `Q`. The pair
//! feeds the homography planarity check in [`crate::homography`].

use alloc::vec::Vec;

use crate::geometry::GrayImage;
use crate::linalg::min_eigenvalue_2x2;
use crate::{math, Error, Result};

/// Smallest side length allowed for the coarsest pyramid level.
pub const MIN_LEVEL_SIZE: usize = 16;

/// Image pyramid; level 0 is full resolution and each further level halves
/// both dimensions (floor) by 2x2 box averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    levels: Vec<GrayImage>,
}

impl Pyramid {
    pub fn levels(&self) -> &[GrayImage] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &GrayImage {
        &self.levels[k]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn base_size(&self) -> (usize, usize) {
        self.levels[0].size()
    }
}

pub fn build_pyramid(img: &GrayImage, levels: usize) -> Result<Pyramid> {
    if levels == 0 {
        return Err(Error::InvalidInput("pyramid needs at least one level"));
    }
    let shrink = 1usize << (levels - 1);
    let (w, h) = img.size();
    if w / shrink < MIN_LEVEL_SIZE || h / shrink < MIN_LEVEL_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            needed: MIN_LEVEL_SIZE * shrink,
        });
    }
    let mut out = Vec::with_capacity(levels);
    out.push(img.clone());
    for _ in 1..levels {
        let prev = out.last().unwrap();
        out.push(downsample(prev));
    }
    Ok(Pyramid { levels: out })
}

fn downsample(img: &GrayImage) -> GrayImage {
    GrayImage::from_fn(img.width() / 2, img.height() / 2, |x, y| {
        let (x0, y0) = (2 * x, 2 * y);
        0.25 * (img.get(x0, y0) + img.get(x0 + 1, y0) + img.get(x0, y0 + 1) + img.get(x0 + 1, y0 + 1))
    })
}

/// Row-major grid of sample pixels at `stride` spacing, `margin` pixels in
/// from every border.
pub fn sample_grid(frame_size: (usize, usize), stride: usize, margin: usize) -> Result<Vec<[f64; 2]>> {
    if stride == 0 {
        return Err(Error::InvalidInput("grid stride must be at least 1"));
    }
    let axis = |len: usize| -> Vec<usize> {
        if len == 0 || margin >= len {
            return Vec::new();
        }
        let last = (len - margin).min(len - 1);
        (margin..=last).step_by(stride).collect()
    };
    let xs = axis(frame_size.0);
    let ys = axis(frame_size.1);
    if xs.len() * ys.len() < 4 {
        return Err(Error::DegenerateConfiguration(
            "sample grid has fewer than 4 points",
        ));
    }
    Ok(ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| [x as f64, y as f64]))
        .collect())
}

/// Sampled flow: points `P`, displacements `Q` and per-point validity.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    points: Vec<[f64; 2]>,
    displacements: Vec<[f64; 2]>,
    valid: Vec<bool>,
    frame_size: (usize, usize),
}

impl FlowField {
    /// Invalid entries have their displacement forced to zero.
    pub fn new(
        points: Vec<[f64; 2]>,
        mut displacements: Vec<[f64; 2]>,
        valid: Vec<bool>,
        frame_size: (usize, usize),
    ) -> Result<Self> {
        if points.len() != displacements.len() || points.len() != valid.len() {
            return Err(Error::InvalidInput("flow arrays must have equal length"));
        }
        if points.len() < 4 {
            return Err(Error::DegenerateConfiguration(
                "flow field needs at least 4 points",
            ));
        }
        let (w, h) = (frame_size.0 as f64, frame_size.1 as f64);
        if points
            .iter()
            .any(|p| !(p[0] >= 0.0 && p[0] < w && p[1] >= 0.0 && p[1] < h))
        {
            return Err(Error::InvalidInput("flow point outside the frame"));
        }
        let mut valid = valid;
        for (d, ok) in displacements.iter_mut().zip(valid.iter_mut()) {
            if !(d[0].is_finite() && d[1].is_finite()) {
                *ok = false;
            }
            if !*ok {
                *d = [0.0, 0.0];
            }
        }
        Ok(Self {
            points,
            displacements,
            valid,
            frame_size,
        })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn displacements(&self) -> &[[f64; 2]] {
        &self.displacements
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn frame_size(&self) -> (usize, usize) {
        self.frame_size
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// `(P, Q)` pairs of the valid samples.
    pub fn valid_pairs(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.points
            .iter()
            .zip(&self.displacements)
            .zip(&self.valid)
            .filter(|(_, ok)| **ok)
            .map(|((p, q), _)| (*p, *q))
    }
}

/// Lucas-Kanade tracking parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackParams {
    /// Odd window side length in pixels.
    pub window: usize,
    pub max_iters: usize,
    /// Convergence threshold on the per-iteration update, pixels.
    pub eps: f64,
    /// Minimum eigenvalue of the window-averaged structure tensor.
    pub min_eig: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            window: 21,
            max_iters: 30,
            eps: 0.01,
            min_eig: 1e-4,
        }
    }
}

impl TrackParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 5 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidInput("LK window must be odd and at least 5"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("LK needs at least one iteration"));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidInput("LK eps must be positive"));
        }
        if !(self.min_eig >= 0.0) || !self.min_eig.is_finite() {
            return Err(Error::InvalidInput("min_eig must be non-negative"));
        }
        Ok(())
    }
}

struct PatchSample {
    dx: f64,
    dy: f64,
    value: f64,
    gx: f64,
    gy: f64,
}

/// Tracks `points` from `prev` into `next`, coarse to fine.
pub fn track_points(
    prev: &Pyramid,
    next: &Pyramid,
    points: &[[f64; 2]],
    params: &TrackParams,
) -> Result<FlowField> {
    params.validate()?;
    if prev.len() != next.len() {
        return Err(Error::InvalidInput("pyramids have different depths"));
    }
    for (a, b) in prev.levels().iter().zip(next.levels()) {
        if a.size() != b.size() {
            return Err(Error::SizeMismatch {
                expected: a.size(),
                got: b.size(),
            });
        }
    }
    let frame_size = prev.base_size();
    let mut patch = Vec::with_capacity(params.window * params.window);
    let mut displacements = Vec::with_capacity(points.len());
    let mut valid = Vec::with_capacity(points.len());
    for p in points {
        match track_one(prev, next, *p, params, &mut patch) {
            Some(d) => {
                displacements.push(d);
                valid.push(true);
            }
            None => {
                displacements.push([0.0, 0.0]);
                valid.push(false);
            }
        }
    }
    FlowField::new(points.to_vec(), displacements, valid, frame_size)
}

fn track_one(
    prev: &Pyramid,
    next: &Pyramid,
    point: [f64; 2],
    params: &TrackParams,
    patch: &mut Vec<PatchSample>,
) -> Option<[f64; 2]> {
    let r = (params.window / 2) as isize;
    let (w0, h0) = prev.base_size();
    if border_overhang(point, r as f64, w0, h0) > r as f64 / 2.0 {
        return None;
    }

    let mut guess = [0.0f64, 0.0f64];
    let n = (params.window * params.window) as f64;
    for level in (0..prev.len()).rev() {
        let scale = 1.0 / (1u64 << level) as f64;
        let img_i = prev.level(level);
        let img_j = next.level(level);
        let (px, py) = (point[0] * scale, point[1] * scale);
        let (max_x, max_y) = ((img_i.width() - 1) as f64, (img_i.height() - 1) as f64);

        patch.clear();
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (px + dx as f64, py + dy as f64);
                let gx = 0.5 * (img_i.sample(x + 1.0, y) - img_i.sample(x - 1.0, y));
                let gy = 0.5 * (img_i.sample(x, y + 1.0) - img_i.sample(x, y - 1.0));
                gxx += gx * gx;
                gxy += gx * gy;
                gyy += gy * gy;
                patch.push(PatchSample {
                    dx: dx as f64,
                    dy: dy as f64,
                    value: img_i.sample(x, y),
                    gx,
                    gy,
                });
            }
        }
        if min_eigenvalue_2x2(gxx / n, gxy / n, gyy / n) < params.min_eig {
            return None;
        }
        let det = gxx * gyy - gxy * gxy;
        if !(det > 0.0) {
            return None;
        }

        let mut nu = [0.0f64, 0.0f64];
        let mut converged = false;
        for _ in 0..params.max_iters {
            let cx = px + guess[0] + nu[0];
            let cy = py + guess[1] + nu[1];
            if !(0.0..=max_x).contains(&cx) || !(0.0..=max_y).contains(&cy) {
                return None;
            }
            let (mut bx, mut by) = (0.0, 0.0);
            for s in patch.iter() {
                let diff = s.value - img_j.sample(cx + s.dx, cy + s.dy);
                bx += diff * s.gx;
                by += diff * s.gy;
            }
            let ex = (gyy * bx - gxy * by) / det;
            let ey = (gxx * by - gxy * bx) / det;
            nu[0] += ex;
            nu[1] += ey;
            if !(nu[0].is_finite() && nu[1].is_finite()) {
                return None;
            }
            if math::hypot(ex, ey) < params.eps {
                converged = true;
                break;
            }
        }

        if level == 0 {
            if !converged {
                return None;
            }
            let d = [guess[0] + nu[0], guess[1] + nu[1]];
            let dest = [point[0] + d[0], point[1] + d[1]];
            if border_overhang(dest, r as f64, w0, h0) > r as f64 / 2.0 {
                return None;
            }
            return Some(d);
        }
        guess = [2.0 * (guess[0] + nu[0]), 2.0 * (guess[1] + nu[1])];
    }
    None
}

/// How far a window of half-width `r` centered at `p` reaches past the frame.
fn border_overhang(p: [f64; 2], r: f64, w: usize, h: usize) -> f64 {
    let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
    let over = [r - p[0], r - p[1], p[0] + r - max_x, p[1] + r - max_y];
    over.iter().copied().fold(0.0, f64::max)
}
