//! Planar homography fit over the tracked grid and the filtered planarity
//! gate.
//!
//! The residual of the best homography mapping the next-frame positions
//! `P + Q` back onto `P` stays near zero for a rigid planar surface and grows
//! when the surface deforms between frames (water ripples, leaves in rotor
//! downwash). It is reported as a per-point RMS so that the gate threshold
//! does not depend on grid density.

use alloc::vec::Vec;

use crate::flow::{build_pyramid, sample_grid, track_points, FlowField, TrackParams};
use crate::geometry::GrayImage;
use crate::linalg::{self, det3, frobenius3, mat3_apply, mat3_inverse, mat3_mul, Mat3};
use crate::{math, Error, Result};

/// 3x3 projective transform with unit Frobenius norm and `h[2][2] >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Mat3,
}

impl Homography {
    pub fn identity() -> Self {
        Self::from_matrix(linalg::IDENTITY3).expect("identity is regular")
    }

    /// Scale-normalizes `m`; rejects non-finite or singular matrices.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let norm = frobenius3(&m);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("homography must be finite and non-zero"));
        }
        let sign = if m[2][2] < 0.0 { -1.0 } else { 1.0 };
        let mut h = m;
        for v in h.iter_mut().flatten() {
            *v *= sign / norm;
        }
        if math::abs(det3(&h)) < 1e-14 {
            return Err(Error::DegenerateConfiguration("homography is rank deficient"));
        }
        Ok(Self { h })
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.h
    }

    /// Maps a pixel through `H` with perspective division; `None` when the
    /// homogeneous coordinate vanishes.
    pub fn apply(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let [x, y, w] = mat3_apply(&self.h, [p[0], p[1], 1.0]);
        if math::abs(w) < W_EPSILON || !w.is_finite() {
            return None;
        }
        Some([x / w, y / w])
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = mat3_inverse(&self.h).ok_or(Error::NumericalDegeneracy("homography is not invertible"))?;
        Self::from_matrix(inv)
    }
}

const W_EPSILON: f64 = 1e-12;

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn hartley_normalization(pts: &[[f64; 2]]) -> Result<Mat3> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = pts.iter().map(|p| math::hypot(p[0] - cx, p[1] - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::DegenerateConfiguration("points coincide"));
    }
    let s = core::f64::consts::SQRT_2 / mean_dist;

    // all points on one line leave the normalized scatter rank-1
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (x, y) = (s * (p[0] - cx), s * (p[1] - cy));
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    if linalg::min_eigenvalue_2x2(sxx / n, sxy / n, syy / n) < 1e-9 {
        return Err(Error::DegenerateConfiguration("points are collinear"));
    }
    Ok([[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]])
}

/// Normalized DLT fit of `H` with `dst ~ H src`.
pub fn fit_homography_points(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<Homography> {
    if src.len() != dst.len() {
        return Err(Error::InvalidInput("correspondence lists differ in length"));
    }
    if src.len() < 4 {
        return Err(Error::DegenerateConfiguration(
            "homography needs at least 4 correspondences",
        ));
    }
    if src
        .iter()
        .chain(dst)
        .any(|p| !(p[0].is_finite() && p[1].is_finite()))
    {
        return Err(Error::InvalidInput("non-finite correspondence"));
    }
    let t_src = hartley_normalization(src)?;
    let t_dst = hartley_normalization(dst)?;

    // Accumulate A^T A of the 2N x 9 design matrix; its eigenvector with the
    // smallest eigenvalue is the right singular vector of A we want.
    let mut ata = [[0.0f64; 9]; 9];
    for (s, d) in src.iter().zip(dst) {
        let [x, y, _] = mat3_apply(&t_src, [s[0], s[1], 1.0]);
        let [u, v, _] = mat3_apply(&t_dst, [d[0], d[1], 1.0]);
        let r1 = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u];
        let r2 = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v];
        for i in 0..9 {
            for j in i..9 {
                ata[i][j] += r1[i] * r1[j] + r2[i] * r2[j];
            }
        }
    }
    let (_, vectors) = linalg::symmetric_eigen(&ata);
    let hn: Mat3 = [
        [vectors[0][0], vectors[1][0], vectors[2][0]],
        [vectors[3][0], vectors[4][0], vectors[5][0]],
        [vectors[6][0], vectors[7][0], vectors[8][0]],
    ];
    let t_dst_inv = mat3_inverse(&t_dst).ok_or(Error::NumericalDegeneracy("normalization not invertible"))?;
    Homography::from_matrix(mat3_mul(&mat3_mul(&t_dst_inv, &hn), &t_src))
}

/// Fits the homography taking next-frame positions `P + Q` back to `P`,
/// using every valid sample.
pub fn fit_homography(flow: &FlowField) -> Result<Homography> {
    let (src, dst): (Vec<_>, Vec<_>) = flow
        .valid_pairs()
        .map(|(p, q)| ([p[0] + q[0], p[1] + q[1]], p))
        .unzip();
    fit_homography_points(&src, &dst)
}

/// Planarity residual with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// Per-point RMS distance in pixels.
    pub rms: f64,
    pub used: usize,
    /// Valid points whose transform hit a vanishing homogeneous coordinate.
    pub excluded: usize,
}

pub fn homography_residual(flow: &FlowField, h: &Homography) -> Result<Residual> {
    let mut sum = 0.0;
    let (mut used, mut excluded) = (0usize, 0usize);
    for (p, q) in flow.valid_pairs() {
        match h.apply([p[0] + q[0], p[1] + q[1]]) {
            Some(m) => {
                let (dx, dy) = (p[0] - m[0], p[1] - m[1]);
                sum += dx * dx + dy * dy;
                used += 1;
            }
            None => excluded += 1,
        }
    }
    let total = used + excluded;
    if total == 0 {
        return Err(Error::DegenerateConfiguration("no valid flow points"));
    }
    if 2 * excluded > total || used == 0 {
        return Err(Error::NumericalDegeneracy(
            "most points map to the plane at infinity",
        ));
    }
    Ok(Residual {
        rms: math::sqrt(sum / used as f64),
        used,
        excluded,
    })
}

/// RMS planarity error `sqrt(mean ||P - pi(H (P + Q))||^2)` in pixels.
pub fn homography_error(flow: &FlowField, h: &Homography) -> Result<f64> {
    homography_residual(flow, h).map(|r| r.rms)
}

/// Low-pass filtered planarity error and the resulting gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarityState {
    /// Latest unfiltered error, pixels.
    pub raw_error: f64,
    pub filtered_error: f64,
    /// Weight of the previous filtered value, in `[0, 1)`.
    pub alpha: f64,
    pub threshold: f64,
    pub safe: bool,
    /// False until the first error sample has seeded the filter.
    pub initialized: bool,
    /// Valid correspondences behind the latest sample.
    pub valid_points: usize,
    /// The latest frame could not be fitted and was scored as unsafe.
    pub degenerate: bool,
}

impl PlanarityState {
    pub fn new(alpha: f64, threshold: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidInput("filter alpha must lie in [0, 1)"));
        }
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(Error::InvalidInput("planarity threshold must be positive"));
        }
        Ok(Self {
            raw_error: 0.0,
            filtered_error: 0.0,
            alpha,
            threshold,
            safe: true,
            initialized: false,
            valid_points: 0,
            degenerate: false,
        })
    }
}

/// Exponential moving average step; the first sample seeds the filter.
pub fn update_filter(state: &PlanarityState, e: f64) -> Result<PlanarityState> {
    if !e.is_finite() || e < 0.0 {
        return Err(Error::InvalidInput(
            "planarity error must be finite and non-negative",
        ));
    }
    let filtered = if state.initialized {
        state.alpha * state.filtered_error + (1.0 - state.alpha) * e
    } else {
        e
    };
    Ok(PlanarityState {
        raw_error: e,
        filtered_error: filtered,
        safe: filtered <= state.threshold,
        initialized: true,
        ..*state
    })
}

/// Monocular pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonoConfig {
    pub stride: usize,
    pub margin: usize,
    pub pyramid_levels: usize,
    pub track: TrackParams,
}

impl Default for MonoConfig {
    fn default() -> Self {
        Self {
            stride: 20,
            margin: 20,
            pyramid_levels: 3,
            track: TrackParams::default(),
        }
    }
}

impl MonoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::InvalidInput("grid stride must be at least 1"));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::InvalidInput("pyramid needs at least one level"));
        }
        self.track.validate()
    }
}

/// One step of the monocular gate over a pair of consecutive frames.
///
/// Frames that cannot be fitted (too few valid or collinear samples) feed
/// twice the threshold into the filter.
pub fn mono_evaluate(
    prev: &GrayImage,
    next: &GrayImage,
    state: &PlanarityState,
    config: &MonoConfig,
) -> Result<PlanarityState> {
    if prev.size() != next.size() {
        return Err(Error::SizeMismatch {
            expected: prev.size(),
            got: next.size(),
        });
    }
    config.validate()?;
    let pyr_prev = build_pyramid(prev, config.pyramid_levels)?;
    let pyr_next = build_pyramid(next, config.pyramid_levels)?;
    let points = sample_grid(prev.size(), config.stride, config.margin)?;
    let flow = track_points(&pyr_prev, &pyr_next, &points, &config.track)?;

    let scored = fit_homography(&flow).and_then(|h| homography_residual(&flow, &h));
    let (e, degenerate) = match scored {
        Ok(r) => (r.rms, false),
        Err(Error::DegenerateConfiguration(_)) | Err(Error::NumericalDegeneracy(_)) => {
            (2.0 * state.threshold, true)
        }
        Err(other) => return Err(other),
    };
    let mut next_state = update_filter(state, e)?;
    next_state.valid_points = flow.valid_count();
    next_state.degenerate = degenerate;
    Ok(next_state)
}
