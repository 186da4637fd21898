//! Synthetic scenes with exact ground truth.
//!
//! The world frame has z up with the ground plane at `z = 0`. The left
//! camera hangs `depth_m` above the origin looking straight down (camera x
//! along world x, image rows along world -y), optionally rolled by
//! `tilt_deg` about world x. Surfaces carry a seeded solid value-noise
//! texture so both stereo views and every frame of a sequence see the same
//! pattern.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::flow::{sample_grid, FlowField};
use crate::geometry::{CameraIntrinsics, GrayImage, UnitQuaternion, Vec3};
use crate::homography::Homography;
use crate::imu::{ImuSample, GRAVITY};
use crate::linalg::{mat3_mul, Mat3};
use crate::stereo::{DisparityMap, INVALID_DISPARITY};
use crate::terrain::{DEFAULT_CELL_SIZE, DEFAULT_FOOTPRINT, DEFAULT_ROUGH_MAX_M, DEFAULT_SLOPE_MAX_DEG};
use crate::{math, Error, Result};

/// Ripple phase advance between consecutive frames (a quarter period).
pub const RIPPLE_PHASE_STEP: f64 = PI / 2.0;

/// Grid used for ground-truth flow samples.
pub const GT_FLOW_STRIDE: usize = 20;
pub const GT_FLOW_MARGIN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    FlatPlane,
    Ramp,
    BoxOnPlane,
    Step,
    RippleSurface,
    Textureless,
}

impl SceneKind {
    pub const ALL: [SceneKind; 6] = [
        SceneKind::FlatPlane,
        SceneKind::Ramp,
        SceneKind::BoxOnPlane,
        SceneKind::Step,
        SceneKind::RippleSurface,
        SceneKind::Textureless,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SceneKind::FlatPlane => "flat_plane",
            SceneKind::Ramp => "ramp",
            SceneKind::BoxOnPlane => "box_on_plane",
            SceneKind::Step => "step",
            SceneKind::RippleSurface => "ripple_surface",
            SceneKind::Textureless => "textureless",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Surface is a single plane.
    pub fn is_planar(&self) -> bool {
        !matches!(self, SceneKind::BoxOnPlane | SceneKind::Step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Camera height above the ground at the nadir, meters.
    pub depth_m: f64,
    pub ramp_deg: f64,
    pub box_w: f64,
    pub box_d: f64,
    pub box_h: f64,
    pub step_h: f64,
    pub ripple_amp_px: f64,
    pub ripple_wavelength_px: f64,
    /// Camera roll about world x, degrees.
    pub tilt_deg: f64,
    pub texture_seed: u64,
    /// Gain applied to the zero-mean texture before clamping to `[0, 1]`.
    pub contrast: f64,
    pub camera: CameraIntrinsics,
    pub image_size: (usize, usize),
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            kind: SceneKind::FlatPlane,
            depth_m: 2.0,
            ramp_deg: 20.0,
            box_w: 0.3,
            box_d: 0.4,
            box_h: 0.3,
            step_h: 0.2,
            ripple_amp_px: 2.0,
            ripple_wavelength_px: 80.0,
            tilt_deg: 0.0,
            texture_seed: 1,
            contrast: 1.8,
            camera: CameraIntrinsics {
                fx: 400.0,
                fy: 400.0,
                cx: 376.0,
                cy: 240.0,
                baseline: 0.12,
            },
            image_size: (752, 480),
        }
    }
}

impl SceneSpec {
    pub fn new(kind: SceneKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Same scene at a different resolution, principal point kept centered.
    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.image_size = (width, height);
        self.camera.cx = width as f64 / 2.0;
        self.camera.cy = height as f64 / 2.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.image_size;
        if w < 16 || h < 16 {
            return Err(Error::InvalidInput("scene image must be at least 16x16"));
        }
        self.camera.validate_for(w, h)?;
        let positive = [
            self.depth_m,
            self.box_w,
            self.box_d,
            self.box_h,
            self.step_h,
            self.ripple_wavelength_px,
            self.contrast,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("scene dimensions must be positive"));
        }
        if !(self.ripple_amp_px >= 0.0) || !self.ripple_amp_px.is_finite() {
            return Err(Error::InvalidInput("ripple amplitude must be non-negative"));
        }
        if self.kind == SceneKind::Ramp && !(self.ramp_deg > 0.0 && self.ramp_deg <= 45.0) {
            return Err(Error::InvalidInput("ramp angle must lie in (0, 45] degrees"));
        }
        if !(self.tilt_deg.abs() < 60.0) {
            return Err(Error::InvalidInput("camera tilt must stay below 60 degrees"));
        }
        // ripple displacement must stay a contraction for the frame mapping
        if self.kind == SceneKind::RippleSurface
            && 2.0 * PI * self.ripple_amp_px / self.ripple_wavelength_px >= 0.5
        {
            return Err(Error::InvalidInput("ripple too steep for its wavelength"));
        }
        Ok(())
    }

    /// Tallest point of the surface above the ground plane inside the region
    /// the camera can see from overhead.
    fn obstacle_height(&self) -> f64 {
        match self.kind {
            SceneKind::BoxOnPlane => self.box_h,
            SceneKind::Step => self.step_h,
            _ => 0.0,
        }
    }

    fn camera_rotation(&self) -> UnitQuaternion {
        let down = UnitQuaternion::from_axis_angle(Vec3::X, PI);
        UnitQuaternion::from_axis_angle(Vec3::X, self.tilt_deg.to_radians()) * down
    }

    /// Body-to-world orientation of the camera, as an IMU rigidly attached
    /// with identity mounting would report it.
    pub fn camera_orientation(&self) -> UnitQuaternion {
        self.camera_rotation()
    }

    fn surface(&self) -> Surface {
        let ground = Prim::Plane {
            normal: Vec3::Z,
            offset: 0.0,
        };
        let mut prims = Vec::new();
        match self.kind {
            SceneKind::Ramp => {
                let t = math::tan(self.ramp_deg.to_radians());
                prims.push(Prim::Plane {
                    normal: Vec3::new(0.0, -t, 1.0),
                    offset: 0.0,
                });
            }
            SceneKind::BoxOnPlane => {
                prims.push(ground);
                prims.push(Prim::Cuboid {
                    min: Vec3::new(-self.box_w / 2.0, -self.box_d / 2.0, 0.0),
                    max: Vec3::new(self.box_w / 2.0, self.box_d / 2.0, self.box_h),
                });
            }
            SceneKind::Step => {
                prims.push(ground);
                prims.push(Prim::Cuboid {
                    min: Vec3::new(0.0, -1.0e3, 0.0),
                    max: Vec3::new(1.0e3, 1.0e3, self.step_h),
                });
            }
            _ => prims.push(ground),
        }
        Surface {
            prims,
            seed: self.texture_seed,
            contrast: self.contrast,
            textured: self.kind != SceneKind::Textureless,
        }
    }

    /// Analytic slope in degrees of the cell `[kx, kx+1) x [ky, ky+1)`
    /// (units of `cell_size`): 90 when a vertical face cuts through it.
    pub fn cell_slope(&self, key: (i64, i64), cell_size: f64) -> f64 {
        let (x0, y0) = (key.0 as f64 * cell_size, key.1 as f64 * cell_size);
        let (x1, y1) = (x0 + cell_size, y0 + cell_size);
        let cuts = |a: f64, lo: f64, hi: f64| lo < a && a < hi;
        match self.kind {
            SceneKind::Ramp => self.ramp_deg,
            SceneKind::BoxOnPlane => {
                let (bx0, bx1) = (-self.box_w / 2.0, self.box_w / 2.0);
                let (by0, by1) = (-self.box_d / 2.0, self.box_d / 2.0);
                let overlaps = x0 < bx1 && bx0 < x1 && y0 < by1 && by0 < y1;
                let edge = cuts(bx0, x0, x1) || cuts(bx1, x0, x1) || cuts(by0, y0, y1) || cuts(by1, y0, y1);
                if overlaps && edge {
                    90.0
                } else {
                    0.0
                }
            }
            SceneKind::Step if cuts(0.0, x0, x1) => 90.0,
            _ => 0.0,
        }
    }

    /// Whether the footprint under the nadir is a valid landing site under
    /// the default slope and roughness limits. Non-rigid and textureless
    /// surfaces are never labeled safe.
    pub fn safe_label(&self) -> bool {
        let half = DEFAULT_FOOTPRINT / 2.0;
        match self.kind {
            SceneKind::FlatPlane => true,
            SceneKind::Ramp => self.ramp_deg <= DEFAULT_SLOPE_MAX_DEG,
            SceneKind::BoxOnPlane => {
                let under = self.box_w / 2.0 > -half && -self.box_w / 2.0 < half;
                !(under && self.box_h > DEFAULT_ROUGH_MAX_M)
            }
            SceneKind::Step => self.step_h <= DEFAULT_ROUGH_MAX_M,
            SceneKind::RippleSurface | SceneKind::Textureless => false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Prim {
    /// `normal . x = offset`
    Plane {
        normal: Vec3,
        offset: f64,
    },
    Cuboid {
        min: Vec3,
        max: Vec3,
    },
}

impl Prim {
    fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        match *self {
            Prim::Plane { normal, offset } => {
                let denom = normal.dot(dir);
                if denom == 0.0 {
                    return None;
                }
                let t = (offset - normal.dot(origin)) / denom;
                (t > 1e-9).then_some(t)
            }
            Prim::Cuboid { min, max } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for (o, d, lo, hi) in [
                    (origin.x, dir.x, min.x, max.x),
                    (origin.y, dir.y, min.y, max.y),
                    (origin.z, dir.z, min.z, max.z),
                ] {
                    if d == 0.0 {
                        if o < lo || o > hi {
                            return None;
                        }
                        continue;
                    }
                    let (a, b) = ((lo - o) / d, (hi - o) / d);
                    let (a, b) = if a < b { (a, b) } else { (b, a) };
                    t0 = t0.max(a);
                    t1 = t1.min(b);
                }
                if t0 > t1 || t1 <= 1e-9 {
                    return None;
                }
                Some(if t0 > 1e-9 { t0 } else { t1 })
            }
        }
    }
}

struct Surface {
    prims: Vec<Prim>,
    seed: u64,
    contrast: f64,
    textured: bool,
}

impl Surface {
    fn hit(&self, origin: Vec3, dir: Vec3) -> Option<Vec3> {
        let t = self
            .prims
            .iter()
            .filter_map(|p| p.intersect(origin, dir))
            .fold(f64::INFINITY, f64::min);
        t.is_finite().then(|| origin + dir * t)
    }

    fn shade(&self, p: Vec3) -> f64 {
        if !self.textured {
            return 0.5;
        }
        let n = 0.65 * value_noise_3d(p * (1.0 / 0.03), self.seed)
            + 0.35 * value_noise_3d(p * (1.0 / 0.012), self.seed ^ 0x9e37_79b9_7f4a_7c15);
        (0.5 + self.contrast * (n - 0.5)).clamp(0.03, 0.97)
    }
}

/// A pinhole view placed in the world.
#[derive(Debug, Clone, Copy)]
struct View {
    center: Vec3,
    rot: UnitQuaternion,
    k: CameraIntrinsics,
}

impl View {
    fn ray(&self, u: f64, v: f64) -> Vec3 {
        let d = Vec3::new((u - self.k.cx) / self.k.fx, (v - self.k.cy) / self.k.fy, 1.0);
        self.rot.rotate(d)
    }

    fn camera_coords(&self, p: Vec3) -> Vec3 {
        self.rot.inverse().rotate(p - self.center)
    }

    fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let c = self.camera_coords(p);
        (c.z > 1e-9).then(|| {
            (
                self.k.fx * c.x / c.z + self.k.cx,
                self.k.fy * c.y / c.z + self.k.cy,
            )
        })
    }
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[inline]
fn lattice(ix: i64, iy: i64, iz: i64, seed: u64) -> f64 {
    let h = splitmix64(
        seed ^ splitmix64(
            (ix as u64).wrapping_mul(0x8cb9_2ba7_2f3d_8dd7)
                ^ splitmix64(
                    (iy as u64).wrapping_mul(0x5851_f42d_4c95_7f2d)
                        ^ (iz as u64).wrapping_mul(0x2545_f491_4f6c_dd1d),
                ),
        ),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Smooth value noise in `[0, 1]` with unit lattice spacing.
pub fn value_noise_3d(p: Vec3, seed: u64) -> f64 {
    let (fx, fy, fz) = (math::floor(p.x), math::floor(p.y), math::floor(p.z));
    let (ix, iy, iz) = (fx as i64, fy as i64, fz as i64);
    let (tx, ty, tz) = (fade(p.x - fx), fade(p.y - fy), fade(p.z - fz));
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let mut acc = [0.0; 2];
    for (dz, a) in acc.iter_mut().enumerate() {
        let z = iz + dz as i64;
        let c00 = lerp(lattice(ix, iy, z, seed), lattice(ix + 1, iy, z, seed), tx);
        let c10 = lerp(lattice(ix, iy + 1, z, seed), lattice(ix + 1, iy + 1, z, seed), tx);
        *a = lerp(c00, c10, ty);
    }
    lerp(acc[0], acc[1], tz)
}

/// Noise image whose finest features are about `feature_px` pixels wide,
/// with three coarser octaves of equal amplitude on top.
pub fn noise_image(width: usize, height: usize, seed: u64, feature_px: f64) -> GrayImage {
    GrayImage::from_fn(width, height, |x, y| {
        let mut n = 0.0;
        let mut scale = 1.0 / feature_px;
        for octave in 0..4u64 {
            let p = Vec3::new(x as f64 * scale, y as f64 * scale, 0.5 + octave as f64);
            n += value_noise_3d(p, seed ^ octave.wrapping_mul(0x51));
            scale *= 0.5;
        }
        (0.5 + 3.0 * (n / 4.0 - 0.5)).clamp(0.03, 0.97) as f32
    })
}

const SUBSAMPLES: [(f64, f64); 4] = [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)];

/// Image-space ripple displacement of a frame.
#[derive(Debug, Clone, Copy)]
struct Ripple {
    amp: f64,
    wavenumber: f64,
    phase: f64,
}

impl Ripple {
    fn offset(&self, u: f64, v: f64) -> (f64, f64) {
        (
            self.amp * math::sin(self.wavenumber * v - self.phase),
            self.amp * math::sin(self.wavenumber * u - self.phase),
        )
    }

    /// Solves `x - r(x) = y` for `x` by fixed-point iteration.
    fn invert(&self, y: (f64, f64)) -> (f64, f64) {
        let mut x = y;
        for _ in 0..200 {
            let (ru, rv) = self.offset(x.0, x.1);
            let nx = (y.0 + ru, y.1 + rv);
            let done = math::abs(nx.0 - x.0) + math::abs(nx.1 - x.1) < 1e-13;
            x = nx;
            if done {
                break;
            }
        }
        x
    }
}

fn render_view(surface: &Surface, view: &View, size: (usize, usize), ripple: Option<Ripple>) -> GrayImage {
    GrayImage::from_fn(size.0, size.1, |x, y| {
        let mut acc = 0.0;
        for (ox, oy) in SUBSAMPLES {
            let (mut u, mut v) = (x as f64 + ox, y as f64 + oy);
            if let Some(r) = ripple {
                let (du, dv) = r.offset(u, v);
                u -= du;
                v -= dv;
            }
            acc += surface
                .hit(view.center, view.ray(u, v))
                .map_or(0.0, |p| surface.shade(p));
        }
        (acc / SUBSAMPLES.len() as f64) as f32
    })
}

/// Ground-truth slope of one grid cell; `key` is relative to the nadir.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSlope {
    pub key: (i64, i64),
    pub slope_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Left-referenced disparity; occluded pixels invalid.
    pub disparity: Option<DisparityMap>,
    /// Exact sample flow from this frame to the next.
    pub flow: Option<FlowField>,
    /// Frame-to-previous homography (next-frame pixel to this frame) for
    /// rigid planar scenes.
    pub homography: Option<Homography>,
    /// Cells whose corners are all visible in the left image.
    pub cell_slopes: Vec<CellSlope>,
    pub safe_label: bool,
}

#[derive(Debug, Clone)]
pub struct StereoScene {
    pub left: GrayImage,
    pub right: GrayImage,
    pub gt: GroundTruth,
}

fn visible_cells(spec: &SceneSpec, view: &View, margin: (f64, f64)) -> Vec<CellSlope> {
    let (w, h) = (spec.image_size.0 as f64, spec.image_size.1 as f64);
    let cs = DEFAULT_CELL_SIZE;
    let reach = (spec.depth_m * 4.0 / cs) as i64 + 2;
    let surface = spec.surface();
    let mut out = Vec::new();
    for ky in -reach..reach {
        for kx in -reach..reach {
            let corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
            let inside = corners.iter().all(|(a, b)| {
                let (x, y) = ((kx as f64 + a) * cs, (ky as f64 + b) * cs);
                let z = match spec.kind {
                    SceneKind::Ramp => math::tan(spec.ramp_deg.to_radians()) * y,
                    _ => 0.0,
                };
                let p = Vec3::new(x, y, z);
                match view.project(p) {
                    Some((u, v)) => {
                        u >= margin.0 && u <= w - 1.0 - margin.1 && v >= margin.1 && v <= h - 1.0 - margin.1
                    }
                    None => false,
                }
            });
            let _ = &surface;
            if inside {
                out.push(CellSlope {
                    key: (kx, ky),
                    slope_deg: spec.cell_slope((kx, ky), cs),
                });
            }
        }
    }
    out
}

/// Renders the rectified left/right pair and its analytic ground truth.
pub fn render_stereo(spec: &SceneSpec) -> Result<StereoScene> {
    spec.validate()?;
    let surface = spec.surface();
    let rot = spec.camera_rotation();
    let left_view = View {
        center: Vec3::new(0.0, 0.0, spec.depth_m),
        rot,
        k: spec.camera,
    };
    let right_view = View {
        center: left_view.center + rot.rotate(Vec3::new(spec.camera.baseline, 0.0, 0.0)),
        ..left_view
    };
    check_in_front(spec, &surface, &left_view)?;

    let size = spec.image_size;
    let left = render_view(&surface, &left_view, size, None);
    let right = render_view(&surface, &right_view, size, None);

    let (w, h) = size;
    let k = &spec.camera;
    let mut disp = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            disp.push(gt_disparity(
                &surface,
                &left_view,
                &right_view,
                u as f64,
                v as f64,
                w,
                k,
            ));
        }
    }
    let disparity = DisparityMap::from_values(w, h, disp)?;
    let cell_slopes = visible_cells(spec, &left_view, (0.0, 0.0));
    Ok(StereoScene {
        left,
        right,
        gt: GroundTruth {
            disparity: Some(disparity),
            flow: None,
            homography: None,
            cell_slopes,
            safe_label: spec.safe_label(),
        },
    })
}

fn gt_disparity(
    surface: &Surface,
    left: &View,
    right: &View,
    u: f64,
    v: f64,
    w: usize,
    k: &CameraIntrinsics,
) -> f32 {
    let Some(p) = surface.hit(left.center, left.ray(u, v)) else {
        return INVALID_DISPARITY;
    };
    let c = left.camera_coords(p);
    let d = k.fx * k.baseline / c.z;
    // occlusion: the right camera must see the same surface point first
    let ur = u - d;
    if ur < 0.0 || ur > (w - 1) as f64 {
        return INVALID_DISPARITY;
    }
    match surface.hit(right.center, right.ray(ur, v)) {
        Some(q) if (q - p).norm() <= 1e-6 * (1.0 + c.z) => d as f32,
        _ => INVALID_DISPARITY,
    }
}

fn check_in_front(spec: &SceneSpec, surface: &Surface, view: &View) -> Result<()> {
    if spec.depth_m <= spec.obstacle_height() + 1e-3 {
        return Err(Error::InvalidInput("surface reaches the camera"));
    }
    let (cx, cy) = (spec.camera.cx, spec.camera.cy);
    match surface.hit(view.center, view.ray(cx, cy)) {
        Some(p) if view.camera_coords(p).z > 0.0 => Ok(()),
        _ => Err(Error::InvalidInput("surface is not in front of the camera")),
    }
}

/// Homography taking pixels of `to` onto pixels of `from` for the plane
/// `normal . x = offset` (both views share one rotation).
fn plane_homography(from: &View, to: &View, normal: Vec3, offset: f64) -> Result<Homography> {
    let k = from.k;
    let kmat: Mat3 = [[k.fx, 0.0, k.cx], [0.0, k.fy, k.cy], [0.0, 0.0, 1.0]];
    let kinv: Mat3 = [
        [1.0 / k.fx, 0.0, -k.cx / k.fx],
        [0.0, 1.0 / k.fy, -k.cy / k.fy],
        [0.0, 0.0, 1.0],
    ];
    let inv = from.rot.inverse();
    let dc = inv.rotate(to.center - from.center);
    let n = inv.rotate(normal);
    let denom = offset - normal.dot(to.center);
    let (dc, n) = ([dc.x, dc.y, dc.z], [n.x, n.y, n.z]);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = if i == j { 1.0 } else { 0.0 } + dc[i] * n[j] / denom;
        }
    }
    Homography::from_matrix(mat3_mul(&mat3_mul(&kmat, &m), &kinv))
}

#[derive(Debug, Clone)]
pub struct MonoSequence {
    pub frames: Vec<GrayImage>,
    /// Ground truth for each consecutive pair `(t, t + 1)`.
    pub steps: Vec<GroundTruth>,
}

/// Frames of a vertical descent at `descent_rate` m/s, one every `frame_dt`
/// seconds. Ripple scenes add a traveling image-space sinusoid.
pub fn render_mono_sequence(
    spec: &SceneSpec,
    n_frames: usize,
    descent_rate: f64,
    frame_dt: f64,
) -> Result<MonoSequence> {
    spec.validate()?;
    if n_frames < 2 {
        return Err(Error::InvalidInput("sequence needs at least 2 frames"));
    }
    if !descent_rate.is_finite() || !(frame_dt > 0.0) || !frame_dt.is_finite() {
        return Err(Error::InvalidInput("descent rate and frame dt must be finite"));
    }
    let surface = spec.surface();
    let rot = spec.camera_rotation();
    let views: Vec<View> = (0..n_frames)
        .map(|t| View {
            center: Vec3::new(0.0, 0.0, spec.depth_m - descent_rate * frame_dt * t as f64),
            rot,
            k: spec.camera,
        })
        .collect();
    for v in &views {
        let s = SceneSpec {
            depth_m: v.center.z,
            ..*spec
        };
        check_in_front(&s, &surface, v)?;
    }

    let ripple = |t: usize| -> Option<Ripple> {
        (spec.kind == SceneKind::RippleSurface && spec.ripple_amp_px > 0.0).then(|| Ripple {
            amp: spec.ripple_amp_px,
            wavenumber: 2.0 * PI / spec.ripple_wavelength_px,
            phase: RIPPLE_PHASE_STEP * t as f64,
        })
    };

    let frames: Vec<GrayImage> = views
        .iter()
        .enumerate()
        .map(|(t, v)| render_view(&surface, v, spec.image_size, ripple(t)))
        .collect();

    let points = sample_grid(spec.image_size, GT_FLOW_STRIDE, GT_FLOW_MARGIN)?;
    let (w, h) = (spec.image_size.0 as f64, spec.image_size.1 as f64);
    let mut steps = Vec::with_capacity(n_frames - 1);
    for t in 0..n_frames - 1 {
        let (a, b) = (&views[t], &views[t + 1]);
        let (ra, rb) = (ripple(t), ripple(t + 1));
        let mut disp = Vec::with_capacity(points.len());
        let mut valid = Vec::with_capacity(points.len());
        for p in &points {
            let y = match ra {
                Some(r) => {
                    let (du, dv) = r.offset(p[0], p[1]);
                    (p[0] - du, p[1] - dv)
                }
                None => (p[0], p[1]),
            };
            let tracked = surface.hit(a.center, a.ray(y.0, y.1)).and_then(|x| {
                let y2 = b.project(x)?;
                // the next view must see this same point first
                let seen = surface.hit(b.center, b.ray(y2.0, y2.1))?;
                ((seen - x).norm() <= 1e-6 * (1.0 + b.camera_coords(x).z)).then_some(y2)
            });
            match tracked.map(|y2| rb.map_or(y2, |r| r.invert(y2))) {
                Some(x2) if x2.0 >= 0.0 && x2.0 <= w - 1.0 && x2.1 >= 0.0 && x2.1 <= h - 1.0 => {
                    disp.push([x2.0 - p[0], x2.1 - p[1]]);
                    valid.push(true);
                }
                _ => {
                    disp.push([0.0, 0.0]);
                    valid.push(false);
                }
            }
        }
        let flow = FlowField::new(points.clone(), disp, valid, spec.image_size)?;
        let homography = match (spec.kind, ra) {
            (SceneKind::FlatPlane | SceneKind::Ramp | SceneKind::Textureless, None)
            | (SceneKind::RippleSurface, None) => {
                let Prim::Plane { normal, offset } = surface.prims[0] else {
                    unreachable!("planar scenes start with their plane")
                };
                Some(plane_homography(a, b, normal, offset)?)
            }
            _ => None,
        };
        steps.push(GroundTruth {
            disparity: None,
            flow: Some(flow),
            homography,
            cell_slopes: Vec::new(),
            safe_label: spec.safe_label(),
        });
    }
    Ok(MonoSequence { frames, steps })
}

/// `n` copies of a fixed orientation.
pub fn static_trajectory(q: UnitQuaternion, n: usize) -> Vec<UnitQuaternion> {
    alloc::vec![q; n]
}

/// Constant-rate rotation about a body axis, starting at `start`.
pub fn spin_trajectory(
    start: UnitQuaternion,
    axis: Vec3,
    rate: f64,
    dt: f64,
    n: usize,
) -> Vec<UnitQuaternion> {
    (0..n)
        .map(|k| start * UnitQuaternion::from_axis_angle(axis, rate * dt * k as f64))
        .collect()
}

/// IMU stream along a body-to-world orientation trajectory sampled at
/// `rate` Hz, with seeded zero-mean Gaussian noise.
pub fn generate_imu(
    trajectory: &[UnitQuaternion],
    rate: f64,
    gyro_noise: f64,
    accel_noise: f64,
    seed: u64,
) -> Result<Vec<ImuSample>> {
    if trajectory.len() < 2 {
        return Err(Error::InvalidInput("trajectory needs at least 2 poses"));
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidInput("IMU rate must be positive"));
    }
    let gyro_dist =
        Normal::new(0.0, gyro_noise).map_err(|_| Error::InvalidInput("gyro noise must be non-negative"))?;
    let accel_dist =
        Normal::new(0.0, accel_noise).map_err(|_| Error::InvalidInput("accel noise must be non-negative"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / rate;
    let mut out = Vec::with_capacity(trajectory.len() - 1);
    for pair in trajectory.windows(2) {
        let mut delta = UnitQuaternion::hamilton(pair[0].inverse(), pair[1]);
        if delta.w < 0.0 {
            delta = UnitQuaternion {
                w: -delta.w,
                x: -delta.x,
                y: -delta.y,
                z: -delta.z,
            };
        }
        let axis = Vec3::new(delta.x, delta.y, delta.z);
        let omega = match axis.normalized() {
            Some(a) => a * (delta.angle() / dt),
            None => Vec3::ZERO,
        };
        let mut noise =
            |d: &Normal<f64>| Vec3::new(d.sample(&mut rng), d.sample(&mut rng), d.sample(&mut rng));
        let gyro = omega + noise(&gyro_dist);
        let accel = pair[1].inverse().rotate(Vec3::new(0.0, 0.0, GRAVITY)) + noise(&accel_dist);
        out.push(ImuSample { gyro, accel, dt });
    }
    Ok(out)
}
