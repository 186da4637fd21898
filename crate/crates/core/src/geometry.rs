//! Images, pinhole stereo camera, 3-vectors and unit quaternions.
//!
//! Camera frame: x right, y down, z forward along the optical axis.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use crate::{math, Error, Result};

/// Single-channel intensity raster, row-major, intensities in `[0, 1]`.
///
/// Immutable once built; operations produce new images.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image dimensions must be non-zero"));
        }
        if data.len() != width * height {
            return Err(Error::InvalidInput("pixel count does not match dimensions"));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("intensity outside [0, 1]"));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` per pixel; values are clamped
    /// into `[0, 1]` (non-finite values become 0).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                data.push(if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 });
            }
        }
        Self { width, height, data }
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Bilinear sample with coordinates clamped to the frame.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = math::floor(x) as usize;
        let y0 = math::floor(y) as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) as f64 * (1.0 - fx) + self.get(x1, y0) as f64 * fx;
        let bottom = self.get(x0, y1) as f64 * (1.0 - fx) + self.get(x1, y1) as f64 * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Mirror image about the vertical axis.
    pub fn flip_horizontal(&self) -> Self {
        let w = self.width;
        Self::from_fn(w, self.height, |x, y| self.get(w - 1 - x, y))
    }
}

/// Rectified stereo pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Stereo baseline in meters; the right camera sits at `+baseline` on x.
    pub baseline: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, baseline: f64) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            baseline,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.fx, self.fy, self.cx, self.cy, self.baseline];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("intrinsics must be finite"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidInput("focal lengths must be positive"));
        }
        if self.baseline <= 0.0 {
            return Err(Error::InvalidInput("baseline must be positive"));
        }
        Ok(())
    }

    /// Checks that the principal point lies inside a `width x height` frame.
    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        self.validate()?;
        if !(0.0..width as f64).contains(&self.cx) || !(0.0..height as f64).contains(&self.cy) {
            return Err(Error::InvalidInput("principal point outside the image"));
        }
        Ok(())
    }

    /// Projects a camera-frame point to `(u, v, disparity)`.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64, f64)> {
        if !(p.z > 0.0) {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            self.fx * self.baseline / p.z,
        ))
    }
}

/// Unprojects pixel `(u, v)` with disparity `d` into the left camera frame.
pub fn disparity_to_point(u: f64, v: f64, d: f64, k: &CameraIntrinsics) -> Result<Vec3> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::InvalidInput("disparity must be positive and finite"));
    }
    let z = k.fx * k.baseline / d;
    Ok(Vec3::new((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(self) -> f64 {
        math::sqrt(self.dot(self))
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation quaternion `w + xi + yj + zk`, kept at unit norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes `(w, x, y, z)`; the zero quaternion maps to identity.
    pub fn new_normalize(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = math::sqrt(w * w + x * x + y * y + z * z);
        if !(n > 0.0) || !n.is_finite() {
            return Self::IDENTITY;
        }
        Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let Some(a) = axis.normalized() else {
            return Self::IDENTITY;
        };
        let (s, c) = (math::sin(angle / 2.0), math::cos(angle / 2.0));
        Self::new_normalize(c, a.x * s, a.y * s, a.z * s)
    }

    /// Minimal rotation taking unit direction `from` onto unit direction `to`.
    /// Antiparallel inputs rotate by half a turn about `fallback_axis`.
    pub fn rotation_between(from: Vec3, to: Vec3, fallback_axis: Vec3) -> Self {
        let (Some(a), Some(b)) = (from.normalized(), to.normalized()) else {
            return Self::IDENTITY;
        };
        let c = a.dot(b);
        if c < -1.0 + 1e-12 {
            return Self::from_axis_angle(fallback_axis, core::f64::consts::PI);
        }
        let axis = a.cross(b);
        Self::new_normalize(1.0 + c, axis.x, axis.y, axis.z)
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn normalize(self) -> Self {
        Self::new_normalize(self.w, self.x, self.y, self.z)
    }

    pub fn conjugate(self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Inverse of a unit quaternion (its conjugate).
    pub fn inverse(self) -> Self {
        self.conjugate()
    }

    /// Raw Hamilton product without re-normalization.
    pub(crate) fn hamilton(a: Self, b: Self) -> Self {
        Self {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w (u x v) + 2 u x (u x v)
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Rotation angle in `[0, pi]` radians.
    pub fn angle(&self) -> f64 {
        let v = math::sqrt(self.x * self.x + self.y * self.y + self.z * self.z);
        2.0 * math::atan2(v, math::abs(self.w))
    }

    /// Angle of the relative rotation between two orientations.
    pub fn angle_to(&self, other: &Self) -> f64 {
        quaternion_multiply(self.inverse(), *other).angle()
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, rhs: Self) -> Self {
        quaternion_multiply(self, rhs)
    }
}

/// Hamilton product `a * b`, re-normalized.
pub fn quaternion_multiply(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion {
    UnitQuaternion::hamilton(a, b).normalize()
}

/// `q v q^-1` for a unit quaternion `q`.
pub fn rotate_vector(q: &UnitQuaternion, v: Vec3) -> Vec3 {
    q.rotate(v)
}
