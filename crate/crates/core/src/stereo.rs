//! Rectified-pair block matching (SAD cost), left-right consistency and the
//! bad-pixel benchmark metric.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::GrayImage;
use crate::{math, Error, Result};

/// Marker stored for pixels without a disparity estimate.
pub const INVALID_DISPARITY: f32 = f32::INFINITY;

/// Per-pixel horizontal disparity referenced to one image of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
    min_disp: f32,
    max_disp: f32,
    params_hash: u64,
}

impl DisparityMap {
    /// Map produced under known search bounds. Non-finite entries are
    /// treated as invalid; finite entries must lie in `[min_disp, max_disp]`.
    pub fn new(
        width: usize,
        height: usize,
        mut data: Vec<f32>,
        min_disp: f32,
        max_disp: f32,
        params_hash: u64,
    ) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput("disparity count does not match dimensions"));
        }
        if !(min_disp <= max_disp) {
            return Err(Error::InvalidInput("min_disp must not exceed max_disp"));
        }
        for d in data.iter_mut() {
            if !d.is_finite() {
                *d = INVALID_DISPARITY;
            } else if *d < min_disp || *d > max_disp {
                return Err(Error::InvalidInput("disparity outside the declared range"));
            }
        }
        Ok(Self {
            width,
            height,
            data,
            min_disp,
            max_disp,
            params_hash,
        })
    }

    /// Map of arbitrary provenance (ground truth, files). Non-finite and
    /// negative values become invalid; the range is taken from the data.
    pub fn from_values(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput("disparity count does not match dimensions"));
        }
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for d in data.iter_mut() {
            if !d.is_finite() || *d < 0.0 {
                *d = INVALID_DISPARITY;
            } else {
                lo = lo.min(*d);
                hi = hi.max(*d);
            }
        }
        if lo > hi {
            lo = 0.0;
            hi = 0.0;
        }
        Ok(Self {
            width,
            height,
            data,
            min_disp: lo,
            max_disp: hi,
            params_hash: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn min_disp(&self) -> f32 {
        self.min_disp
    }

    pub fn max_disp(&self) -> f32 {
        self.max_disp
    }

    pub fn params_hash(&self) -> u64 {
        self.params_hash
    }

    /// Raw values, `INVALID_DISPARITY` marking missing estimates.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f32> {
        let d = self.data[v * self.width + u];
        d.is_finite().then_some(d)
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| d.is_finite()).count()
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u].is_finite()
    }

    fn with_data(&self, data: Vec<f32>) -> Self {
        Self { data, ..self.clone() }
    }

    pub fn flip_horizontal(&self) -> Self {
        let w = self.width;
        let mut data = Vec::with_capacity(self.data.len());
        for v in 0..self.height {
            let row = &self.data[v * w..(v + 1) * w];
            data.extend(row.iter().rev());
        }
        self.with_data(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMatchParams {
    /// Odd block side length, pixels.
    pub block: usize,
    pub min_disp: usize,
    pub max_disp: usize,
    /// Minimum intensity variance of the reference block.
    pub texture_threshold: f64,
    /// Best cost times this ratio must stay below the runner-up cost.
    pub uniqueness_ratio: f64,
    /// Left-right consistency tolerance, pixels.
    pub lr_tolerance: f64,
}

impl Default for BlockMatchParams {
    fn default() -> Self {
        Self {
            block: 11,
            min_disp: 0,
            max_disp: 64,
            texture_threshold: 1e-4,
            uniqueness_ratio: 1.15,
            lr_tolerance: 1.0,
        }
    }
}

/// Largest block accepted; keeps window costs inside `i32`.
pub const MAX_BLOCK: usize = 101;

impl BlockMatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.block < 5 || self.block.is_multiple_of(2) || self.block > MAX_BLOCK {
            return Err(Error::InvalidInput("block size must be odd, in [5, 101]"));
        }
        if self.max_disp <= self.min_disp {
            return Err(Error::InvalidInput("max_disp must exceed min_disp"));
        }
        if !(self.texture_threshold >= 0.0) || !self.texture_threshold.is_finite() {
            return Err(Error::InvalidInput("texture_threshold must be non-negative"));
        }
        if !(self.uniqueness_ratio >= 1.0) || !self.uniqueness_ratio.is_finite() {
            return Err(Error::InvalidInput("uniqueness_ratio must be at least 1"));
        }
        if !(self.lr_tolerance >= 0.0) || !self.lr_tolerance.is_finite() {
            return Err(Error::InvalidInput("lr_tolerance must be non-negative"));
        }
        Ok(())
    }

    /// FNV-1a over the parameter bits; identifies the producing settings.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let words = [
            self.block as u64,
            self.min_disp as u64,
            self.max_disp as u64,
            self.texture_threshold.to_bits(),
            self.uniqueness_ratio.to_bits(),
            self.lr_tolerance.to_bits(),
        ];
        for w in words {
            for b in w.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

const QUANT_SCALE: f32 = 65535.0;

fn quantize(img: &GrayImage) -> Vec<i32> {
    img.data()
        .iter()
        .map(|v| math::round((v * QUANT_SCALE) as f64) as i32)
        .collect()
}

/// Summed-area tables of intensity and squared intensity.
struct Integral {
    w1: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Integral {
    fn new(img: &GrayImage) -> Self {
        let (w, h) = img.size();
        let w1 = w + 1;
        let mut sum = vec![0.0; w1 * (h + 1)];
        let mut sq = vec![0.0; w1 * (h + 1)];
        for y in 0..h {
            let (mut rs, mut rq) = (0.0, 0.0);
            for x in 0..w {
                let v = img.get(x, y) as f64;
                rs += v;
                rq += v * v;
                sum[(y + 1) * w1 + x + 1] = sum[y * w1 + x + 1] + rs;
                sq[(y + 1) * w1 + x + 1] = sq[y * w1 + x + 1] + rq;
            }
        }
        Self { w1, sum, sq }
    }

    /// Variance over the inclusive box `[x0, x1] x [y0, y1]`.
    fn variance(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let area = |t: &[f64]| {
            t[(y1 + 1) * self.w1 + x1 + 1] - t[y0 * self.w1 + x1 + 1] - t[(y1 + 1) * self.w1 + x0]
                + t[y0 * self.w1 + x0]
        };
        let n = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
        let mean = area(&self.sum) / n;
        (area(&self.sq) / n - mean * mean).max(0.0)
    }
}

/// Disparity of every left pixel: the shift `d` minimizing the SAD between
/// the left block at `u` and the right block at `u - d` on the same row.
///
/// A pixel is left invalid when its block is too flat, when the winner is not
/// distinct enough from the best cost more than one step away, or when the
/// block or any searched block leaves the image.
pub fn compute_disparity(left: &GrayImage, right: &GrayImage, p: &BlockMatchParams) -> Result<DisparityMap> {
    p.validate()?;
    if left.size() != right.size() {
        return Err(Error::SizeMismatch {
            expected: left.size(),
            got: right.size(),
        });
    }
    let (w, h) = left.size();
    let r = p.block / 2;
    let mut out = vec![INVALID_DISPARITY; w * h];

    let u_start = r + p.max_disp;
    if h < p.block || w < u_start + r + 1 {
        return DisparityMap::new(w, h, out, p.min_disp as f32, p.max_disp as f32, p.hash());
    }
    let u_end = w - r; // exclusive

    let ql = quantize(left);
    let qr = quantize(right);
    let integral = Integral::new(left);
    let nd = p.max_disp - p.min_disp + 1;

    // colsum[di * w + u] = sum over the block rows of |L(u) - R(u - d)|
    let mut colsum = vec![0i32; nd * w];
    let row_ad = |y: usize, di: usize, u: usize| -> i32 {
        let d = p.min_disp + di;
        (ql[y * w + u] - qr[y * w + u - d]).abs()
    };
    for y in 0..p.block {
        for di in 0..nd {
            let d = p.min_disp + di;
            let cs = &mut colsum[di * w..(di + 1) * w];
            for (u, c) in cs.iter_mut().enumerate().skip(d) {
                *c += row_ad(y, di, u);
            }
        }
    }

    let span = u_end - u_start;
    let mut cost = vec![0i32; nd * span];
    for v in r..h - r {
        if v > r {
            let (add, sub) = (v + r, v - r - 1);
            for di in 0..nd {
                let d = p.min_disp + di;
                let (la, ra) = (&ql[add * w..(add + 1) * w], &qr[add * w..(add + 1) * w]);
                let (ls, rs) = (&ql[sub * w..(sub + 1) * w], &qr[sub * w..(sub + 1) * w]);
                let cs = &mut colsum[di * w..(di + 1) * w];
                for u in d..w {
                    cs[u] += (la[u] - ra[u - d]).abs() - (ls[u] - rs[u - d]).abs();
                }
            }
        }

        for di in 0..nd {
            let cs = &colsum[di * w..(di + 1) * w];
            let row = &mut cost[di * span..(di + 1) * span];
            let mut acc: i32 = cs[u_start - r..=u_start + r].iter().sum();
            row[0] = acc;
            for (k, u) in (u_start + 1..u_end).enumerate() {
                acc += cs[u + r] - cs[u - r - 1];
                row[k + 1] = acc;
            }
        }

        for k in 0..span {
            let u = u_start + k;
            if integral.variance(u - r, v - r, u + r, v + r) < p.texture_threshold {
                continue;
            }
            let mut best = 0usize;
            let mut best_cost = cost[k];
            for di in 1..nd {
                let c = cost[di * span + k];
                if c < best_cost {
                    best_cost = c;
                    best = di;
                }
            }
            let mut second = i32::MAX;
            for di in 0..nd {
                if di + 1 < best || di > best + 1 {
                    second = second.min(cost[di * span + k]);
                }
            }
            if second != i32::MAX && best_cost as f64 * p.uniqueness_ratio >= second as f64 {
                continue;
            }
            let mut d = (p.min_disp + best) as f64;
            if best > 0 && best + 1 < nd {
                let cm = cost[(best - 1) * span + k] as f64;
                let cp = cost[(best + 1) * span + k] as f64;
                let c0 = best_cost as f64;
                // SAD is V-shaped around its minimum: fit two lines of equal
                // and opposite slope through the three costs
                let denom = 2.0 * (cm.max(cp) - c0);
                if denom > 0.0 {
                    d += ((cm - cp) / denom).clamp(-0.5, 0.5);
                }
            }
            out[v * w + u] = d as f32;
        }
    }
    DisparityMap::new(w, h, out, p.min_disp as f32, p.max_disp as f32, p.hash())
}

/// Disparity referenced to the right image: right pixel `u` matches left
/// pixel `u + d`. Runs the same matcher on the mirrored pair.
pub fn compute_disparity_right(
    left: &GrayImage,
    right: &GrayImage,
    p: &BlockMatchParams,
) -> Result<DisparityMap> {
    if left.size() != right.size() {
        return Err(Error::SizeMismatch {
            expected: left.size(),
            got: right.size(),
        });
    }
    let mirrored = compute_disparity(&right.flip_horizontal(), &left.flip_horizontal(), p)?;
    Ok(mirrored.flip_horizontal())
}

/// Invalidates left-map pixels whose right-map partner at `u - d` disagrees
/// by more than `tol` or is missing. Never validates a pixel.
pub fn left_right_check(d_left: &DisparityMap, d_right: &DisparityMap, tol: f64) -> Result<DisparityMap> {
    if d_left.size() != d_right.size() {
        return Err(Error::SizeMismatch {
            expected: d_left.size(),
            got: d_right.size(),
        });
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput("LR tolerance must be non-negative"));
    }
    let (w, h) = d_left.size();
    let mut out = d_left.data.clone();
    for v in 0..h {
        for u in 0..w {
            let Some(dl) = d_left.get(u, v) else { continue };
            let ur = math::round(u as f64 - dl as f64);
            let consistent = ur >= 0.0
                && ur < w as f64
                && d_right
                    .get(ur as usize, v)
                    .is_some_and(|dr| math::abs(dl as f64 - dr as f64) <= tol);
            if !consistent {
                out[v * w + u] = INVALID_DISPARITY;
            }
        }
    }
    Ok(d_left.with_data(out))
}

/// Percentage of ground-truth-valid pixels whose estimate is missing or off
/// by more than `tau` pixels.
pub fn bad_pixel_rate(est: &DisparityMap, gt: &DisparityMap, tau: f64) -> Result<f64> {
    if est.size() != gt.size() {
        return Err(Error::SizeMismatch {
            expected: gt.size(),
            got: est.size(),
        });
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput("tau must be non-negative"));
    }
    let (mut total, mut bad) = (0usize, 0usize);
    for (e, g) in est.data.iter().zip(&gt.data) {
        if !g.is_finite() {
            continue;
        }
        total += 1;
        if !e.is_finite() || math::abs(*e as f64 - *g as f64) > tau {
            bad += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidInput("ground truth has no valid pixels"));
    }
    Ok(100.0 * bad as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shifted_pair(w: usize, h: usize, shift: usize, seed: u64) -> (GrayImage, GrayImage) {
        let big = crate::sim::noise_image(w + shift, h, seed, 3.0);
        // L(u) = R(u - shift)
        let left = GrayImage::from_fn(w, h, |x, y| big.get(x, y));
        let right = GrayImage::from_fn(w, h, |x, y| big.get(x + shift, y));
        (left, right)
    }

    #[test]
    fn shifted_noise_recovers_shift() {
        let (l, r) = shifted_pair(200, 80, 24, 7);
        let d = compute_disparity(&l, &r, &BlockMatchParams::default()).unwrap();
        let interior = (80 - 10) * (200 - 5 - 64 - 5);
        assert!(d.valid_count() * 10 >= interior * 8);
        for v in 0..80 {
            for u in 0..200 {
                if let Some(x) = d.get(u, v) {
                    assert!((x - 24.0).abs() <= 0.25, "({u},{v}) = {x}");
                }
            }
        }
    }

    #[test]
    fn identical_pair_zero_disparity() {
        let img = crate::sim::noise_image(160, 60, 2, 3.0);
        let d = compute_disparity(&img, &img, &BlockMatchParams::default()).unwrap();
        assert!(d.valid_count() > 0);
        assert!(d.data().iter().filter(|x| x.is_finite()).all(|x| *x == 0.0));
    }

    #[test]
    fn constant_pair_all_invalid() {
        let img = GrayImage::constant(160, 60, 0.5);
        let d = compute_disparity(&img, &img, &BlockMatchParams::default()).unwrap();
        assert_eq!(d.valid_count(), 0);
    }

    #[test]
    fn size_mismatch_and_bad_params() {
        let a = GrayImage::constant(100, 50, 0.5);
        let b = GrayImage::constant(100, 40, 0.5);
        assert!(matches!(
            compute_disparity(&a, &b, &BlockMatchParams::default()),
            Err(Error::SizeMismatch { .. })
        ));
        let p = BlockMatchParams {
            block: 4,
            ..BlockMatchParams::default()
        };
        assert!(compute_disparity(&a, &a, &p).is_err());
        let p = BlockMatchParams {
            min_disp: 64,
            ..BlockMatchParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn tiny_image_yields_empty_map() {
        let a = crate::sim::noise_image(60, 30, 1, 3.0);
        let d = compute_disparity(&a, &a, &BlockMatchParams::default()).unwrap();
        assert_eq!(d.valid_count(), 0);
        assert_eq!(d.size(), (60, 30));
    }

    #[test]
    fn right_map_matches_mirror_relation() {
        let (l, r) = shifted_pair(200, 60, 8, 3);
        let p = BlockMatchParams::default();
        let dr = compute_disparity_right(&l, &r, &p).unwrap();
        let mut n = 0;
        for v in 0..60 {
            for u in 0..200 {
                if let Some(x) = dr.get(u, v) {
                    assert!((x - 8.0).abs() <= 0.25);
                    assert!(u + 64 + 5 < 200);
                    n += 1;
                }
            }
        }
        assert!(n > 0);
    }

    fn map(vals: &[f32], w: usize) -> DisparityMap {
        DisparityMap::from_values(w, vals.len() / w, vals.to_vec()).unwrap()
    }

    #[test]
    fn bad_pixel_counting() {
        let gt = map(&[10.0; 10], 10);
        assert_eq!(bad_pixel_rate(&gt, &gt, 4.0).unwrap(), 0.0);
        let mut e = [10.0f32; 10];
        e[3] = 15.0;
        assert_eq!(bad_pixel_rate(&map(&e, 10), &gt, 4.0).unwrap(), 10.0);
        let none = map(&[f32::INFINITY; 10], 10);
        assert_eq!(bad_pixel_rate(&none, &gt, 4.0).unwrap(), 100.0);
        assert!(bad_pixel_rate(&gt, &none, 4.0).is_err());
    }

    #[test]
    fn lr_check_rejects_everything_without_right_map() {
        let dl = map(&[2.0; 20], 10);
        let dr = map(&[f32::INFINITY; 20], 10);
        assert_eq!(left_right_check(&dl, &dr, 1.0).unwrap().valid_count(), 0);
    }

    #[test]
    fn lr_check_keeps_consistent_pixels() {
        let dl = map(&[2.0; 20], 10);
        let out = left_right_check(&dl, &dl, 1.0).unwrap();
        // the first two columns look up outside the right image
        assert_eq!(out.valid_count(), 16);
        assert!(!out.is_valid(1, 0) && out.is_valid(2, 0));
    }

    #[test]
    fn disparity_map_range_enforced() {
        assert!(DisparityMap::new(2, 1, alloc::vec![1.0, 70.0], 0.0, 64.0, 0).is_err());
        let m = DisparityMap::new(2, 1, alloc::vec![1.0, f32::NAN], 0.0, 64.0, 0).unwrap();
        assert_eq!(m.get(1, 0), None);
        let m = DisparityMap::from_values(3, 1, alloc::vec![-1.0, 2.0, 5.0]).unwrap();
        assert_eq!((m.min_disp(), m.max_disp(), m.valid_count()), (2.0, 5.0, 2));
    }

    #[test]
    fn params_hash_distinguishes() {
        let a = BlockMatchParams::default();
        let b = BlockMatchParams { block: 13, ..a };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), BlockMatchParams::default().hash());
    }
}
