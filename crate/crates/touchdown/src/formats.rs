//! Binary raster files: 8-bit PGM (`P5`), 8-bit PPM (`P6`) and grayscale
//! PFM (`Pf`).
//!
//! PGM samples map to `[0, 1]` by `v / 255`. PFM maps are written
//! little-endian (scale `-1.0`) with the bottom row first; invalid
//! disparities are stored as `+inf`.

use std::fs;
use std::path::Path;

use touchdown_core::stereo::DisparityMap;
use touchdown_core::terrain::RgbImage;
use touchdown_core::GrayImage;

use crate::error::{Error, Result};

/// Reads whitespace-separated header tokens, skipping `#` comments, and
/// returns them with the offset of the single whitespace byte that ends the
/// header.
fn netpbm_header(bytes: &[u8], count: usize) -> Option<(Vec<&str>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(std::str::from_utf8(&bytes[start..i]).ok()?);
    }
    // exactly one whitespace byte before the raster
    (i < bytes.len()).then_some((tokens, i + 1))
}

fn parse_dim(s: &str) -> Option<usize> {
    s.parse::<usize>().ok().filter(|v| *v > 0)
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let (tok, offset) = netpbm_header(bytes, 4).ok_or_else(|| Error::format(path, "truncated PGM header"))?;
    if tok[0] != "P5" {
        return Err(Error::format(
            path,
            format!("expected P5 magic, found {:?}", tok[0]),
        ));
    }
    let (w, h) = match (parse_dim(tok[1]), parse_dim(tok[2])) {
        (Some(w), Some(h)) => (w, h),
        _ => return Err(Error::format(path, "bad PGM dimensions")),
    };
    if tok[3] != "255" {
        return Err(Error::format(
            path,
            format!("only maxval 255 is supported, found {}", tok[3]),
        ));
    }
    let raster = &bytes[offset..];
    if raster.len() != w * h {
        return Err(Error::format(
            path,
            format!("expected {} raster bytes, found {}", w * h, raster.len()),
        ));
    }
    let data = raster.iter().map(|v| *v as f32 / 255.0).collect();
    Ok(GrayImage::new(w, h, data)?)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<DisparityMap> {
    let (tok, offset) = netpbm_header(bytes, 4).ok_or_else(|| Error::format(path, "truncated PFM header"))?;
    match tok[0] {
        "Pf" => {}
        "PF" => return Err(Error::format(path, "color PFM is not a disparity map")),
        m => return Err(Error::format(path, format!("expected Pf magic, found {m:?}"))),
    }
    let (w, h) = match (parse_dim(tok[1]), parse_dim(tok[2])) {
        (Some(w), Some(h)) => (w, h),
        _ => return Err(Error::format(path, "bad PFM dimensions")),
    };
    let scale: f32 = tok[3]
        .parse()
        .ok()
        .filter(|s: &f32| s.is_finite() && *s != 0.0)
        .ok_or_else(|| Error::format(path, format!("bad PFM scale {:?}", tok[3])))?;
    let raster = &bytes[offset..];
    if raster.len() != 4 * w * h {
        return Err(Error::format(
            path,
            format!("expected {} raster bytes, found {}", 4 * w * h, raster.len()),
        ));
    }
    let mut data = vec![0f32; w * h];
    for (k, chunk) in raster.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if scale < 0.0 {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        // bottom-up rows
        let (row, col) = (h - 1 - k / w, k % w);
        data[row * w + col] = v;
    }
    Ok(DisparityMap::from_values(w, h, data)?)
}

pub fn encode_pfm(d: &DisparityMap) -> Vec<u8> {
    let (w, h) = d.size();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for row in d.data().chunks_exact(w).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    decode_pgm(&read(path)?, path)
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    write(path, &encode_pgm(img))
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    write(path, &encode_ppm(img))
}

pub fn read_pfm(path: &Path) -> Result<DisparityMap> {
    decode_pfm(&read(path)?, path)
}

pub fn write_pfm(path: &Path, d: &DisparityMap) -> Result<()> {
    write(path, &encode_pfm(d))
}
