//! Simulator scene descriptions: flat `key = value` text.

use std::fs;
use std::path::Path;

use touchdown_core::sim::{SceneKind, SceneSpec};

use crate::config::{parse_entries, parse_value};
use crate::error::{Error, Result};

/// A scene plus the sequence and IMU settings used by `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub spec: SceneSpec,
    /// Mono frames to render; 0 skips the sequence.
    pub frames: usize,
    pub descent_rate: f64,
    pub frame_dt: f64,
    pub imu_rate: f64,
    /// 0 skips the IMU stream.
    pub imu_seconds: f64,
    pub gyro_noise: f64,
    pub accel_noise: f64,
}

impl Default for SceneFile {
    fn default() -> Self {
        Self {
            spec: SceneSpec::default(),
            frames: 10,
            descent_rate: 0.5,
            frame_dt: 0.1,
            imu_rate: 200.0,
            imu_seconds: 1.0,
            gyro_noise: 1e-3,
            accel_noise: 0.02,
        }
    }
}

pub const KEYS: &[&str] = &[
    "kind",
    "depth_m",
    "ramp_deg",
    "box_w",
    "box_d",
    "box_h",
    "step_h",
    "ripple_amp_px",
    "ripple_wavelength_px",
    "tilt_deg",
    "contrast",
    "seed",
    "fx",
    "fy",
    "cx",
    "cy",
    "baseline",
    "width",
    "height",
    "frames",
    "descent_rate",
    "frame_dt",
    "imu_rate",
    "imu_seconds",
    "gyro_noise",
    "accel_noise",
];

impl SceneFile {
    /// `width`/`height` re-center the principal point unless `cx`/`cy` are
    /// also given.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let entries = parse_entries(text, origin)?;
        let mut sf = Self::default();
        let s = &mut sf.spec;
        let (mut w, mut h) = s.image_size;
        let (mut cx, mut cy) = (None, None);
        for e in &entries {
            let v = || parse_value::<f64>(e, origin);
            match e.key.as_str() {
                "kind" => {
                    s.kind = SceneKind::parse(&e.value).ok_or_else(|| Error::Config {
                        origin: origin.to_string(),
                        line: e.line,
                        msg: format!("unknown scene kind {:?}", e.value),
                    })?
                }
                "depth_m" => s.depth_m = v()?,
                "ramp_deg" => s.ramp_deg = v()?,
                "box_w" => s.box_w = v()?,
                "box_d" => s.box_d = v()?,
                "box_h" => s.box_h = v()?,
                "step_h" => s.step_h = v()?,
                "ripple_amp_px" => s.ripple_amp_px = v()?,
                "ripple_wavelength_px" => s.ripple_wavelength_px = v()?,
                "tilt_deg" => s.tilt_deg = v()?,
                "contrast" => s.contrast = v()?,
                "seed" => s.texture_seed = parse_value(e, origin)?,
                "fx" => s.camera.fx = v()?,
                "fy" => s.camera.fy = v()?,
                "cx" => cx = Some(v()?),
                "cy" => cy = Some(v()?),
                "baseline" => s.camera.baseline = v()?,
                "width" => w = parse_value(e, origin)?,
                "height" => h = parse_value(e, origin)?,
                "frames" => sf.frames = parse_value(e, origin)?,
                "descent_rate" => sf.descent_rate = v()?,
                "frame_dt" => sf.frame_dt = v()?,
                "imu_rate" => sf.imu_rate = v()?,
                "imu_seconds" => sf.imu_seconds = v()?,
                "gyro_noise" => sf.gyro_noise = v()?,
                "accel_noise" => sf.accel_noise = v()?,
                other => {
                    return Err(Error::Config {
                        origin: origin.to_string(),
                        line: e.line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        if (w, h) != sf.spec.image_size {
            sf.spec = sf.spec.with_size(w, h);
        }
        if let Some(cx) = cx {
            sf.spec.camera.cx = cx;
        }
        if let Some(cy) = cy {
            sf.spec.camera.cy = cy;
        }
        sf.validate().map_err(|e| Error::Config {
            origin: origin.to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(sf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.frames == 1 {
            return Err(Error::Usage("frames must be 0 or at least 2".into()));
        }
        let pos = [self.frame_dt, self.imu_rate];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Usage("frame_dt and imu_rate must be positive".into()));
        }
        let non_neg = [
            self.descent_rate,
            self.imu_seconds,
            self.gyro_noise,
            self.accel_noise,
        ];
        if non_neg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Usage(
                "descent_rate, imu_seconds and noise levels must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Number of IMU samples (poses) covering `imu_seconds`.
    pub fn imu_poses(&self) -> usize {
        (self.imu_seconds * self.imu_rate).round() as usize + 1
    }
}
