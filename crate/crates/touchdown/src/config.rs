//! Flat `section.key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors, and every value is checked against the owning stage when
//! the file is loaded.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use touchdown_core::flow::TrackParams;
use touchdown_core::homography::{MonoConfig, PlanarityState};
use touchdown_core::imu::{OrientationState, DEFAULT_BETA};
use touchdown_core::sim::SceneSpec;
use touchdown_core::stereo::BlockMatchParams;
use touchdown_core::terrain;
use touchdown_core::{CameraIntrinsics, UnitQuaternion, Vec3};

use crate::error::{Error, Result};

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str, origin: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Config {
            origin: origin.to_string(),
            line: k + 1,
            msg,
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(format!("expected `key = value`, found {line:?}")));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(err(format!("empty key or value in {line:?}")));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(err(format!("`{key}` already set on line {}", prev.line)));
        }
        out.push(Entry {
            line: k + 1,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn parse_value<T: FromStr>(e: &Entry, origin: &str) -> Result<T> {
    e.value.parse().map_err(|_| Error::Config {
        origin: origin.to_string(),
        line: e.line,
        msg: format!("bad value {:?} for `{}`", e.value, e.key),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub cell_size: f64,
    pub min_points: usize,
    pub max_range: f64,
    pub slope_max_deg: f64,
    pub rough_max_m: f64,
    pub footprint_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cell_size: terrain::DEFAULT_CELL_SIZE,
            min_points: terrain::DEFAULT_MIN_POINTS,
            max_range: terrain::DEFAULT_MAX_RANGE,
            slope_max_deg: terrain::DEFAULT_SLOPE_MAX_DEG,
            rough_max_m: terrain::DEFAULT_ROUGH_MAX_M,
            footprint_m: terrain::DEFAULT_FOOTPRINT,
        }
    }
}

/// Stereo rig; the principal point defaults to the image center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: Option<f64>,
    pub cy: Option<f64>,
    pub baseline: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        let k = SceneSpec::default().camera;
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: None,
            cy: None,
            baseline: k.baseline,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self, width: usize, height: usize) -> touchdown_core::Result<CameraIntrinsics> {
        let cx = self.cx.unwrap_or(width as f64 / 2.0);
        let cy = self.cy.unwrap_or(height as f64 / 2.0);
        let k = CameraIntrinsics::new(self.fx, self.fy, cx, cy, self.baseline)?;
        k.validate_for(width, height)?;
        Ok(k)
    }
}

/// Every tunable of the mono and stereo pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mono: MonoConfig,
    pub filter_alpha: f64,
    pub filter_threshold: f64,
    pub block: BlockMatchParams,
    pub lr_check: bool,
    pub beta: f64,
    pub grid: GridConfig,
    pub camera: CameraConfig,
    /// Roll, pitch, yaw in degrees of the IMU axes relative to the camera
    /// axes; zero when both share a frame.
    pub imu_mount_deg: [f64; 3],
    pub overlay_scale: usize,
    /// File the values were read from, if any.
    pub source: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mono: MonoConfig::default(),
            filter_alpha: 0.9,
            filter_threshold: 1.0,
            block: BlockMatchParams::default(),
            lr_check: false,
            beta: DEFAULT_BETA,
            grid: GridConfig::default(),
            camera: CameraConfig::default(),
            imu_mount_deg: [0.0; 3],
            overlay_scale: 16,
            source: None,
        }
    }
}

/// Recognized keys, in file order.
pub const KEYS: &[&str] = &[
    "flow.stride",
    "flow.margin",
    "flow.levels",
    "flow.window",
    "flow.max_iters",
    "flow.eps",
    "flow.min_eig",
    "filter.alpha",
    "filter.threshold",
    "stereo.block",
    "stereo.min_disp",
    "stereo.max_disp",
    "stereo.texture_threshold",
    "stereo.uniqueness_ratio",
    "stereo.lr_tolerance",
    "stereo.lr_check",
    "imu.beta",
    "imu.mount_roll_deg",
    "imu.mount_pitch_deg",
    "imu.mount_yaw_deg",
    "grid.cell_size",
    "grid.min_points",
    "grid.max_range",
    "grid.slope_max_deg",
    "grid.rough_max_m",
    "grid.footprint_m",
    "camera.fx",
    "camera.fy",
    "camera.cx",
    "camera.cy",
    "camera.baseline",
    "output.overlay_scale",
];

impl PipelineConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut c = Self::default();
        for e in parse_entries(text, origin)? {
            let v = || parse_value::<f64>(&e, origin);
            let n = || parse_value::<usize>(&e, origin);
            match e.key.as_str() {
                "flow.stride" => c.mono.stride = n()?,
                "flow.margin" => c.mono.margin = n()?,
                "flow.levels" => c.mono.pyramid_levels = n()?,
                "flow.window" => c.mono.track.window = n()?,
                "flow.max_iters" => c.mono.track.max_iters = n()?,
                "flow.eps" => c.mono.track.eps = v()?,
                "flow.min_eig" => c.mono.track.min_eig = v()?,
                "filter.alpha" => c.filter_alpha = v()?,
                "filter.threshold" => c.filter_threshold = v()?,
                "stereo.block" => c.block.block = n()?,
                "stereo.min_disp" => c.block.min_disp = n()?,
                "stereo.max_disp" => c.block.max_disp = n()?,
                "stereo.texture_threshold" => c.block.texture_threshold = v()?,
                "stereo.uniqueness_ratio" => c.block.uniqueness_ratio = v()?,
                "stereo.lr_tolerance" => c.block.lr_tolerance = v()?,
                "stereo.lr_check" => c.lr_check = parse_value(&e, origin)?,
                "imu.beta" => c.beta = v()?,
                "imu.mount_roll_deg" => c.imu_mount_deg[0] = v()?,
                "imu.mount_pitch_deg" => c.imu_mount_deg[1] = v()?,
                "imu.mount_yaw_deg" => c.imu_mount_deg[2] = v()?,
                "grid.cell_size" => c.grid.cell_size = v()?,
                "grid.min_points" => c.grid.min_points = n()?,
                "grid.max_range" => c.grid.max_range = v()?,
                "grid.slope_max_deg" => c.grid.slope_max_deg = v()?,
                "grid.rough_max_m" => c.grid.rough_max_m = v()?,
                "grid.footprint_m" => c.grid.footprint_m = v()?,
                "camera.fx" => c.camera.fx = v()?,
                "camera.fy" => c.camera.fy = v()?,
                "camera.cx" => c.camera.cx = Some(v()?),
                "camera.cy" => c.camera.cy = Some(v()?),
                "camera.baseline" => c.camera.baseline = v()?,
                "output.overlay_scale" => c.overlay_scale = n()?,
                other => {
                    return Err(Error::Config {
                        origin: origin.to_string(),
                        line: e.line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        c.validate().map_err(|e| Error::Config {
            origin: origin.to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text, &path.display().to_string())?;
        c.source = Some(path.to_path_buf());
        Ok(c)
    }

    /// Runs each stage's own parameter checks.
    pub fn validate(&self) -> Result<()> {
        self.mono.validate()?;
        PlanarityState::new(self.filter_alpha, self.filter_threshold)?;
        self.block.validate()?;
        OrientationState::new(UnitQuaternion::IDENTITY, self.beta)?;
        let k = &self.camera;
        CameraIntrinsics::new(k.fx, k.fy, k.cx.unwrap_or(0.0), k.cy.unwrap_or(0.0), k.baseline)?;
        let g = &self.grid;
        let positive = [
            g.cell_size,
            g.max_range,
            g.slope_max_deg,
            g.rough_max_m,
            g.footprint_m,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Usage("grid values must be positive".into()));
        }
        if g.footprint_m < g.cell_size {
            return Err(Error::Usage(
                "grid.footprint_m must cover at least one cell".into(),
            ));
        }
        if g.min_points < 3 {
            return Err(Error::Usage("grid.min_points must be at least 3".into()));
        }
        if self.imu_mount_deg.iter().any(|a| !a.is_finite()) {
            return Err(Error::Usage("imu mount angles must be finite".into()));
        }
        if self.overlay_scale == 0 || self.overlay_scale > 256 {
            return Err(Error::Usage("output.overlay_scale must lie in 1..=256".into()));
        }
        Ok(())
    }

    pub fn track(&self) -> &TrackParams {
        &self.mono.track
    }

    /// Rotation taking IMU-frame vectors into the camera frame.
    pub fn imu_mount(&self) -> UnitQuaternion {
        let [r, p, y] = self.imu_mount_deg.map(f64::to_radians);
        UnitQuaternion::from_axis_angle(Vec3::Z, y)
            * UnitQuaternion::from_axis_angle(Vec3::Y, p)
            * UnitQuaternion::from_axis_angle(Vec3::X, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
        assert_eq!(PipelineConfig::parse("", "t").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn keys_override() {
        let c = PipelineConfig::parse(
            "# tuned\nflow.stride = 10\n\nstereo.lr_check = true\ngrid.slope_max_deg=12.5\n",
            "t",
        )
        .unwrap();
        assert_eq!(c.mono.stride, 10);
        assert!(c.lr_check);
        assert_eq!(c.grid.slope_max_deg, 12.5);
    }

    #[test]
    fn every_listed_key_is_accepted() {
        let defaults = "flow.stride=20\nflow.margin=20\nflow.levels=3\nflow.window=21\nflow.max_iters=30\n\
            flow.eps=0.01\nflow.min_eig=1e-4\nfilter.alpha=0.9\nfilter.threshold=1\nstereo.block=11\n\
            stereo.min_disp=0\nstereo.max_disp=64\nstereo.texture_threshold=1e-4\nstereo.uniqueness_ratio=1.15\n\
            stereo.lr_tolerance=1\nstereo.lr_check=false\nimu.beta=0.1\nimu.mount_roll_deg=0\n\
            imu.mount_pitch_deg=0\nimu.mount_yaw_deg=0\ngrid.cell_size=0.5\ngrid.min_points=20\n\
            grid.max_range=20\ngrid.slope_max_deg=15\ngrid.rough_max_m=0.05\ngrid.footprint_m=1\ncamera.fx=400\n\
            camera.fy=400\ncamera.baseline=0.12\noutput.overlay_scale=16\n";
        assert_eq!(parse_entries(defaults, "t").unwrap().len(), KEYS.len() - 2);
        assert_eq!(
            PipelineConfig::parse(defaults, "t").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn principal_point_follows_image() {
        let c = PipelineConfig::default();
        let k = c.camera.intrinsics(320, 240).unwrap();
        assert_eq!((k.cx, k.cy), (160.0, 120.0));
        let c = PipelineConfig::parse("camera.cx = 100\n", "t").unwrap();
        assert_eq!(c.camera.intrinsics(320, 240).unwrap().cx, 100.0);
        assert!(c.camera.intrinsics(80, 60).is_err());
    }

    #[test]
    fn rejects_bad_files() {
        let err = PipelineConfig::parse("grid.slope_mx = 10\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("unknown key `grid.slope_mx`"));
        assert!(err.to_string().starts_with("cfg:1:"));
        assert!(PipelineConfig::parse("flow.stride = ten", "t").is_err());
        assert!(PipelineConfig::parse("flow.stride 10", "t").is_err());
        assert!(PipelineConfig::parse("flow.stride = 10\nflow.stride = 12", "t").is_err());
        assert!(PipelineConfig::parse("stereo.block = 10", "t").is_err());
        assert!(PipelineConfig::parse("filter.alpha = 1.5", "t").is_err());
        assert!(PipelineConfig::parse("grid.footprint_m = 0.1", "t").is_err());
        assert!(PipelineConfig::parse("camera.fx = -1", "t").is_err());
        assert!(PipelineConfig::parse("camera.cx = nan", "t").is_err());
    }
}
