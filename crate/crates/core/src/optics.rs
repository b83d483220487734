//! Pinhole-model optics.
//!
//! All lengths are millimetres and all angles degrees. Every function here is
//! pure and can be called from any thread.
//!
//! The relations used throughout:
//!
//! ```text
//! FoV       = r · ss / np              (resolution ↔ field of view)
//! d         = FoV(H) · f / s           (working distance)
//! CoC       = sd / 1730                (Zeiss rule)
//! H         = f² / (f_stop · CoC)      (hyperfocal distance)
//! N         = H·d / (H + d − f)        (near limit)
//! F         = H·d / (H − d + f)        (far limit, unbounded once d ≥ H + f)
//! DoF       = F − N
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, DesignError, Result};

/// Denominator of the Zeiss circle-of-confusion rule.
pub const ZEISS_DIVISOR: f64 = 1730.0;

/// A camera body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub name: String,
    pub sensor_width_mm: f64,
    pub sensor_height_mm: f64,
    pub res_width_px: u32,
    pub res_height_px: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic_range_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interface: Option<String>,
}

impl CameraSpec {
    pub fn new(
        name: impl Into<String>,
        sensor_width_mm: f64,
        sensor_height_mm: f64,
        res_width_px: u32,
        res_height_px: u32,
    ) -> Result<Self> {
        let cam = CameraSpec {
            name: name.into(),
            sensor_width_mm,
            sensor_height_mm,
            res_width_px,
            res_height_px,
            dynamic_range_db: None,
            interface: None,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn with_dynamic_range(mut self, db: f64) -> Self {
        self.dynamic_range_db = Some(db);
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("sensor_width_mm", self.sensor_width_mm)?;
        ensure_positive("sensor_height_mm", self.sensor_height_mm)?;
        if self.res_width_px == 0 || self.res_height_px == 0 {
            return Err(DesignError::domain(format!(
                "camera `{}`: resolution must be positive",
                self.name
            )));
        }
        Ok(())
    }

    pub fn sensor_diagonal_mm(&self) -> f64 {
        self.sensor_width_mm.hypot(self.sensor_height_mm)
    }

    pub fn pixel_pitch_mm(&self) -> f64 {
        self.sensor_width_mm / f64::from(self.res_width_px)
    }

    pub fn total_pixels(&self) -> u64 {
        u64::from(self.res_width_px) * u64::from(self.res_height_px)
    }
}

/// A lens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensSpec {
    pub name: String,
    pub focal_length_mm: f64,
    pub min_f_stop: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

impl LensSpec {
    pub fn new(name: impl Into<String>, focal_length_mm: f64, min_f_stop: f64) -> Result<Self> {
        let lens = LensSpec {
            name: name.into(),
            focal_length_mm,
            min_f_stop,
            distortion_pct: None,
            format: None,
        };
        lens.validate()?;
        Ok(lens)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("focal_length_mm", self.focal_length_mm)?;
        ensure_positive("min_f_stop", self.min_f_stop)
    }
}

/// Physical size of the object to detect and the pixels the detector needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub target_size_mm: f64,
    pub min_pixels_px: f64,
}

impl TargetSpec {
    pub fn new(target_size_mm: f64, min_pixels_px: f64) -> Result<Self> {
        let t = TargetSpec {
            target_size_mm,
            min_pixels_px,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("target_size_mm", self.target_size_mm)?;
        ensure_positive("min_pixels_px", self.min_pixels_px)
    }
}

/// Sharp-focus range around a working distance.
///
/// `far_mm` and `dof_mm` are `f64::INFINITY` once the working distance
/// reaches the hyperfocal distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusEnvelope {
    pub hyperfocal_mm: f64,
    pub near_mm: f64,
    pub working_mm: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub far_mm: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub dof_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coc_mm: Option<f64>,
}

impl FocusEnvelope {
    pub fn is_far_unbounded(&self) -> bool {
        self.far_mm.is_infinite()
    }

    /// True when `[near, far]` covers `[lo, hi]`.
    pub fn brackets(&self, lo: f64, hi: f64) -> bool {
        self.near_mm <= lo && self.far_mm >= hi
    }
}

/// Scene extent imaged by `res_px` pixels when the target spans exactly
/// `min_pixels_px`.
pub fn fov_from_resolution(res_px: u32, target: &TargetSpec) -> Result<f64> {
    if res_px == 0 {
        return Err(DesignError::domain("resolution must be positive"));
    }
    target.validate()?;
    Ok(f64::from(res_px) * target.target_size_mm / target.min_pixels_px)
}

/// Smallest pixel count that puts `min_pixels_px` on the target across `fov_mm`.
pub fn required_resolution(fov_mm: f64, target: &TargetSpec) -> Result<u32> {
    ensure_positive("fov_mm", fov_mm)?;
    target.validate()?;
    let exact = fov_mm * target.min_pixels_px / target.target_size_mm;
    Ok(ceil_tolerant(exact) as u32)
}

/// Ceiling that ignores floating-point noise just above an integer.
fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Object distance at which the sensor width spans `fov_h_mm`.
pub fn working_distance(fov_h_mm: f64, lens: &LensSpec, camera: &CameraSpec) -> Result<f64> {
    ensure_positive("fov_h_mm", fov_h_mm)?;
    ensure_positive("focal_length_mm", lens.focal_length_mm)?;
    ensure_positive("sensor_width_mm", camera.sensor_width_mm)?;
    Ok(fov_h_mm * lens.focal_length_mm / camera.sensor_width_mm)
}

/// Linear scene extent covered by a sensor dimension at distance `z_mm`.
pub fn fov_at_distance(z_mm: f64, lens: &LensSpec, sensor_dim_mm: f64) -> Result<f64> {
    ensure_positive("z_mm", z_mm)?;
    ensure_positive("focal_length_mm", lens.focal_length_mm)?;
    ensure_positive("sensor_dim_mm", sensor_dim_mm)?;
    Ok(z_mm * sensor_dim_mm / lens.focal_length_mm)
}

/// Vertical extent matching a horizontal extent at the same distance, taking
/// the vertical axis at the same pixels-per-millimetre as the horizontal one.
pub fn vertical_fov_from_horizontal(fov_h_mm: f64, camera: &CameraSpec) -> Result<f64> {
    ensure_positive("fov_h_mm", fov_h_mm)?;
    camera.validate()?;
    Ok(fov_h_mm * f64::from(camera.res_height_px) / f64::from(camera.res_width_px))
}

/// Whole pixels across the target when the sensor width spans `fov_mm`.
pub fn pixels_on_target(camera: &CameraSpec, target: &TargetSpec, fov_mm: f64) -> Result<u32> {
    ensure_positive("fov_mm", fov_mm)?;
    target.validate()?;
    let exact = f64::from(camera.res_width_px) * target.target_size_mm / fov_mm;
    Ok(exact.floor() as u32)
}

pub fn circle_of_confusion(camera: &CameraSpec) -> f64 {
    camera.sensor_diagonal_mm() / ZEISS_DIVISOR
}

pub fn hyperfocal(lens: &LensSpec, f_stop: f64, coc_mm: f64) -> Result<f64> {
    ensure_positive("focal_length_mm", lens.focal_length_mm)?;
    ensure_positive("f_stop", f_stop)?;
    ensure_positive("coc_mm", coc_mm)?;
    Ok(lens.focal_length_mm * lens.focal_length_mm / (f_stop * coc_mm))
}

/// Near and far sharpness limits for a lens focused at `d_mm`.
///
/// The object must lie beyond the focal length. When `d_mm ≥ h_mm + f` the
/// far limit is reported as infinite rather than as an error.
pub fn dof_limits(h_mm: f64, d_mm: f64, lens: &LensSpec) -> Result<FocusEnvelope> {
    ensure_positive("hyperfocal_mm", h_mm)?;
    ensure_positive("d_mm", d_mm)?;
    let f = lens.focal_length_mm;
    ensure_positive("focal_length_mm", f)?;
    if d_mm <= f {
        return Err(DesignError::domain(format!(
            "focus distance {d_mm} mm must exceed the focal length {f} mm"
        )));
    }

    let near = h_mm * d_mm / (h_mm + d_mm - f);
    let far_den = h_mm - d_mm + f;
    let far = if far_den > 0.0 {
        h_mm * d_mm / far_den
    } else {
        f64::INFINITY
    };

    Ok(FocusEnvelope {
        hyperfocal_mm: h_mm,
        near_mm: near,
        working_mm: d_mm,
        far_mm: far,
        dof_mm: far - near,
        coc_mm: None,
    })
}

/// Envelope for a camera/lens pair at a given stop, using the Zeiss CoC.
pub fn focus_envelope(
    camera: &CameraSpec,
    lens: &LensSpec,
    f_stop: f64,
    d_mm: f64,
) -> Result<FocusEnvelope> {
    let coc = circle_of_confusion(camera);
    let h = hyperfocal(lens, f_stop, coc)?;
    let mut env = dof_limits(h, d_mm, lens)?;
    env.coc_mm = Some(coc);
    Ok(env)
}

/// Full angular field of view for one sensor dimension.
pub fn angular_fov(sensor_dim_mm: f64, lens: &LensSpec) -> Result<f64> {
    ensure_positive("sensor_dim_mm", sensor_dim_mm)?;
    ensure_positive("focal_length_mm", lens.focal_length_mm)?;
    Ok(2.0
        * (sensor_dim_mm / (2.0 * lens.focal_length_mm))
            .atan()
            .to_degrees())
}
