//! How often a moving rig sees each target, and how fast frames must be
//! processed to keep up.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, DesignError, Result};

/// Exact km/h → mm/s factor (10⁶ mm per km over 3600 s per hour).
pub const KMH_TO_MM_S: f64 = 1_000_000.0 / 3600.0;

pub fn kmh_to_mm_s(kmh: f64) -> f64 {
    kmh * KMH_TO_MM_S
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub velocity_mm_s: f64,
    pub frame_rate_hz: f64,
    pub processing_time_ms: f64,
    pub required_views: u32,
}

impl MotionProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("velocity_mm_s", self.velocity_mm_s),
            ("frame_rate_hz", self.frame_rate_hz),
            ("processing_time_ms", self.processing_time_ms),
        ] {
            ensure_positive(name, v).map_err(|_| {
                DesignError::Validation(format!("motion.{name} must be positive, got {v}"))
            })?;
        }
        if self.required_views == 0 {
            return Err(DesignError::Validation(
                "motion.required_views must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn at_speed_kmh(mut self, kmh: f64) -> Self {
        self.velocity_mm_s = kmh_to_mm_s(kmh);
        self
    }

    pub fn travel_per_frame_mm(&self) -> f64 {
        self.velocity_mm_s / self.frame_rate_hz
    }
}

/// Whole frames in which a target stays inside a vertical extent of `fov_v_mm`.
pub fn frames_per_target(profile: &MotionProfile, fov_v_mm: f64) -> Result<u32> {
    profile.validate()?;
    ensure_positive("fov_v_mm", fov_v_mm)?;
    let ratio = fov_v_mm * profile.frame_rate_hz / profile.velocity_mm_s;
    // absorb representation error just below an exact integer
    let nearest = ratio.round();
    let frames = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest
    } else {
        ratio.floor()
    };
    Ok(frames as u32)
}

/// Per-frame processing budget, in ms, that still yields `required_views`
/// views of each target.
pub fn max_processing_time(profile: &MotionProfile, fov_v_mm: f64) -> Result<f64> {
    profile.validate()?;
    ensure_positive("fov_v_mm", fov_v_mm)?;
    Ok(fov_v_mm / f64::from(profile.required_views) / profile.velocity_mm_s * 1000.0)
}

/// Vertical extent needed for `required_views` views at the given speed and
/// processing time.
pub fn required_fov_v(profile: &MotionProfile) -> Result<f64> {
    profile.validate()?;
    Ok(profile.velocity_mm_s * profile.processing_time_ms / 1000.0
        * f64::from(profile.required_views))
}

/// Object plane used for the vertical field of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    #[default]
    Near,
    Work,
    Far,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub speed_kmh: f64,
    pub velocity_mm_s: f64,
    pub travel_per_frame_mm: f64,
    pub frames: u32,
    pub processing_budget_ms: f64,
}

/// Frame counts (over `fov_v_mm`) and processing budgets (over
/// `budget_fov_v_mm`) across a speed sweep.
pub fn coverage_sweep(
    profile: &MotionProfile,
    speeds_kmh: &[f64],
    fov_v_mm: f64,
    budget_fov_v_mm: f64,
) -> Result<Vec<CoverageRow>> {
    speeds_kmh
        .iter()
        .map(|&kmh| {
            let p = profile.at_speed_kmh(kmh);
            Ok(CoverageRow {
                speed_kmh: kmh,
                velocity_mm_s: p.velocity_mm_s,
                travel_per_frame_mm: p.travel_per_frame_mm(),
                frames: frames_per_target(&p, fov_v_mm)?,
                processing_budget_ms: max_processing_time(&p, budget_fov_v_mm)?,
            })
        })
        .collect()
}
