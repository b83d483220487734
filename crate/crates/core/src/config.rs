//! Run configuration.
//!
//! The on-disk form is TOML with a unit suffix on every physical key
//! (`_mm`, `_px`, `_db`, `_kmh`, `_hz`, `_ms`); unknown keys are rejected so a
//! misspelt unit cannot be silently ignored.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coverage::{kmh_to_mm_s, MotionProfile, Plane};
use crate::error::{DesignError, Result};
use crate::exposure::{SaturationMode, SaturationPolicy};
use crate::optics::TargetSpec;
use crate::selector::{DesignConstraints, Range};
use crate::stereo::StereoConstraints;

pub const REFERENCE_CONFIG: &str = include_str!("../data/paper_config.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    pub target_size_mm: f64,
    pub min_pixels_px: f64,
    pub required_fov_h_mm: f64,
    pub required_fov_v_mm: f64,
    pub object_range_min_mm: f64,
    pub object_range_max_mm: f64,
    #[serde(default)]
    pub working_range_min_mm: Option<f64>,
    #[serde(default)]
    pub working_range_max_mm: Option<f64>,
    pub ideal_working_mm: f64,
    pub min_dynamic_range_db: f64,
    pub max_sensor_offset_mm: f64,
    pub nozzle_clearance_mm: f64,
    #[serde(default)]
    pub chosen_offset_mm: Option<f64>,
    #[serde(default = "default_f_stops")]
    pub f_stop_policy: Vec<f64>,
}

fn default_f_stops() -> Vec<f64> {
    vec![1.8, 2.8]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StereoSection {
    pub max_depth_error_mm: f64,
    #[serde(default = "default_matching_error")]
    pub matching_error_px: f64,
    pub max_disparity_px: f64,
    pub required_fov_h_mm: f64,
    pub z_near_mm: f64,
    pub z_work_mm: f64,
    pub z_far_mm: f64,
    #[serde(default)]
    pub depth_error_eval_mm: Option<f64>,
    #[serde(default)]
    pub disparity_eval_mm: Option<f64>,
    #[serde(default)]
    pub as_built_baseline_mm: Option<f64>,
}

fn default_matching_error() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    pub velocity_kmh: f64,
    pub frame_rate_hz: f64,
    pub processing_time_ms: f64,
    #[serde(default = "default_views")]
    pub required_views: i64,
    #[serde(default)]
    pub sweep_kmh: Vec<f64>,
    /// Plane whose vertical extent counts frames per target.
    #[serde(default)]
    pub plane: Plane,
    /// Plane whose vertical extent sets the processing budget.
    #[serde(default = "default_budget_plane")]
    pub budget_plane: Plane,
}

fn default_budget_plane() -> Plane {
    Plane::Work
}

fn default_views() -> i64 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSection {
    #[serde(default = "default_threshold")]
    pub channel_threshold: i64,
    #[serde(default)]
    pub mode: SaturationMode,
}

fn default_threshold() -> i64 {
    250
}

impl Default for SaturationSection {
    fn default() -> Self {
        SaturationSection {
            channel_threshold: default_threshold(),
            mode: SaturationMode::default(),
        }
    }
}

/// Config file as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub constraints: ConstraintsSection,
    pub stereo: StereoSection,
    pub motion: MotionSection,
    #[serde(default)]
    pub saturation: SaturationSection,
}

/// Validated configuration in domain types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub constraints: DesignConstraints,
    pub stereo: StereoConstraints,
    pub motion: MotionProfile,
    pub motion_speed_kmh: f64,
    pub sweep_kmh: Vec<f64>,
    pub plane: Plane,
    pub budget_plane: Plane,
    pub saturation: SaturationPolicy,
}

impl RunConfig {
    pub fn reference() -> Self {
        parse_config_str(REFERENCE_CONFIG).expect("bundled config is valid")
    }

    /// SHA-256 over the canonical JSON form, independent of file layout.
    pub fn hash_hex(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serialises"))
    }

    pub fn validate(&self) -> Result<()> {
        self.constraints.validate()?;
        self.stereo.validate()?;
        self.motion.validate()?;
        self.saturation.validate()?;
        if self.sweep_kmh.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(DesignError::Validation(
                "motion.sweep_kmh entries must be positive".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| DesignError::io(path, e))?;
    parse_config_str(&text).map_err(|e| match e {
        DesignError::Config(msg) => DesignError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| DesignError::Config(e.to_string()))?;
    file.into_run_config()
}

impl ConfigFile {
    pub fn into_run_config(self) -> Result<RunConfig> {
        let c = self.constraints;
        let working_range = match (c.working_range_min_mm, c.working_range_max_mm) {
            (None, None) => None,
            (Some(lo), Some(hi)) => Some(Range::new(lo, hi)),
            _ => return Err(DesignError::Config(
                "constraints.working_range_min_mm and working_range_max_mm must be given together"
                    .into(),
            )),
        };
        let constraints = DesignConstraints {
            target: TargetSpec {
                target_size_mm: c.target_size_mm,
                min_pixels_px: c.min_pixels_px,
            },
            required_fov_h_mm: c.required_fov_h_mm,
            required_fov_v_mm: c.required_fov_v_mm,
            object_range: Range::new(c.object_range_min_mm, c.object_range_max_mm),
            working_range,
            ideal_working_mm: c.ideal_working_mm,
            min_dynamic_range_db: c.min_dynamic_range_db,
            max_sensor_offset_mm: c.max_sensor_offset_mm,
            nozzle_clearance_mm: c.nozzle_clearance_mm,
            chosen_offset_mm: c.chosen_offset_mm,
            f_stop_policy: c.f_stop_policy,
        };

        let s = self.stereo;
        let stereo = StereoConstraints {
            max_depth_error_mm: s.max_depth_error_mm,
            matching_error_px: s.matching_error_px,
            max_disparity_px: s.max_disparity_px,
            required_fov_h_mm: s.required_fov_h_mm,
            z_near_mm: s.z_near_mm,
            z_work_mm: s.z_work_mm,
            z_far_mm: s.z_far_mm,
            depth_error_eval_mm: s.depth_error_eval_mm,
            disparity_eval_mm: s.disparity_eval_mm,
            as_built_baseline_mm: s.as_built_baseline_mm,
        };

        let m = self.motion;
        if m.required_views < 1 || m.required_views > i64::from(u32::MAX) {
            return Err(DesignError::Validation(format!(
                "motion.required_views must be at least 1, got {}",
                m.required_views
            )));
        }
        let motion = MotionProfile {
            velocity_mm_s: kmh_to_mm_s(m.velocity_kmh),
            frame_rate_hz: m.frame_rate_hz,
            processing_time_ms: m.processing_time_ms,
            required_views: m.required_views as u32,
        };

        let t = self.saturation.channel_threshold;
        if !(1..=255).contains(&t) {
            return Err(DesignError::Validation(format!(
                "saturation.channel_threshold must lie in [1, 255], got {t}"
            )));
        }
        let saturation = SaturationPolicy {
            channel_threshold: t as u8,
            mode: self.saturation.mode,
        };

        let run = RunConfig {
            constraints,
            stereo,
            motion,
            motion_speed_kmh: m.velocity_kmh,
            sweep_kmh: m.sweep_kmh,
            plane: m.plane,
            budget_plane: m.budget_plane,
            saturation,
        };
        run.validate()?;
        Ok(run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_values() {
        let cfg = RunConfig::reference();
        assert_eq!(cfg.constraints.object_range, Range::new(383.0, 683.0));
        assert_eq!(cfg.constraints.ideal_working_mm, 508.0);
        assert_eq!(cfg.constraints.f_stop_policy, vec![1.8, 2.8]);
        assert_eq!(cfg.stereo.max_disparity_px, 500.0);
        assert!((cfg.motion.velocity_mm_s - 1400.0).abs() < 1e-9);
        assert_eq!(cfg.motion.required_views, 3);
        assert_eq!(cfg.sweep_kmh, vec![1.0, 1.5, 2.5, 3.5, 5.0]);
        assert_eq!(cfg.saturation, SaturationPolicy::default());
    }

    #[test]
    fn zero_views_is_a_validation_error() {
        let text = REFERENCE_CONFIG.replace("required_views = 3", "required_views = 0");
        assert!(matches!(
            parse_config_str(&text),
            Err(DesignError::Validation(_))
        ));
    }

    #[test]
    fn unit_typos_are_rejected() {
        let text = REFERENCE_CONFIG.replace("ideal_working_mm", "ideal_working_cm");
        assert!(matches!(
            parse_config_str(&text),
            Err(DesignError::Config(_))
        ));
    }

    #[test]
    fn ideal_distance_must_lie_in_range() {
        let text = REFERENCE_CONFIG.replace("ideal_working_mm = 508", "ideal_working_mm = 900");
        assert!(matches!(
            parse_config_str(&text),
            Err(DesignError::Validation(_))
        ));
    }

    #[test]
    fn threshold_out_of_range_is_rejected() {
        let text = REFERENCE_CONFIG.replace("channel_threshold = 250", "channel_threshold = 256");
        assert!(parse_config_str(&text).is_err());
    }

    #[test]
    fn infinite_bounds_are_accepted() {
        let text = REFERENCE_CONFIG.replace("max_depth_error_mm = 3", "max_depth_error_mm = inf");
        let cfg = parse_config_str(&text).unwrap();
        assert!(cfg.stereo.max_depth_error_mm.is_infinite());
    }

    #[test]
    fn hash_ignores_layout_but_not_values() {
        let a = RunConfig::reference();
        let spaced = REFERENCE_CONFIG.replace(" = ", "   =   ");
        let b = parse_config_str(&spaced).unwrap();
        assert_eq!(a.hash_hex(), b.hash_hex());
        let changed =
            parse_config_str(&REFERENCE_CONFIG.replace("z_far_mm = 683", "z_far_mm = 684"))
                .unwrap();
        assert_ne!(a.hash_hex(), changed.hash_hex());
        assert_eq!(a.hash_hex().len(), 64);
    }
}
