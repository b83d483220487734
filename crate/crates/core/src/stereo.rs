//! Stereo-pair sizing: depth error and the admissible baseline interval.
//!
//! Three constraints bound the baseline `b`:
//!
//! * depth error `z²·ε_disp / (b·f_px) ≤ ε_max` gives a lower bound, evaluated
//!   at the farthest object distance by default;
//! * the two views must jointly overlap the required coverage, so
//!   `b ≤ FoV(H at z_work) · (1 − w)` with `w = required / FoV(H at z_work)`;
//! * the disparity search range caps `b ≤ z · dv_max / f_px`, worst at the
//!   nearest object distance.
//!
//! The overlap bound uses the linear field of view at the working distance.
//! Written with a focal length in place of the distance it is dimensionally
//! inconsistent.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, DesignError, Result};
use crate::optics::{fov_at_distance, CameraSpec, LensSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoConstraints {
    /// May be `f64::INFINITY` to disable the bound.
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub max_depth_error_mm: f64,
    pub matching_error_px: f64,
    /// May be `f64::INFINITY` to disable the bound.
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub max_disparity_px: f64,
    pub required_fov_h_mm: f64,
    pub z_near_mm: f64,
    pub z_work_mm: f64,
    pub z_far_mm: f64,
    /// Distance at which the depth-error bound must hold; `z_far_mm` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_error_eval_mm: Option<f64>,
    /// Distance at which the disparity cap is applied; `z_near_mm` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disparity_eval_mm: Option<f64>,
    /// Baseline actually built, validated against the admissible interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub as_built_baseline_mm: Option<f64>,
}

impl StereoConstraints {
    pub fn validate(&self) -> Result<()> {
        let positive_or_inf = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(DesignError::Validation(format!(
                    "stereo.{name} must be positive, got {v}"
                )))
            }
        };
        positive_or_inf("max_depth_error_mm", self.max_depth_error_mm)?;
        positive_or_inf("max_disparity_px", self.max_disparity_px)?;
        if !(self.matching_error_px >= 0.0 && self.matching_error_px.is_finite()) {
            return Err(DesignError::Validation(format!(
                "stereo.matching_error_px must be non-negative, got {}",
                self.matching_error_px
            )));
        }
        for (name, v) in [
            ("required_fov_h_mm", self.required_fov_h_mm),
            ("z_near_mm", self.z_near_mm),
            ("z_work_mm", self.z_work_mm),
            ("z_far_mm", self.z_far_mm),
        ] {
            ensure_positive(name, v).map_err(|_| {
                DesignError::Validation(format!("stereo.{name} must be positive, got {v}"))
            })?;
        }
        if !(self.z_near_mm <= self.z_work_mm && self.z_work_mm <= self.z_far_mm) {
            return Err(DesignError::Validation(format!(
                "stereo distances must satisfy z_near ≤ z_work ≤ z_far, got {} / {} / {}",
                self.z_near_mm, self.z_work_mm, self.z_far_mm
            )));
        }
        for (name, v) in [
            ("depth_error_eval_mm", self.depth_error_eval_mm),
            ("disparity_eval_mm", self.disparity_eval_mm),
            ("as_built_baseline_mm", self.as_built_baseline_mm),
        ] {
            if let Some(v) = v {
                ensure_positive(name, v).map_err(|_| {
                    DesignError::Validation(format!("stereo.{name} must be positive, got {v}"))
                })?;
            }
        }
        Ok(())
    }

    pub fn depth_error_eval(&self) -> f64 {
        self.depth_error_eval_mm.unwrap_or(self.z_far_mm)
    }

    pub fn disparity_eval(&self) -> f64 {
        self.disparity_eval_mm.unwrap_or(self.z_near_mm)
    }
}

/// Which upper bound limits the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBound {
    Overlap,
    Disparity,
}

impl fmt::Display for UpperBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpperBound::Overlap => "overlap",
            UpperBound::Disparity => "disparity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoLayout {
    pub focal_px: f64,
    pub baseline_lower_mm: f64,
    pub baseline_upper_overlap_mm: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub baseline_upper_disparity_mm: f64,
    pub binding_upper: UpperBound,
    /// Interval midpoint, rounded to the nearest millimetre.
    pub baseline_midpoint_mm: f64,
    /// Midpoint, or the validated as-built value when one was supplied.
    pub baseline_chosen_mm: f64,
    pub as_built: bool,
    pub fov_h_at_work_mm: f64,
    pub overlap_fraction: f64,
    pub depth_error_eval_mm: f64,
    pub disparity_eval_mm: f64,
    pub predicted_depth_error_work_mm: f64,
    pub predicted_depth_error_far_mm: f64,
}

impl StereoLayout {
    pub fn baseline_upper_mm(&self) -> f64 {
        self.baseline_upper_overlap_mm
            .min(self.baseline_upper_disparity_mm)
    }

    pub fn contains(&self, baseline_mm: f64) -> bool {
        baseline_mm >= self.baseline_lower_mm && baseline_mm <= self.baseline_upper_mm()
    }
}

/// Lens focal length expressed in pixels of the camera's sensor.
pub fn focal_length_pixels(lens: &LensSpec, camera: &CameraSpec) -> f64 {
    lens.focal_length_mm * f64::from(camera.res_width_px) / camera.sensor_width_mm
}

/// Depth uncertainty of a stereo match at distance `z_mm`.
pub fn depth_error(
    z_mm: f64,
    baseline_mm: f64,
    focal_px: f64,
    matching_error_px: f64,
) -> Result<f64> {
    ensure_positive("z_mm", z_mm)?;
    ensure_positive("baseline_mm", baseline_mm)?;
    ensure_positive("focal_px", focal_px)?;
    if !(matching_error_px >= 0.0) {
        return Err(DesignError::domain("matching error must be non-negative"));
    }
    Ok(z_mm * z_mm * matching_error_px / (baseline_mm * focal_px))
}

/// Smallest baseline keeping the depth error at `z_mm` within `max_depth_error_mm`.
pub fn baseline_min_at(
    z_mm: f64,
    max_depth_error_mm: f64,
    matching_error_px: f64,
    focal_px: f64,
) -> Result<f64> {
    ensure_positive("z_mm", z_mm)?;
    ensure_positive("focal_px", focal_px)?;
    if !(max_depth_error_mm > 0.0) {
        return Err(DesignError::domain("max depth error must be positive"));
    }
    Ok(z_mm * z_mm * matching_error_px / (focal_px * max_depth_error_mm))
}

pub fn baseline_min_for_depth_error(c: &StereoConstraints, focal_px: f64) -> Result<f64> {
    baseline_min_at(
        c.depth_error_eval(),
        c.max_depth_error_mm,
        c.matching_error_px,
        focal_px,
    )
}

pub fn baseline_max_overlap(fov_h_at_z_mm: f64, overlap_fraction: f64) -> Result<f64> {
    ensure_positive("fov_h_at_z_mm", fov_h_at_z_mm)?;
    if overlap_fraction >= 1.0 {
        return Err(DesignError::Infeasible(format!(
            "required coverage is {:.1}% of a single camera's field of view",
            overlap_fraction * 100.0
        )));
    }
    if !(overlap_fraction > 0.0) {
        return Err(DesignError::domain("overlap fraction must be positive"));
    }
    Ok(fov_h_at_z_mm * (1.0 - overlap_fraction))
}

pub fn baseline_max_disparity(z_eval_mm: f64, max_disparity_px: f64, focal_px: f64) -> Result<f64> {
    ensure_positive("z_eval_mm", z_eval_mm)?;
    ensure_positive("focal_px", focal_px)?;
    if !(max_disparity_px >= 0.0) {
        return Err(DesignError::domain("max disparity must be non-negative"));
    }
    Ok(z_eval_mm * max_disparity_px / focal_px)
}

/// Intersects the three baseline bounds and picks a baseline.
pub fn solve_baseline(
    c: &StereoConstraints,
    lens: &LensSpec,
    camera: &CameraSpec,
) -> Result<StereoLayout> {
    c.validate()?;
    lens.validate()?;
    camera.validate()?;

    let focal_px = focal_length_pixels(lens, camera);
    let lower = baseline_min_for_depth_error(c, focal_px)?;

    let fov_work = fov_at_distance(c.z_work_mm, lens, camera.sensor_width_mm)?;
    let overlap_fraction = c.required_fov_h_mm / fov_work;
    let upper_overlap = baseline_max_overlap(fov_work, overlap_fraction)?;
    let upper_disparity = baseline_max_disparity(c.disparity_eval(), c.max_disparity_px, focal_px)?;

    let (upper, binding) = if upper_disparity < upper_overlap {
        (upper_disparity, UpperBound::Disparity)
    } else {
        (upper_overlap, UpperBound::Overlap)
    };

    if lower > upper {
        return Err(DesignError::EmptyBaselineInterval {
            lower_mm: lower,
            upper_mm: upper,
            binding: format!("depth error at {:.1} mm vs {binding}", c.depth_error_eval()),
        });
    }

    let midpoint = ((lower + upper) / 2.0).round();
    let chosen = match c.as_built_baseline_mm {
        Some(b) if b >= lower && b <= upper => b,
        Some(b) => {
            return Err(DesignError::Validation(format!(
                "as-built baseline {b} mm lies outside the admissible interval [{lower:.1}, {upper:.1}] mm"
            )))
        }
        None => midpoint,
    };
    if chosen <= 0.0 {
        return Err(DesignError::Infeasible(
            "admissible baseline interval rounds to zero".into(),
        ));
    }

    Ok(StereoLayout {
        focal_px,
        baseline_lower_mm: lower,
        baseline_upper_overlap_mm: upper_overlap,
        baseline_upper_disparity_mm: upper_disparity,
        binding_upper: binding,
        baseline_midpoint_mm: midpoint,
        baseline_chosen_mm: chosen,
        as_built: c.as_built_baseline_mm.is_some(),
        fov_h_at_work_mm: fov_work,
        overlap_fraction,
        depth_error_eval_mm: c.depth_error_eval(),
        disparity_eval_mm: c.disparity_eval(),
        predicted_depth_error_work_mm: depth_error(
            c.z_work_mm,
            chosen,
            focal_px,
            c.matching_error_px,
        )?,
        predicted_depth_error_far_mm: depth_error(
            c.z_far_mm,
            chosen,
            focal_px,
            c.matching_error_px,
        )?,
    })
}
