//! Camera × lens candidate evaluation, ranking and mounting geometry.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, DesignError, Result};
use crate::exec::Execution;
use crate::optics::{
    angular_fov, focus_envelope, fov_at_distance, fov_from_resolution, pixels_on_target,
    required_resolution, vertical_fov_from_horizontal, working_distance, CameraSpec, FocusEnvelope,
    LensSpec, TargetSpec,
};

/// Closed distance interval in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min_mm: f64,
    pub max_mm: f64,
}

impl Range {
    pub fn new(min_mm: f64, max_mm: f64) -> Self {
        Range { min_mm, max_mm }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min_mm && x <= self.max_mm
    }

    pub fn contains_range(&self, other: &Range) -> bool {
        self.min_mm <= other.min_mm && self.max_mm >= other.max_mm
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.min_mm, self.max_mm)
    }
}

/// The application envelope a rig must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConstraints {
    pub target: TargetSpec,
    pub required_fov_h_mm: f64,
    pub required_fov_v_mm: f64,
    /// Object distances that must be in sharp focus.
    pub object_range: Range,
    /// Admissible working distances; defaults to `object_range`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub working_range: Option<Range>,
    pub ideal_working_mm: f64,
    pub min_dynamic_range_db: f64,
    pub max_sensor_offset_mm: f64,
    pub nozzle_clearance_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_offset_mm: Option<f64>,
    /// Stops tried in ascending order; the smallest one that brackets the
    /// object range wins.
    pub f_stop_policy: Vec<f64>,
}

impl DesignConstraints {
    pub fn working_range(&self) -> Range {
        self.working_range.unwrap_or(self.object_range)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DesignError::Validation(msg));
        self.target
            .validate()
            .map_err(|e| DesignError::Validation(format!("target: {e}")))?;
        for (name, v) in [
            ("required_fov_h_mm", self.required_fov_h_mm),
            ("required_fov_v_mm", self.required_fov_v_mm),
            ("ideal_working_mm", self.ideal_working_mm),
            ("max_sensor_offset_mm", self.max_sensor_offset_mm),
        ] {
            if ensure_positive(name, v).is_err() {
                return bad(format!("constraints.{name} must be positive, got {v}"));
            }
        }
        if !(self.min_dynamic_range_db >= 0.0) {
            return bad("constraints.min_dynamic_range_db must be non-negative".into());
        }
        if !(self.nozzle_clearance_mm >= 0.0) {
            return bad("constraints.nozzle_clearance_mm must be non-negative".into());
        }
        for (name, r) in [
            ("object_range", self.object_range),
            ("working_range", self.working_range()),
        ] {
            if !(r.min_mm >= 0.0 && r.min_mm <= r.max_mm) {
                return bad(format!("constraints.{name} {r} is empty or negative"));
            }
        }
        if !self.object_range.contains(self.ideal_working_mm) {
            return bad(format!(
                "constraints.ideal_working_mm {} lies outside the object range {}",
                self.ideal_working_mm, self.object_range
            ));
        }
        if self.f_stop_policy.is_empty() {
            return bad("constraints.f_stop_policy must list at least one stop".into());
        }
        if self
            .f_stop_policy
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return bad("constraints.f_stop_policy entries must be positive".into());
        }
        Ok(())
    }

    /// Stops the lens can actually reach, ascending; the lens' own minimum
    /// stop when none of the policy stops is reachable.
    fn stops_for(&self, lens: &LensSpec) -> Vec<f64> {
        let mut stops: Vec<f64> = self
            .f_stop_policy
            .iter()
            .copied()
            .filter(|s| *s >= lens.min_f_stop)
            .collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup();
        if stops.is_empty() {
            stops.push(lens.min_f_stop);
        }
        stops
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Why a candidate failed the feasibility filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectionReason {
    InsufficientResolution {
        axis: Axis,
        have_px: u32,
        need_px: u32,
    },
    WorkingDistanceOutOfRange {
        working_mm: f64,
        range: Range,
    },
    NearLimitTooFar {
        near_mm: f64,
        required_mm: f64,
    },
    FarLimitTooClose {
        #[serde(with = "crate::serde_ext::extended_f64")]
        far_mm: f64,
        required_mm: f64,
    },
    DynamicRangeTooLow {
        have_db: f64,
        need_db: f64,
    },
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectionReason::InsufficientResolution {
                axis,
                have_px,
                need_px,
            } => {
                write!(
                    f,
                    "{axis:?} resolution {have_px} px < required {need_px} px"
                )
            }
            RejectionReason::WorkingDistanceOutOfRange { working_mm, range } => {
                write!(f, "working distance {working_mm:.1} mm outside {range}")
            }
            RejectionReason::NearLimitTooFar {
                near_mm,
                required_mm,
            } => {
                write!(f, "near limit {near_mm:.1} mm > {required_mm} mm")
            }
            RejectionReason::FarLimitTooClose {
                far_mm,
                required_mm,
            } => {
                write!(f, "far limit {far_mm:.1} mm < {required_mm} mm")
            }
            RejectionReason::DynamicRangeTooLow { have_db, need_db } => {
                write!(f, "dynamic range {have_db} dB < {need_db} dB")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelsAt {
    pub near: u32,
    pub work: u32,
    pub far: u32,
}

/// One camera × lens candidate with its computed geometry and verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigEvaluation {
    pub camera: CameraSpec,
    pub lens: LensSpec,
    pub f_stop_used: f64,
    /// Horizontal extent at the working distance with the target at its
    /// minimum pixel size.
    pub fov_h_mm: f64,
    pub fov_v_mm: f64,
    pub envelope: FocusEnvelope,
    pub pixels_on_target_at: PixelsAt,
    pub feasible: bool,
    pub rejection_reasons: Vec<RejectionReason>,
}

impl RigEvaluation {
    pub fn working_mm(&self) -> f64 {
        self.envelope.working_mm
    }

    pub fn label(&self) -> String {
        format!("{} + {}", self.camera.name, self.lens.name)
    }
}

pub fn evaluate_candidate(
    camera: &CameraSpec,
    lens: &LensSpec,
    constraints: &DesignConstraints,
) -> Result<RigEvaluation> {
    camera.validate()?;
    lens.validate()?;
    let target = &constraints.target;

    let fov_h = fov_from_resolution(camera.res_width_px, target)?;
    let fov_v = vertical_fov_from_horizontal(fov_h, camera)?;
    let d = working_distance(fov_h, lens, camera)?;

    let range = constraints.object_range;
    let stops = constraints.stops_for(lens);
    let mut chosen: Option<(f64, FocusEnvelope)> = None;
    for &stop in &stops {
        let env = focus_envelope(camera, lens, stop, d)?;
        let brackets = env.brackets(range.min_mm, range.max_mm);
        chosen = Some((stop, env));
        if brackets {
            break;
        }
    }
    let (f_stop_used, envelope) = chosen.expect("at least one stop is always tried");

    let mut reasons = Vec::new();
    let need_h = required_resolution(constraints.required_fov_h_mm, target)?;
    if camera.res_width_px < need_h {
        reasons.push(RejectionReason::InsufficientResolution {
            axis: Axis::Horizontal,
            have_px: camera.res_width_px,
            need_px: need_h,
        });
    }
    let need_v = required_resolution(constraints.required_fov_v_mm, target)?;
    if camera.res_height_px < need_v {
        reasons.push(RejectionReason::InsufficientResolution {
            axis: Axis::Vertical,
            have_px: camera.res_height_px,
            need_px: need_v,
        });
    }
    let working_range = constraints.working_range();
    if !working_range.contains(d) {
        reasons.push(RejectionReason::WorkingDistanceOutOfRange {
            working_mm: d,
            range: working_range,
        });
    }
    if envelope.near_mm > range.min_mm {
        reasons.push(RejectionReason::NearLimitTooFar {
            near_mm: envelope.near_mm,
            required_mm: range.min_mm,
        });
    }
    if envelope.far_mm < range.max_mm {
        reasons.push(RejectionReason::FarLimitTooClose {
            far_mm: envelope.far_mm,
            required_mm: range.max_mm,
        });
    }
    if let Some(db) = camera.dynamic_range_db {
        if db < constraints.min_dynamic_range_db {
            reasons.push(RejectionReason::DynamicRangeTooLow {
                have_db: db,
                need_db: constraints.min_dynamic_range_db,
            });
        }
    }

    let px = |z: f64| -> Result<u32> {
        if z.is_finite() {
            pixels_on_target(
                camera,
                target,
                fov_at_distance(z, lens, camera.sensor_width_mm)?,
            )
        } else {
            Ok(0)
        }
    };
    let pixels_on_target_at = PixelsAt {
        near: px(envelope.near_mm)?,
        work: px(envelope.working_mm)?,
        far: px(envelope.far_mm)?,
    };

    Ok(RigEvaluation {
        camera: camera.clone(),
        lens: lens.clone(),
        f_stop_used,
        fov_h_mm: fov_h,
        fov_v_mm: fov_v,
        envelope,
        pixels_on_target_at,
        feasible: reasons.is_empty(),
        rejection_reasons: reasons,
    })
}

/// Outcome of evaluating a whole catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Feasible candidates, best first.
    pub ranked: Vec<RigEvaluation>,
    /// Infeasible candidates ordered by camera then lens name.
    pub rejected: Vec<RigEvaluation>,
    pub distortion_ranking: DistortionRanking,
}

impl Selection {
    pub fn best(&self) -> Option<&RigEvaluation> {
        self.ranked.first()
    }

    pub fn candidates(&self) -> usize {
        self.ranked.len() + self.rejected.len()
    }

    /// Every evaluation, ordered by camera then lens name.
    pub fn all_by_name(&self) -> Vec<&RigEvaluation> {
        let mut all: Vec<&RigEvaluation> = self.ranked.iter().chain(&self.rejected).collect();
        all.sort_by(|a, b| by_name(a, b));
        all
    }
}

/// How lens distortion is compared when ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionRanking {
    /// Longer focal length ranks first.
    FocalLengthProxy,
    /// Smaller |distortion_pct| ranks first; used only when every feasible
    /// lens reports a distortion figure.
    MeasuredDistortion,
}

fn by_name(a: &RigEvaluation, b: &RigEvaluation) -> Ordering {
    a.camera
        .name
        .cmp(&b.camera.name)
        .then_with(|| a.lens.name.cmp(&b.lens.name))
        .then_with(|| a.f_stop_used.total_cmp(&b.f_stop_used))
}

pub fn select_rig(
    cameras: &[CameraSpec],
    lenses: &[LensSpec],
    constraints: &DesignConstraints,
) -> Result<Selection> {
    select_rig_with(cameras, lenses, constraints, Execution::default())
}

pub fn select_rig_with(
    cameras: &[CameraSpec],
    lenses: &[LensSpec],
    constraints: &DesignConstraints,
    exec: Execution,
) -> Result<Selection> {
    if cameras.is_empty() || lenses.is_empty() {
        return Err(DesignError::Validation(
            "camera and lens catalogs must both be non-empty".into(),
        ));
    }
    constraints.validate()?;

    let pairs: Vec<(&CameraSpec, &LensSpec)> = cameras
        .iter()
        .flat_map(|c| lenses.iter().map(move |l| (c, l)))
        .collect();
    let evaluated = exec.map(&pairs, |(c, l)| evaluate_candidate(c, l, constraints));

    let mut ranked = Vec::new();
    let mut rejected = Vec::new();
    for e in evaluated {
        let e = e?;
        if e.feasible {
            ranked.push(e);
        } else {
            rejected.push(e);
        }
    }

    let distortion_ranking =
        if !ranked.is_empty() && ranked.iter().all(|e| e.lens.distortion_pct.is_some()) {
            DistortionRanking::MeasuredDistortion
        } else {
            DistortionRanking::FocalLengthProxy
        };

    let ideal = constraints.ideal_working_mm;
    ranked.sort_by(|a, b| {
        let distortion = match distortion_ranking {
            DistortionRanking::FocalLengthProxy => {
                b.lens.focal_length_mm.total_cmp(&a.lens.focal_length_mm)
            }
            DistortionRanking::MeasuredDistortion => {
                let da = a.lens.distortion_pct.unwrap_or_default().abs();
                let db = b.lens.distortion_pct.unwrap_or_default().abs();
                da.total_cmp(&db)
            }
        };
        distortion
            .then_with(|| {
                (a.working_mm() - ideal)
                    .abs()
                    .total_cmp(&(b.working_mm() - ideal).abs())
            })
            .then_with(|| a.camera.total_pixels().cmp(&b.camera.total_pixels()))
            .then_with(|| by_name(a, b))
    });
    rejected.sort_by(by_name);

    Ok(Selection {
        ranked,
        rejected,
        distortion_ranking,
    })
}

/// Horizontal camera-to-nozzle placement window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementGeometry {
    pub vertical_angle_deg: f64,
    /// Half the vertical view extent at the nozzle clearance distance.
    pub vertical_fov_at_nozzle_mm: f64,
    pub min_horizontal_offset_mm: f64,
    pub max_horizontal_offset_mm: f64,
    pub chosen_offset_mm: f64,
}

/// The nozzle must stay out of view: the camera sits at least half its
/// vertical view extent (at the nozzle clearance height) away from it, and no
/// farther than the design cap.
pub fn placement_geometry(
    rig: &RigEvaluation,
    constraints: &DesignConstraints,
) -> Result<PlacementGeometry> {
    if !rig.feasible {
        return Err(DesignError::Validation(format!(
            "placement requires a feasible rig; {} was rejected",
            rig.label()
        )));
    }
    let angle = angular_fov(rig.camera.sensor_height_mm, &rig.lens)?;
    let half_extent = placement_half_extent(angle, constraints.nozzle_clearance_mm)?;
    let min = half_extent.floor();
    let max = constraints.max_sensor_offset_mm;
    if min > max {
        return Err(DesignError::Infeasible(format!(
            "nozzle clearance needs at least {min} mm of offset but the cap is {max} mm"
        )));
    }
    let chosen = constraints.chosen_offset_mm.unwrap_or(min);
    if !(chosen >= min && chosen <= max) {
        return Err(DesignError::Validation(format!(
            "chosen offset {chosen} mm lies outside [{min}, {max}] mm"
        )));
    }
    Ok(PlacementGeometry {
        vertical_angle_deg: angle,
        vertical_fov_at_nozzle_mm: half_extent,
        min_horizontal_offset_mm: min,
        max_horizontal_offset_mm: max,
        chosen_offset_mm: chosen,
    })
}

/// `tan(angle / 2) · clearance`.
pub fn placement_half_extent(vertical_angle_deg: f64, clearance_mm: f64) -> Result<f64> {
    if !(vertical_angle_deg > 0.0 && vertical_angle_deg < 180.0) {
        return Err(DesignError::domain(format!(
            "vertical angle must lie in (0, 180) degrees, got {vertical_angle_deg}"
        )));
    }
    if !(clearance_mm >= 0.0) {
        return Err(DesignError::domain("nozzle clearance must be non-negative"));
    }
    Ok((vertical_angle_deg / 2.0).to_radians().tan() * clearance_mm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constraints() -> DesignConstraints {
        DesignConstraints {
            target: TargetSpec::new(30.0, 62.0).unwrap(),
            required_fov_h_mm: 500.0,
            required_fov_v_mm: 420.0,
            object_range: Range::new(383.0, 683.0),
            working_range: None,
            ideal_working_mm: 508.0,
            min_dynamic_range_db: 65.0,
            max_sensor_offset_mm: 400.0,
            nozzle_clearance_mm: 233.0,
            chosen_offset_mm: Some(300.0),
            f_stop_policy: vec![1.8, 2.8],
        }
    }

    fn cam(name: &str, w: f64, h: f64, rw: u32, rh: u32) -> CameraSpec {
        CameraSpec::new(name, w, h, rw, rh)
            .unwrap()
            .with_dynamic_range(71.0)
    }

    fn lens(name: &str, f: f64) -> LensSpec {
        LensSpec::new(name, f, 1.8).unwrap()
    }

    #[test]
    fn camera_2_with_six_mm_is_feasible_at_f2_8() {
        let e = evaluate_candidate(
            &cam("acA1920-40uc", 11.3, 7.1, 1920, 1200),
            &lens("LM6HC", 6.0),
            &constraints(),
        )
        .unwrap();
        assert!(e.feasible, "{:?}", e.rejection_reasons);
        assert_eq!(e.f_stop_used, 2.8);
        assert!((e.envelope.near_mm - 381.6).abs() < 1.5);
        assert!((e.envelope.far_mm - 697.1).abs() < 1.5);
        assert_eq!(e.pixels_on_target_at.work, 62);
    }

    #[test]
    fn camera_1_with_four_mm_fails_on_near_limit() {
        let e = evaluate_candidate(
            &cam("acA1440-220uc", 5.0, 3.7, 1440, 1080),
            &lens("LM4HC", 4.0),
            &constraints(),
        )
        .unwrap();
        assert!(!e.feasible);
        assert!(e.rejection_reasons.iter().any(|r| matches!(
            r,
            RejectionReason::NearLimitTooFar { near_mm, .. } if (near_mm - 413.4).abs() < 1.5
        )));
    }

    #[test]
    fn camera_5_fails_on_working_distance_with_any_lens() {
        let camera = cam("acA3080-57uc", 7.4, 5.0, 3088, 2064);
        for l in [lens("LM4HC", 4.0), lens("LM6HC", 6.0)] {
            let e = evaluate_candidate(&camera, &l, &constraints()).unwrap();
            assert!(!e.feasible);
            assert!(e
                .rejection_reasons
                .iter()
                .any(|r| matches!(r, RejectionReason::WorkingDistanceOutOfRange { .. })));
        }
    }

    #[test]
    fn low_dynamic_range_is_rejected() {
        let mut camera = cam("acA1920-40uc", 11.3, 7.1, 1920, 1200);
        camera.dynamic_range_db = Some(60.0);
        let e = evaluate_candidate(&camera, &lens("LM6HC", 6.0), &constraints()).unwrap();
        assert_eq!(
            e.rejection_reasons,
            vec![RejectionReason::DynamicRangeTooLow {
                have_db: 60.0,
                need_db: 65.0
            }]
        );
    }

    #[test]
    fn low_resolution_is_rejected() {
        let camera = cam("tiny", 11.3, 7.1, 640, 480);
        let e = evaluate_candidate(&camera, &lens("LM6HC", 6.0), &constraints()).unwrap();
        let axes: Vec<Axis> = e
            .rejection_reasons
            .iter()
            .filter_map(|r| match r {
                RejectionReason::InsufficientResolution { axis, .. } => Some(*axis),
                _ => None,
            })
            .collect();
        assert_eq!(axes, vec![Axis::Horizontal, Axis::Vertical]);
    }

    #[test]
    fn stops_below_lens_minimum_are_skipped() {
        let c = constraints();
        let slow = LensSpec::new("slow", 6.0, 2.0).unwrap();
        assert_eq!(c.stops_for(&slow), vec![2.8]);
        let slower = LensSpec::new("slower", 6.0, 4.0).unwrap();
        assert_eq!(c.stops_for(&slower), vec![4.0]);
    }

    #[test]
    fn measured_distortion_overrides_focal_proxy() {
        let cams = [cam("acA2440-35uc", 8.45, 7.07, 2448, 2048)];
        let mut wide = lens("wide", 4.0);
        wide.distortion_pct = Some(-0.1);
        let mut long = lens("long", 4.2);
        long.distortion_pct = Some(-0.9);
        let sel = select_rig(&cams, &[long, wide], &constraints()).unwrap();
        assert_eq!(
            sel.distortion_ranking,
            DistortionRanking::MeasuredDistortion
        );
        assert_eq!(sel.best().unwrap().lens.name, "wide");
    }

    #[test]
    fn empty_catalogs_are_rejected() {
        assert!(select_rig(&[], &[lens("x", 6.0)], &constraints()).is_err());
    }

    #[test]
    fn placement_reference_values() {
        let e = evaluate_candidate(
            &cam("acA1920-40uc", 11.3, 7.1, 1920, 1200),
            &lens("LM6HC", 6.0),
            &constraints(),
        )
        .unwrap();
        let p = placement_geometry(&e, &constraints()).unwrap();
        assert!((p.vertical_fov_at_nozzle_mm - 137.8).abs() < 0.1);
        assert_eq!(p.min_horizontal_offset_mm, 137.0);
        assert_eq!(p.max_horizontal_offset_mm, 400.0);
        assert_eq!(p.chosen_offset_mm, 300.0);

        let mut c = constraints();
        c.chosen_offset_mm = Some(450.0);
        assert!(matches!(
            placement_geometry(&e, &c),
            Err(DesignError::Validation(_))
        ));
        c.chosen_offset_mm = Some(100.0);
        assert!(placement_geometry(&e, &c).is_err());
    }

    #[test]
    fn placement_with_zero_clearance() {
        assert_eq!(placement_half_extent(61.22, 0.0).unwrap(), 0.0);
        let e = evaluate_candidate(
            &cam("acA1920-40uc", 11.3, 7.1, 1920, 1200),
            &lens("LM6HC", 6.0),
            &constraints(),
        )
        .unwrap();
        let mut c = constraints();
        c.nozzle_clearance_mm = 0.0;
        c.chosen_offset_mm = None;
        let p = placement_geometry(&e, &c).unwrap();
        assert_eq!(p.min_horizontal_offset_mm, 0.0);
        assert_eq!(p.chosen_offset_mm, 0.0);
    }

    #[test]
    fn invalid_constraints_are_reported() {
        let mut c = constraints();
        c.ideal_working_mm = 900.0;
        assert!(c.validate().is_err());
        let mut c = constraints();
        c.object_range = Range::new(700.0, 300.0);
        assert!(c.validate().is_err());
        let mut c = constraints();
        c.f_stop_policy.clear();
        assert!(c.validate().is_err());
    }
}
