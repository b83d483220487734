//! End-to-end design composition and report rendering.
//!
//! Every report serialises to JSON (the structured format) and renders to a
//! plain-text table. All rows are ordered by name or rank so that the output
//! does not depend on the order of the input catalog.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::catalog::CatalogFile;
use crate::config::{sha256_hex, RunConfig};
use crate::coverage::{
    coverage_sweep, frames_per_target, max_processing_time, required_fov_v, CoverageRow,
    MotionProfile, Plane,
};
use crate::error::{DesignError, Result};
use crate::exec::Execution;
use crate::exposure::DatasetReport;
use crate::optics::{
    focus_envelope, fov_at_distance, fov_from_resolution, pixels_on_target,
    vertical_fov_from_horizontal, working_distance, CameraSpec, FocusEnvelope, LensSpec,
    TargetSpec,
};
use crate::selector::{
    placement_geometry, select_rig_with, DistortionRanking, PlacementGeometry, RigEvaluation,
};
use crate::stereo::{solve_baseline, StereoLayout};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Quantities that need physical hardware and are never computed.
pub const EXCLUSIONS: &[&str] = &[
    "stereo calibration error tables require a physical rig and calibration target",
    "field detection hit rates require orchard deployment",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Table,
    Structured,
}

/// Footer identifying what produced a report and from which inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_sha256: Option<String>,
}

impl Provenance {
    pub fn new(config: &RunConfig, catalog: Option<&CatalogFile>) -> Self {
        Provenance {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config_sha256: config.hash_hex(),
            catalog_sha256: catalog.map(catalog_hash),
        }
    }

    fn render(&self, out: &mut String) {
        let _ = writeln!(out);
        let _ = writeln!(out, "-- {} {}", self.tool, self.version);
        let _ = writeln!(out, "-- config sha256 {}", self.config_sha256);
        if let Some(h) = &self.catalog_sha256 {
            let _ = writeln!(out, "-- catalog sha256 {h}");
        }
    }
}

/// Hash of the catalog's device rows, independent of row order.
pub fn catalog_hash(catalog: &CatalogFile) -> String {
    let mut cameras: Vec<&CameraSpec> = catalog.cameras.iter().collect();
    cameras.sort_by(|a, b| a.name.cmp(&b.name));
    let mut lenses: Vec<&LensSpec> = catalog.lenses.iter().collect();
    lenses.sort_by(|a, b| a.name.cmp(&b.name));
    let bytes = serde_json::to_vec(&(cameras, lenses)).expect("catalog serialises");
    sha256_hex(&bytes)
}

/// Field of view and working distance for one camera × lens pair, plus its
/// focus envelope at a fixed stop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub camera: String,
    pub lens: String,
    pub fov_h_mm: f64,
    pub working_mm: f64,
    pub envelope: FocusEnvelope,
}

/// Imaged extent and target size at one object plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRow {
    pub plane: Plane,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub distance_mm: f64,
    /// `None` when the plane lies at infinity.
    pub fov_h_mm: Option<f64>,
    pub fov_v_mm: Option<f64>,
    pub pixels_on_target: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSection {
    /// Plane used for frame counts.
    pub plane: Plane,
    pub fov_v_mm: f64,
    /// Plane used for processing budgets.
    pub budget_plane: Plane,
    pub budget_fov_v_mm: f64,
    pub speed_kmh: f64,
    pub velocity_mm_s: f64,
    pub frame_rate_hz: f64,
    pub required_views: u32,
    pub frames_per_target: u32,
    pub processing_budget_ms: f64,
    /// Vertical extent needed at the configured processing time.
    pub required_fov_v_mm: f64,
    pub sweep: Vec<CoverageRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub feasible: bool,
    pub candidates: usize,
    pub distortion_ranking: DistortionRanking,
    pub ranked: Vec<RigEvaluation>,
    pub rejected: Vec<RigEvaluation>,
    pub stereo: Option<StereoLayout>,
    pub placement: Option<PlacementGeometry>,
    pub matrix_f_stop: f64,
    pub optics_matrix: Vec<MatrixRow>,
    /// Views of the top rig at its near, working and far distances.
    pub views: Vec<ViewRow>,
    pub coverage: Option<CoverageSection>,
    pub exclusions: Vec<String>,
    pub provenance: Provenance,
}

impl DesignReport {
    pub fn best(&self) -> Option<&RigEvaluation> {
        self.ranked.first()
    }

    /// `NoFeasibleRig` when nothing survived selection.
    pub fn ensure_feasible(&self) -> Result<()> {
        if self.feasible {
            Ok(())
        } else {
            Err(DesignError::NoFeasibleRig {
                candidates: self.candidates,
            })
        }
    }
}

pub fn run_design(catalog: &CatalogFile, config: &RunConfig) -> Result<DesignReport> {
    run_design_with(catalog, config, Execution::default())
}

/// Composes selection, stereo layout, placement, the optics matrix and the
/// coverage sweep. An infeasible catalog still yields a report (with its
/// rejection reasons); see [`DesignReport::ensure_feasible`].
pub fn run_design_with(
    catalog: &CatalogFile,
    config: &RunConfig,
    exec: Execution,
) -> Result<DesignReport> {
    config.validate()?;
    let constraints = &config.constraints;
    let selection = select_rig_with(&catalog.cameras, &catalog.lenses, constraints, exec)?;

    let matrix_f_stop = constraints
        .f_stop_policy
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let optics_matrix = optics_matrix(catalog, &constraints.target, matrix_f_stop)?;

    let (stereo, placement, views, coverage) = match selection.best() {
        Some(best) => {
            let stereo = solve_baseline(&config.stereo, &best.lens, &best.camera)?;
            let placement = placement_geometry(best, constraints)?;
            let views = view_rows(
                &best.camera,
                &best.lens,
                &constraints.target,
                &best.envelope,
            )?;
            let coverage = coverage_section(
                config,
                (config.plane, plane_fov_v(&views, config.plane)?),
                (
                    config.budget_plane,
                    plane_fov_v(&views, config.budget_plane)?,
                ),
            )?;
            (Some(stereo), Some(placement), views, Some(coverage))
        }
        None => (None, None, Vec::new(), None),
    };

    Ok(DesignReport {
        feasible: !selection.ranked.is_empty(),
        candidates: selection.candidates(),
        distortion_ranking: selection.distortion_ranking,
        ranked: selection.ranked,
        rejected: selection.rejected,
        stereo,
        placement,
        matrix_f_stop,
        optics_matrix,
        views,
        coverage,
        exclusions: EXCLUSIONS.iter().map(|s| s.to_string()).collect(),
        provenance: Provenance::new(config, Some(catalog)),
    })
}

/// Every camera × lens pair, ordered by camera then lens name.
pub fn optics_matrix(
    catalog: &CatalogFile,
    target: &TargetSpec,
    f_stop: f64,
) -> Result<Vec<MatrixRow>> {
    let mut rows = Vec::with_capacity(catalog.cameras.len() * catalog.lenses.len());
    for camera in &catalog.cameras {
        let fov_h = fov_from_resolution(camera.res_width_px, target)?;
        for lens in &catalog.lenses {
            let d = working_distance(fov_h, lens, camera)?;
            rows.push(MatrixRow {
                camera: camera.name.clone(),
                lens: lens.name.clone(),
                fov_h_mm: fov_h,
                working_mm: d,
                envelope: focus_envelope(camera, lens, f_stop, d)?,
            });
        }
    }
    rows.sort_by(|a, b| a.camera.cmp(&b.camera).then_with(|| a.lens.cmp(&b.lens)));
    Ok(rows)
}

/// Horizontal and vertical extent and target pixels at the envelope's near,
/// working and far distances.
pub fn view_rows(
    camera: &CameraSpec,
    lens: &LensSpec,
    target: &TargetSpec,
    envelope: &FocusEnvelope,
) -> Result<Vec<ViewRow>> {
    [
        (Plane::Near, envelope.near_mm),
        (Plane::Work, envelope.working_mm),
        (Plane::Far, envelope.far_mm),
    ]
    .into_iter()
    .map(|(plane, z)| {
        if !z.is_finite() {
            return Ok(ViewRow {
                plane,
                distance_mm: z,
                fov_h_mm: None,
                fov_v_mm: None,
                pixels_on_target: None,
            });
        }
        let fov_h = fov_at_distance(z, lens, camera.sensor_width_mm)?;
        Ok(ViewRow {
            plane,
            distance_mm: z,
            fov_h_mm: Some(fov_h),
            fov_v_mm: Some(vertical_fov_from_horizontal(fov_h, camera)?),
            pixels_on_target: Some(pixels_on_target(camera, target, fov_h)?),
        })
    })
    .collect()
}

fn plane_fov_v(views: &[ViewRow], plane: Plane) -> Result<f64> {
    views
        .iter()
        .find(|v| v.plane == plane)
        .and_then(|v| v.fov_v_mm)
        .ok_or_else(|| {
            DesignError::Validation(format!(
                "motion.plane {plane:?} lies at infinity for the selected rig"
            ))
        })
}

/// Coverage at the configured speed and across the sweep. `frames` and
/// `budget` pair each plane with its vertical extent.
pub fn coverage_section(
    config: &RunConfig,
    frames: (Plane, f64),
    budget: (Plane, f64),
) -> Result<CoverageSection> {
    let profile: &MotionProfile = &config.motion;
    let (plane, fov_v_mm) = frames;
    let (budget_plane, budget_fov_v_mm) = budget;
    Ok(CoverageSection {
        plane,
        fov_v_mm,
        budget_plane,
        budget_fov_v_mm,
        speed_kmh: config.motion_speed_kmh,
        velocity_mm_s: profile.velocity_mm_s,
        frame_rate_hz: profile.frame_rate_hz,
        required_views: profile.required_views,
        frames_per_target: frames_per_target(profile, fov_v_mm)?,
        processing_budget_ms: max_processing_time(profile, budget_fov_v_mm)?,
        required_fov_v_mm: required_fov_v(profile)?,
        sweep: coverage_sweep(profile, &config.sweep_kmh, fov_v_mm, budget_fov_v_mm)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub camera: String,
    pub lens: String,
    pub f_stop: f64,
    pub fov_h_mm: f64,
    pub envelope: FocusEnvelope,
    pub views: Vec<ViewRow>,
    pub provenance: Provenance,
}

/// Focus envelope of one pair at `f_stop`, focused at `distance_mm` or, by
/// default, at the distance where the target spans its minimum pixel count.
pub fn envelope_report(
    camera: &CameraSpec,
    lens: &LensSpec,
    config: &RunConfig,
    f_stop: f64,
    distance_mm: Option<f64>,
) -> Result<EnvelopeReport> {
    let target = &config.constraints.target;
    let fov_h = fov_from_resolution(camera.res_width_px, target)?;
    let d = match distance_mm {
        Some(d) => d,
        None => working_distance(fov_h, lens, camera)?,
    };
    let envelope = focus_envelope(camera, lens, f_stop, d)?;
    Ok(EnvelopeReport {
        camera: camera.name.clone(),
        lens: lens.name.clone(),
        f_stop,
        fov_h_mm: fov_at_distance(d, lens, camera.sensor_width_mm)?,
        views: view_rows(camera, lens, target, &envelope)?,
        envelope,
        provenance: Provenance::new(config, None),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub camera: String,
    pub lens: String,
    pub layout: StereoLayout,
    pub provenance: Provenance,
}

pub fn baseline_report(
    camera: &CameraSpec,
    lens: &LensSpec,
    config: &RunConfig,
) -> Result<BaselineReport> {
    Ok(BaselineReport {
        camera: camera.name.clone(),
        lens: lens.name.clone(),
        layout: solve_baseline(&config.stereo, lens, camera)?,
        provenance: Provenance::new(config, None),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub coverage: CoverageSection,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dataset: DatasetReport,
    pub provenance: Provenance,
}

/// A report that renders both as text and as structured JSON.
pub trait Report: Serialize + DeserializeOwned {
    fn render_table(&self) -> String;

    fn render_structured(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialise");
        s.push('\n');
        s
    }

    fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Table => self.render_table(),
            OutputFormat::Structured => self.render_structured(),
        }
    }
}

/// Parses a structured report back into its typed form.
pub fn parse_structured<R: Report>(text: &str) -> Result<R> {
    serde_json::from_str(text).map_err(|e| DesignError::Parse {
        path: "<report>".into(),
        line: e.line(),
        column: None,
        message: e.to_string(),
    })
}

fn mm(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.1}")
    }
}

fn opt_mm(v: Option<f64>) -> String {
    v.map(mm).unwrap_or_else(|| "-".into())
}

fn plane_name(p: Plane) -> &'static str {
    match p {
        Plane::Near => "near",
        Plane::Work => "work",
        Plane::Far => "far",
    }
}

fn render_views(out: &mut String, views: &[ViewRow]) {
    let _ = writeln!(
        out,
        "{:<6} {:>10} {:>10} {:>10} {:>6}",
        "plane", "z_mm", "fov_h_mm", "fov_v_mm", "np_px"
    );
    for v in views {
        let _ = writeln!(
            out,
            "{:<6} {:>10} {:>10} {:>10} {:>6}",
            plane_name(v.plane),
            mm(v.distance_mm),
            opt_mm(v.fov_h_mm),
            opt_mm(v.fov_v_mm),
            v.pixels_on_target
                .map(|p| p.to_string())
                .unwrap_or_else(|| "-".into()),
        );
    }
}

fn render_layout(out: &mut String, s: &StereoLayout) {
    let _ = writeln!(out, "focal length      {:.1} px", s.focal_px);
    let _ = writeln!(
        out,
        "lower bound       {:.1} mm (depth error at {} mm)",
        s.baseline_lower_mm, s.depth_error_eval_mm
    );
    let _ = writeln!(
        out,
        "overlap bound     {:.1} mm (coverage {:.1}% of {:.1} mm)",
        s.baseline_upper_overlap_mm,
        s.overlap_fraction * 100.0,
        s.fov_h_at_work_mm
    );
    let _ = writeln!(
        out,
        "disparity bound   {} mm (at {} mm)",
        mm(s.baseline_upper_disparity_mm),
        s.disparity_eval_mm
    );
    let _ = writeln!(
        out,
        "interval          [{:.1}, {:.1}] mm, bound by {}",
        s.baseline_lower_mm,
        s.baseline_upper_mm(),
        s.binding_upper
    );
    let _ = writeln!(out, "midpoint          {} mm", s.baseline_midpoint_mm);
    let _ = writeln!(
        out,
        "chosen            {} mm{}",
        s.baseline_chosen_mm,
        if s.as_built {
            " (as built, validated)"
        } else {
            ""
        }
    );
    let _ = writeln!(
        out,
        "depth error       {:.2} mm at work, {:.2} mm at far",
        s.predicted_depth_error_work_mm, s.predicted_depth_error_far_mm
    );
}

fn render_coverage(out: &mut String, c: &CoverageSection) {
    let _ = writeln!(
        out,
        "frames over fov_v {:.1} mm ({} plane), budget over fov_v {:.1} mm ({} plane), {} fps, {} views",
        c.fov_v_mm,
        plane_name(c.plane),
        c.budget_fov_v_mm,
        plane_name(c.budget_plane),
        c.frame_rate_hz,
        c.required_views
    );
    let _ = writeln!(
        out,
        "at {} km/h: {} frames per target, processing budget {:.1} ms, needs fov_v {:.1} mm",
        c.speed_kmh, c.frames_per_target, c.processing_budget_ms, c.required_fov_v_mm
    );
    let _ = writeln!(
        out,
        "{:>8} {:>10} {:>12} {:>7} {:>11}",
        "km/h", "mm/s", "mm/frame", "frames", "budget_ms"
    );
    for r in &c.sweep {
        let _ = writeln!(
            out,
            "{:>8} {:>10.1} {:>12.1} {:>7} {:>11.1}",
            r.speed_kmh, r.velocity_mm_s, r.travel_per_frame_mm, r.frames, r.processing_budget_ms
        );
    }
}

fn render_envelope_line(out: &mut String, e: &FocusEnvelope) {
    let _ = writeln!(
        out,
        "H {:.1} mm, N {:.1} mm, d {:.1} mm, F {} mm, DoF {} mm",
        e.hyperfocal_mm,
        e.near_mm,
        e.working_mm,
        mm(e.far_mm),
        mm(e.dof_mm)
    );
}

impl Report for DesignReport {
    fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "== rig selection ({} candidates)", self.candidates);
        match self.best() {
            Some(b) => {
                let _ = writeln!(out, "best: {} at f/{}", b.label(), b.f_stop_used);
            }
            None => {
                let _ = writeln!(out, "best: none (no feasible rig)");
            }
        }
        let _ = writeln!(out, "ranking by {:?}", self.distortion_ranking);
        for (i, r) in self.ranked.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>3}. {:<30} f/{:<4} d {:>7.1}  N {:>7.1}  F {:>7}",
                i + 1,
                r.label(),
                r.f_stop_used,
                r.working_mm(),
                r.envelope.near_mm,
                mm(r.envelope.far_mm)
            );
        }
        if !self.rejected.is_empty() {
            let _ = writeln!(out, "rejected:");
            for r in &self.rejected {
                let reasons: Vec<String> =
                    r.rejection_reasons.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(out, "  {:<30} {}", r.label(), reasons.join("; "));
            }
        }

        if let Some(s) = &self.stereo {
            let _ = writeln!(out, "\n== stereo baseline");
            render_layout(&mut out, s);
        }
        if let Some(p) = &self.placement {
            let _ = writeln!(out, "\n== placement");
            let _ = writeln!(
                out,
                "vertical angle {:.2} deg, half extent at nozzle {:.1} mm",
                p.vertical_angle_deg, p.vertical_fov_at_nozzle_mm
            );
            let _ = writeln!(
                out,
                "offset window [{}, {}] mm, chosen {} mm",
                p.min_horizontal_offset_mm, p.max_horizontal_offset_mm, p.chosen_offset_mm
            );
        }

        let _ = writeln!(out, "\n== optics matrix (f/{})", self.matrix_f_stop);
        let _ = writeln!(
            out,
            "{:<16} {:<8} {:>9} {:>8} {:>8} {:>8} {:>8}",
            "camera", "lens", "fov_h_mm", "d_mm", "H_mm", "N_mm", "F_mm"
        );
        for r in &self.optics_matrix {
            let _ = writeln!(
                out,
                "{:<16} {:<8} {:>9.1} {:>8.1} {:>8.1} {:>8.1} {:>8}",
                r.camera,
                r.lens,
                r.fov_h_mm,
                r.working_mm,
                r.envelope.hyperfocal_mm,
                r.envelope.near_mm,
                mm(r.envelope.far_mm)
            );
        }

        if !self.views.is_empty() {
            let _ = writeln!(out, "\n== views of the selected rig");
            render_views(&mut out, &self.views);
        }
        if let Some(c) = &self.coverage {
            let _ = writeln!(out, "\n== coverage");
            render_coverage(&mut out, c);
        }
        let _ = writeln!(out, "\n== not computed");
        for e in &self.exclusions {
            let _ = writeln!(out, "- {e}");
        }
        self.provenance.render(&mut out);
        out
    }
}

impl Report for EnvelopeReport {
    fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} + {} at f/{}, CoC {:.5} mm",
            self.camera,
            self.lens,
            self.f_stop,
            self.envelope.coc_mm.unwrap_or(f64::NAN)
        );
        render_envelope_line(&mut out, &self.envelope);
        render_views(&mut out, &self.views);
        self.provenance.render(&mut out);
        out
    }
}

impl Report for BaselineReport {
    fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} + {}", self.camera, self.lens);
        render_layout(&mut out, &self.layout);
        self.provenance.render(&mut out);
        out
    }
}

impl Report for CoverageReport {
    fn render_table(&self) -> String {
        let mut out = String::new();
        render_coverage(&mut out, &self.coverage);
        self.provenance.render(&mut out);
        out
    }
}

impl Report for AuditReport {
    fn render_table(&self) -> String {
        let d = &self.dataset;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} images, threshold {}, mode {}",
            d.total_images, d.policy.channel_threshold, d.policy.mode
        );
        let _ = writeln!(out, "{:<4} {:>7} {:>8}", "cat", "images", "pct");
        for (name, n, p) in [
            ("C1", d.counts.c1, d.percentages.c1),
            ("C2", d.counts.c2, d.percentages.c2),
            ("C3", d.counts.c3, d.percentages.c3),
        ] {
            let _ = writeln!(out, "{name:<4} {n:>7} {p:>7.2}%");
        }
        let _ = writeln!(
            out,
            "glare (C2+C3): {} images, {:.2}%",
            d.glare_images, d.glare_pct
        );
        let _ = writeln!(
            out,
            "consecutive glare: {} images, {:.2}%",
            d.consecutive_glare_images, d.consecutive_glare_fraction
        );
        let _ = writeln!(out, "\n{:>8} {:>4}  image", "sr_pct", "cat");
        for a in &d.images {
            let _ = writeln!(
                out,
                "{:>8.2} {:>4}  {}",
                a.saturation_rate,
                format!("{:?}", a.category),
                a.image_id
            );
        }
        self.provenance.render(&mut out);
        out
    }
}
