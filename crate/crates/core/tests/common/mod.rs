//! Property checks shared by the `acceptance` and `properties` targets.
//!
//! Each check drives a proptest runner and returns `Err` with the minimal
//! failing case, so callers can either assert on it or report it.

#![allow(dead_code)]

use std::collections::BTreeSet;

use image::{imageops, Rgb, RgbImage};
use proptest::prelude::*;
use proptest::sample::SizeRange;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};

use rigdesign::catalog::{parse_catalog_str, reference_catalog, serialize_catalog, CatalogFile};
use rigdesign::config::RunConfig;
use rigdesign::coverage::{frames_per_target, max_processing_time, MotionProfile};
use rigdesign::exposure::{
    count_saturated, saturation_rate_with, summarize, GlareCategory, ImageAudit, SaturationMode,
    SaturationPolicy,
};
use rigdesign::optics::{focus_envelope, fov_at_distance, working_distance, CameraSpec, LensSpec};
use rigdesign::report::{parse_structured, run_design_with, DesignReport, Report};
use rigdesign::selector::{select_rig_with, DesignConstraints, Range, Selection};
use rigdesign::stereo::{baseline_min_at, depth_error};
use rigdesign::Execution;

pub const CASES: u32 = 1000;

/// Runner with a fixed seed, so repeated runs print identical results.
pub fn seeded_runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        config(cases),
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Runner with a fresh random seed.
pub fn random_runner(cases: u32) -> TestRunner {
    TestRunner::new(config(cases))
}

fn config(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

fn check<S>(
    runner: &mut TestRunner,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    runner.run(&strategy, test).map_err(|e| match e {
        TestError::Fail(reason, value) => format!("{reason} for minimal input {value:?}"),
        TestError::Abort(reason) => format!("aborted: {reason}"),
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        // negation keeps NaN a failure
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let failed = !$cond;
        if failed {
            return Err(TestCaseError::fail(format!($($msg)+)));
        }
    };
}

// ---- generators ----

pub fn camera(name: String) -> impl Strategy<Value = CameraSpec> {
    (
        2.0..20.0f64,
        1.5..15.0f64,
        320u32..5000,
        240u32..4000,
        prop::option::of(55.0..80.0f64),
    )
        .prop_map(move |(w, h, rw, rh, dr)| {
            let mut c = CameraSpec::new(name.clone(), w, h, rw, rh).unwrap();
            c.dynamic_range_db = dr;
            c
        })
}

pub fn lens(name: String) -> impl Strategy<Value = LensSpec> {
    (2.0..25.0f64, 1.0..4.0f64, prop::option::of(-3.0..3.0f64)).prop_map(move |(f, stop, dist)| {
        let mut l = LensSpec::new(name.clone(), f, stop).unwrap();
        l.distortion_pct = dist;
        l
    })
}

/// The reference catalog plus a few random devices with unique names.
pub fn extended_catalog() -> impl Strategy<Value = CatalogFile> {
    let cams = (0usize..4).prop_flat_map(|n| {
        (0..n)
            .map(|i| camera(format!("x-cam-{i}")))
            .collect::<Vec<_>>()
    });
    let lenses = (0usize..3).prop_flat_map(|n| {
        (0..n)
            .map(|i| lens(format!("x-lens-{i}")))
            .collect::<Vec<_>>()
    });
    (cams, lenses).prop_map(|(cams, lenses)| {
        let mut catalog = reference_catalog();
        catalog.cameras.extend(cams);
        catalog.lenses.extend(lenses);
        catalog
    })
}

/// A catalog and a row-shuffled copy of it.
pub fn catalog_and_shuffle() -> impl Strategy<Value = (CatalogFile, CatalogFile)> {
    extended_catalog().prop_flat_map(|c| {
        let cams = Just(c.cameras.clone()).prop_shuffle();
        let lenses = Just(c.lenses.clone()).prop_shuffle();
        (Just(c), cams, lenses).prop_map(|(c, cameras, lenses)| {
            let shuffled = CatalogFile {
                cameras,
                lenses,
                ..CatalogFile::default()
            };
            (c, shuffled)
        })
    })
}

fn feasible_labels(s: &Selection) -> BTreeSet<String> {
    s.ranked.iter().map(|e| e.label()).collect()
}

// ---- properties ----

/// Depth error scales as 1/b and z², and the minimum baseline inverts it.
pub fn depth_error_laws(runner: &mut TestRunner) -> Result<(), String> {
    let s = (
        50.0..5000.0f64,
        1.0..1000.0f64,
        100.0..5000.0f64,
        0.1..3.0f64,
        1.01..10.0f64,
    );
    check(runner, s, |(z, b, f_px, eps, k)| {
        let e = depth_error(z, b, f_px, eps).unwrap();
        let e_wide = depth_error(z, k * b, f_px, eps).unwrap();
        ensure!(
            close(e_wide * k, e, 1e-12),
            "inverse law: {e_wide}·{k} != {e}"
        );
        ensure!(e_wide < e, "error must shrink with baseline");
        let e_far = depth_error(k * z, b, f_px, eps).unwrap();
        ensure!(
            close(e_far, k * k * e, 1e-12),
            "quadratic law: {e_far} != {k}²·{e}"
        );
        let b_min = baseline_min_at(z, e, eps, f_px).unwrap();
        ensure!(close(b_min, b, 1e-12), "b_min {b_min} != b {b}");
        let at_min = depth_error(z, b_min, f_px, eps).unwrap();
        ensure!(close(at_min, e, 1e-12), "error at b_min {at_min} != {e}");
        Ok(())
    })
}

/// `near ≤ d ≤ far`, `far` unbounded exactly past the hyperfocal point, and
/// stopping down never narrows the envelope.
pub fn dof_envelope_ordering(runner: &mut TestRunner) -> Result<(), String> {
    let s = (
        camera("c".into()),
        lens("l".into()),
        1.0..16.0f64,
        1.01..400.0f64,
        1.0..4.0f64,
    );
    check(runner, s, |(cam, lens, stop, d_factor, k)| {
        let d = lens.focal_length_mm * d_factor;
        let env = focus_envelope(&cam, &lens, stop, d).unwrap();
        ensure!(env.near_mm > 0.0, "near {} not positive", env.near_mm);
        ensure!(
            env.near_mm <= d * (1.0 + 1e-12),
            "near {} > d {d}",
            env.near_mm
        );
        ensure!(
            env.far_mm >= d * (1.0 - 1e-12),
            "far {} < d {d}",
            env.far_mm
        );
        ensure!(env.dof_mm >= 0.0, "negative depth of field");
        let unbounded = env.hyperfocal_mm - d + lens.focal_length_mm <= 0.0;
        ensure!(
            env.is_far_unbounded() == unbounded,
            "unbounded flag mismatch: {env:?}"
        );

        let wider = focus_envelope(&cam, &lens, stop * k, d).unwrap();
        ensure!(
            wider.near_mm <= env.near_mm * (1.0 + 1e-12),
            "near grew when stopping down: {} -> {}",
            env.near_mm,
            wider.near_mm
        );
        ensure!(
            wider.far_mm >= env.far_mm * (1.0 - 1e-12),
            "far shrank when stopping down: {} -> {}",
            env.far_mm,
            wider.far_mm
        );
        Ok(())
    })
}

/// Field of view is linear in distance and `working_distance` inverts it.
pub fn fov_linearity(runner: &mut TestRunner) -> Result<(), String> {
    let s = (
        camera("c".into()),
        lens("l".into()),
        10.0..5000.0f64,
        0.1..10.0f64,
    );
    check(runner, s, |(cam, lens, z, k)| {
        let fov = fov_at_distance(z, &lens, cam.sensor_width_mm).unwrap();
        let scaled = fov_at_distance(k * z, &lens, cam.sensor_width_mm).unwrap();
        ensure!(
            close(scaled, k * fov, 1e-12),
            "not linear: {scaled} vs {}",
            k * fov
        );
        let back = working_distance(fov, &lens, &cam).unwrap();
        ensure!(close(back, z, 1e-12), "round trip {back} != {z}");
        Ok(())
    })
}

/// Catalog row order and execution mode never change the selection.
pub fn selection_order_invariance(runner: &mut TestRunner) -> Result<(), String> {
    let constraints = RunConfig::reference().constraints;
    check(runner, catalog_and_shuffle(), |(a, b)| {
        let sa = select_rig_with(&a.cameras, &a.lenses, &constraints, Execution::Parallel).unwrap();
        let sb =
            select_rig_with(&b.cameras, &b.lenses, &constraints, Execution::Sequential).unwrap();
        ensure!(sa == sb, "selection depends on catalog order");
        Ok(())
    })
}

/// Relaxing constraints never removes a feasible candidate.
pub fn constraint_monotonicity(runner: &mut TestRunner) -> Result<(), String> {
    let base = RunConfig::reference().constraints;
    let s = (
        extended_catalog(),
        0.0..200.0f64,
        0.0..400.0f64,
        0.0..20.0f64,
        0.0..125.0f64,
        0.0..175.0f64,
    );
    check(
        runner,
        s,
        move |(catalog, widen_lo, widen_hi, db, narrow_lo, narrow_hi)| {
            let strict: DesignConstraints = base.clone();
            let wr = strict.working_range();
            let relaxed = DesignConstraints {
                working_range: Some(Range::new(
                    (wr.min_mm - widen_lo).max(0.0),
                    wr.max_mm + widen_hi,
                )),
                object_range: Range::new(
                    strict.object_range.min_mm + narrow_lo,
                    strict.object_range.max_mm - narrow_hi,
                ),
                min_dynamic_range_db: strict.min_dynamic_range_db - db,
                ..strict.clone()
            };
            let run = |c: &DesignConstraints| {
                select_rig_with(&catalog.cameras, &catalog.lenses, c, Execution::Sequential)
                    .unwrap()
            };
            let before = feasible_labels(&run(&strict));
            let after = feasible_labels(&run(&relaxed));
            ensure!(
                before.is_subset(&after),
                "relaxing lost {:?}",
                before.difference(&after).collect::<Vec<_>>()
            );
            Ok(())
        },
    )
}

fn pixel() -> impl Strategy<Value = [u8; 3]> {
    let channel = prop_oneof![any::<u8>(), 240u8..=255];
    [channel.clone(), channel.clone(), channel]
}

/// Random image dimensions and pixels, plus the same pixels shuffled.
fn image_and_shuffle() -> impl Strategy<Value = (u32, u32, Vec<[u8; 3]>, Vec<[u8; 3]>)> {
    (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
        prop::collection::vec(pixel(), SizeRange::from((w * h) as usize)).prop_flat_map(move |px| {
            let shuffled = Just(px.clone()).prop_shuffle();
            (Just(w), Just(h), Just(px), shuffled)
        })
    })
}

fn to_image(w: u32, h: u32, px: &[[u8; 3]]) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| Rgb(px[(y * w + x) as usize]))
}

/// Saturation rate ignores pixel order and orientation, falls as the
/// threshold rises, and agrees between execution modes.
pub fn exposure_invariants(runner: &mut TestRunner) -> Result<(), String> {
    let s = (image_and_shuffle(), 1u8..=255, 0u8..=255, any::<bool>());
    check(runner, s, |((w, h, px, shuffled), t, bump, blue)| {
        let mode = if blue {
            SaturationMode::BlueBiased
        } else {
            SaturationMode::AllChannels
        };
        let policy = SaturationPolicy {
            channel_threshold: t,
            mode,
        };
        let img = to_image(w, h, &px);
        let sr = |i: &RgbImage, p: &SaturationPolicy| {
            saturation_rate_with(i, p, Execution::Sequential).unwrap()
        };
        let base = sr(&img, &policy);
        ensure!((0.0..=100.0).contains(&base), "rate {base} out of range");
        ensure!(
            sr(&to_image(w, h, &shuffled), &policy) == base,
            "pixel order changed the rate"
        );
        ensure!(
            sr(&imageops::flip_horizontal(&img), &policy) == base,
            "horizontal flip changed the rate"
        );
        ensure!(
            sr(&imageops::flip_vertical(&img), &policy) == base,
            "vertical flip changed the rate"
        );
        ensure!(
            count_saturated(&img, &policy, Execution::Parallel)
                == count_saturated(&img, &policy, Execution::Sequential),
            "parallel and sequential counts differ"
        );

        let higher = SaturationPolicy {
            channel_threshold: t.saturating_add(bump),
            mode,
        };
        ensure!(
            sr(&img, &higher) <= base,
            "raising the threshold raised the rate"
        );

        let all = SaturationPolicy {
            mode: SaturationMode::AllChannels,
            ..policy
        };
        let blue_only = SaturationPolicy {
            mode: SaturationMode::BlueBiased,
            ..policy
        };
        ensure!(
            sr(&img, &blue_only) >= sr(&img, &all),
            "blue-biased below all-channels"
        );
        Ok(())
    })
}

/// Dataset summaries are internally consistent and reversal-symmetric.
pub fn summary_invariants(runner: &mut TestRunner) -> Result<(), String> {
    let cat = prop_oneof![
        Just(GlareCategory::C1),
        Just(GlareCategory::C2),
        Just(GlareCategory::C3)
    ];
    check(runner, prop::collection::vec(cat, 1..60), |cats| {
        let audits = |cs: &[GlareCategory]| -> Vec<ImageAudit> {
            cs.iter()
                .enumerate()
                .map(|(i, c)| ImageAudit {
                    image_id: i.to_string(),
                    saturation_rate: 0.0,
                    category: *c,
                })
                .collect()
        };
        let r = summarize(SaturationPolicy::default(), audits(&cats)).unwrap();
        ensure!(
            r.counts.c1 + r.counts.c2 + r.counts.c3 == cats.len(),
            "counts do not add up"
        );
        ensure!(
            r.glare_images == r.counts.c2 + r.counts.c3,
            "glare count mismatch"
        );
        ensure!(
            r.consecutive_glare_images <= r.glare_images,
            "more consecutive than glare"
        );
        let total = r.percentages.c1 + r.percentages.c2 + r.percentages.c3;
        ensure!((total - 100.0).abs() < 1e-9, "percentages sum to {total}");

        let mut rev = cats.clone();
        rev.reverse();
        let rr = summarize(SaturationPolicy::default(), audits(&rev)).unwrap();
        ensure!(
            rr.consecutive_glare_images == r.consecutive_glare_images,
            "reversal changed the consecutive count"
        );
        Ok(())
    })
}

/// Faster motion never yields more frames or a larger budget.
pub fn coverage_monotonicity(runner: &mut TestRunner) -> Result<(), String> {
    let s = (
        10.0..3000.0f64,
        1.01..5.0f64,
        1.0..60.0f64,
        10.0..2000.0f64,
        1u32..6,
    );
    check(runner, s, |(v, k, fps, fov, views)| {
        let slow = MotionProfile {
            velocity_mm_s: v,
            frame_rate_hz: fps,
            processing_time_ms: 100.0,
            required_views: views,
        };
        let fast = MotionProfile {
            velocity_mm_s: v * k,
            ..slow
        };
        ensure!(
            frames_per_target(&fast, fov).unwrap() <= frames_per_target(&slow, fov).unwrap(),
            "faster motion gave more frames"
        );
        ensure!(
            max_processing_time(&fast, fov).unwrap() < max_processing_time(&slow, fov).unwrap(),
            "faster motion gave a larger budget"
        );
        ensure!(
            frames_per_target(&slow, fov * k).unwrap() >= frames_per_target(&slow, fov).unwrap(),
            "wider view gave fewer frames"
        );
        Ok(())
    })
}

/// Shuffled catalogs and both execution modes render byte-identical reports,
/// and structured output survives a parse/render round trip.
///
/// The as-built baseline is dropped: it belongs to one rig and would reject
/// most random winners.
pub fn report_determinism(runner: &mut TestRunner) -> Result<(), String> {
    let mut config = RunConfig::reference();
    config.stereo.as_built_baseline_mm = None;
    check(runner, catalog_and_shuffle(), |(a, b)| {
        let ra = run_design_with(&a, &config, Execution::Parallel);
        let rb = run_design_with(&b, &config, Execution::Sequential);
        let (ra, rb) = match (ra, rb) {
            (Ok(ra), Ok(rb)) => (ra, rb),
            (Err(ea), Err(eb)) => {
                ensure!(
                    ea.to_string() == eb.to_string(),
                    "errors differ: {ea} vs {eb}"
                );
                return Ok(());
            }
            (ra, rb) => {
                return Err(TestCaseError::fail(format!(
                    "outcomes differ: {:?} vs {:?}",
                    ra.err(),
                    rb.err()
                )))
            }
        };
        let ja = ra.render_structured();
        ensure!(ja == rb.render_structured(), "structured reports differ");
        ensure!(
            ra.render_table() == rb.render_table(),
            "table reports differ"
        );
        let back: DesignReport = parse_structured(&ja).unwrap();
        ensure!(
            back.render_structured() == ja,
            "structured round trip is not idempotent"
        );
        Ok(())
    })
}

/// Serialising a catalog and parsing it back is the identity.
pub fn catalog_round_trip(runner: &mut TestRunner) -> Result<(), String> {
    check(runner, extended_catalog(), |catalog| {
        let text = serialize_catalog(&catalog);
        let back = parse_catalog_str(&text, "roundtrip").unwrap();
        ensure!(
            back == catalog,
            "catalog changed across a round trip:\n{text}"
        );
        ensure!(
            serialize_catalog(&back) == text,
            "serialisation is not stable"
        );
        Ok(())
    })
}
