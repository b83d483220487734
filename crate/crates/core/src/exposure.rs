//! Exposure QA for captured image sequences.
//!
//! Each image gets a saturation rate (percentage of pixels meeting the
//! [`SaturationPolicy`]) and a glare category:
//!
//! | category | saturation rate |
//! |----------|-----------------|
//! | C1       | `sr < 25`       |
//! | C2       | `25 ≤ sr < 50`  |
//! | C3       | `sr ≥ 50`       |
//!
//! The dataset summary also reports how many glare images (C2/C3) sit in a
//! run of glare frames: the image and both capture-order neighbours, with the
//! window truncated at either end of the sequence.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, RgbImage};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};
use crate::exec::Execution;

pub const C2_THRESHOLD_PCT: f64 = 25.0;
pub const C3_THRESHOLD_PCT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SaturationMode {
    /// Every channel at or above the threshold.
    #[default]
    AllChannels,
    /// Blue channel at or above the threshold.
    BlueBiased,
}

impl fmt::Display for SaturationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SaturationMode::AllChannels => "all_channels",
            SaturationMode::BlueBiased => "blue_biased",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationPolicy {
    pub channel_threshold: u8,
    #[serde(default)]
    pub mode: SaturationMode,
}

impl Default for SaturationPolicy {
    fn default() -> Self {
        SaturationPolicy {
            channel_threshold: 250,
            mode: SaturationMode::AllChannels,
        }
    }
}

impl SaturationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.channel_threshold == 0 {
            return Err(DesignError::Validation(
                "saturation.channel_threshold must lie in [1, 255]".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    fn is_saturated(&self, px: &[u8]) -> bool {
        let t = self.channel_threshold;
        match self.mode {
            SaturationMode::AllChannels => px[0] >= t && px[1] >= t && px[2] >= t,
            SaturationMode::BlueBiased => px[2] >= t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GlareCategory {
    C1,
    C2,
    C3,
}

impl GlareCategory {
    pub fn is_glare(self) -> bool {
        self != GlareCategory::C1
    }
}

impl fmt::Display for GlareCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Pixels per work unit when counting in parallel.
const ROW_CHUNK_PIXELS: usize = 64 * 1024;

/// Number of pixels meeting the policy.
pub fn count_saturated(image: &RgbImage, policy: &SaturationPolicy, exec: Execution) -> u64 {
    let raw: &[u8] = image.as_raw();
    exec.sum_chunks(raw, ROW_CHUNK_PIXELS * 3, |chunk| {
        chunk
            .chunks_exact(3)
            .filter(|px| policy.is_saturated(px))
            .count() as u64
    })
}

/// Percentage of pixels meeting the policy, in `[0, 100]`.
pub fn saturation_rate(image: &RgbImage, policy: &SaturationPolicy) -> Result<f64> {
    saturation_rate_with(image, policy, Execution::default())
}

pub fn saturation_rate_with(
    image: &RgbImage,
    policy: &SaturationPolicy,
    exec: Execution,
) -> Result<f64> {
    policy.validate()?;
    let total = u64::from(image.width()) * u64::from(image.height());
    if total == 0 {
        return Err(DesignError::domain("image has zero pixels"));
    }
    let saturated = count_saturated(image, policy, exec);
    Ok(100.0 * saturated as f64 / total as f64)
}

pub fn classify(sr: f64) -> Result<GlareCategory> {
    if !(0.0..=100.0).contains(&sr) {
        return Err(DesignError::domain(format!(
            "saturation rate must lie in [0, 100], got {sr}"
        )));
    }
    Ok(if sr < C2_THRESHOLD_PCT {
        GlareCategory::C1
    } else if sr < C3_THRESHOLD_PCT {
        GlareCategory::C2
    } else {
        GlareCategory::C3
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAudit {
    pub image_id: String,
    pub saturation_rate: f64,
    pub category: GlareCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CategoryBreakdown<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub policy: SaturationPolicy,
    pub total_images: usize,
    pub counts: CategoryBreakdown<usize>,
    pub percentages: CategoryBreakdown<f64>,
    pub glare_images: usize,
    pub glare_pct: f64,
    pub consecutive_glare_images: usize,
    /// Percentage of all images that are glare frames whose whole
    /// three-frame window is glare.
    pub consecutive_glare_fraction: f64,
    pub images: Vec<ImageAudit>,
}

/// Summarises per-image results given in capture order.
pub fn summarize(policy: SaturationPolicy, images: Vec<ImageAudit>) -> Result<DatasetReport> {
    let n = images.len();
    if n == 0 {
        return Err(DesignError::domain("dataset contains no images"));
    }
    let mut counts = CategoryBreakdown::<usize>::default();
    for a in &images {
        match a.category {
            GlareCategory::C1 => counts.c1 += 1,
            GlareCategory::C2 => counts.c2 += 1,
            GlareCategory::C3 => counts.c3 += 1,
        }
    }
    let glare: Vec<bool> = images.iter().map(|a| a.category.is_glare()).collect();
    let consecutive = (0..n)
        .filter(|&i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            glare[lo..=hi].iter().all(|&g| g)
        })
        .count();

    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    Ok(DatasetReport {
        policy,
        total_images: n,
        percentages: CategoryBreakdown {
            c1: pct(counts.c1),
            c2: pct(counts.c2),
            c3: pct(counts.c3),
        },
        glare_images: counts.c2 + counts.c3,
        glare_pct: pct(counts.c2 + counts.c3),
        counts,
        consecutive_glare_images: consecutive,
        consecutive_glare_fraction: pct(consecutive),
        images,
    })
}

/// Audits decoded images given in capture order.
pub fn audit_dataset(
    images: &[(String, RgbImage)],
    policy: &SaturationPolicy,
    exec: Execution,
) -> Result<DatasetReport> {
    policy.validate()?;
    // parallelism goes across images; each image is counted sequentially
    let audits = exec.map(images, |(id, img)| {
        let sr = saturation_rate_with(img, policy, Execution::Sequential)?;
        Ok(ImageAudit {
            image_id: id.clone(),
            saturation_rate: sr,
            category: classify(sr)?,
        })
    });
    summarize(*policy, audits.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Loads, audits and summarises image files given in capture order.
pub fn audit_paths(
    paths: &[PathBuf],
    policy: &SaturationPolicy,
    exec: Execution,
) -> Result<DatasetReport> {
    policy.validate()?;
    let audits = exec.map(paths, |p| {
        let img = load_rgb8(p)?;
        let sr = saturation_rate_with(&img, policy, Execution::Sequential)?;
        Ok(ImageAudit {
            image_id: p.display().to_string(),
            saturation_rate: sr,
            category: classify(sr)?,
        })
    });
    summarize(*policy, audits.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Reads an 8-bit RGB(A) image; alpha is discarded.
pub fn load_rgb8(path: &Path) -> Result<RgbImage> {
    let format = ImageFormat::from_path(path).map_err(|e| DesignError::Format {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    if is_lossy(format) {
        warn!(
            "{}: lossy format {format:?}; saturation rates may be biased by compression",
            path.display()
        );
    }
    let bytes = fs::read(path).map_err(|e| DesignError::io(path, e))?;
    let decoded =
        image::load_from_memory_with_format(&bytes, format).map_err(|e| DesignError::Format {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
    match decoded {
        DynamicImage::ImageRgb8(img) => Ok(img),
        rgba @ DynamicImage::ImageRgba8(_) => Ok(rgba.to_rgb8()),
        other => Err(DesignError::Format {
            path: path.to_owned(),
            message: format!("expected 8-bit RGB, found {:?}", other.color()),
        }),
    }
}

fn is_lossy(format: ImageFormat) -> bool {
    matches!(
        format,
        ImageFormat::Jpeg | ImageFormat::WebP | ImageFormat::Avif
    )
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "bmp", "tif", "tiff", "jpg", "jpeg"];

/// Image files directly inside `dir`, in lexicographic file-name order.
pub fn collect_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DesignError::io(dir, e))? {
        let path = entry.map_err(|e| DesignError::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false);
        if path.is_file() && is_image {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Reads a manifest listing one image path per line in capture order.
///
/// Blank lines and `#` comments are skipped; relative paths resolve against
/// the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path).map_err(|e| DesignError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let entries: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = Path::new(l);
            if p.is_absolute() {
                p.to_owned()
            } else {
                base.join(p)
            }
        })
        .collect();
    if entries.is_empty() {
        return Err(DesignError::Parse {
            path: path.display().to_string(),
            line: 1,
            column: None,
            message: "manifest lists no images".into(),
        });
    }
    Ok(entries)
}
