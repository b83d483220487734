//! Comma-delimited device catalogs.
//!
//! A catalog file holds two tables separated by a blank line, each with a
//! mandatory header row. The table kind is recognised from its header:
//!
//! ```text
//! name,sensor_width_mm,sensor_height_mm,res_width_px,res_height_px,dynamic_range_db
//! acA1920-40uc,11.3,7.1,1920,1200,73
//!
//! name,focal_length_mm,min_f_stop,distortion_pct
//! LM6HC,6,1.8,-0.2
//! ```
//!
//! `#` lines are comments. Optional known columns are `interface` (cameras)
//! and `format` (lenses); any other column is kept verbatim and written back
//! out, but otherwise ignored.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};
use crate::optics::{CameraSpec, LensSpec};

pub const CAMERA_COLUMNS: &[&str] = &[
    "name",
    "sensor_width_mm",
    "sensor_height_mm",
    "res_width_px",
    "res_height_px",
    "dynamic_range_db",
];
pub const LENS_COLUMNS: &[&str] = &["name", "focal_length_mm", "min_f_stop", "distortion_pct"];

/// Columns a catalog carried that the tool does not interpret.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtraColumns {
    pub headers: Vec<String>,
    /// One entry per device row, aligned with `headers`; empty when there
    /// are no extra columns.
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogFile {
    pub cameras: Vec<CameraSpec>,
    pub lenses: Vec<LensSpec>,
    #[serde(default)]
    pub camera_extras: ExtraColumns,
    #[serde(default)]
    pub lens_extras: ExtraColumns,
}

impl CatalogFile {
    pub fn camera(&self, name: &str) -> Option<&CameraSpec> {
        self.cameras.iter().find(|c| c.name == name)
    }

    pub fn lens(&self, name: &str) -> Option<&LensSpec> {
        self.lenses.iter().find(|l| l.name == name)
    }
}

/// The reference catalog shipped with the tool.
pub const REFERENCE_CATALOG: &str = include_str!("../data/paper_catalog.csv");

pub fn reference_catalog() -> CatalogFile {
    parse_catalog_str(REFERENCE_CATALOG, "paper_catalog.csv").expect("bundled catalog is valid")
}

pub fn parse_catalog(path: &Path) -> Result<CatalogFile> {
    let text = std::fs::read_to_string(path).map_err(|e| DesignError::io(path, e))?;
    parse_catalog_str(&text, &path.display().to_string())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum TableKind {
    Cameras,
    Lenses,
}

struct Section {
    /// 1-based file line of each text line in the section.
    lines: Vec<usize>,
    text: String,
}

fn split_sections(text: &str) -> Vec<Section> {
    let mut sections = Vec::new();
    let mut current = Section {
        lines: Vec::new(),
        text: String::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim_start().starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !current.lines.is_empty() {
                sections.push(std::mem::replace(
                    &mut current,
                    Section {
                        lines: Vec::new(),
                        text: String::new(),
                    },
                ));
            }
            continue;
        }
        current.lines.push(i + 1);
        current.text.push_str(line);
        current.text.push('\n');
    }
    if !current.lines.is_empty() {
        sections.push(current);
    }
    sections
}

pub fn parse_catalog_str(text: &str, origin: &str) -> Result<CatalogFile> {
    let err = |line: usize, column: Option<&str>, message: String| DesignError::Parse {
        path: origin.to_owned(),
        line,
        column: column.map(str::to_owned),
        message,
    };

    let sections = split_sections(text);
    if sections.is_empty() {
        return Err(err(1, None, "catalog is empty".into()));
    }

    let mut catalog = CatalogFile::default();
    let mut seen_kinds = Vec::new();

    for section in sections {
        let header_line = section.lines[0];
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(section.text.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| err(header_line, None, e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();

        let kind = if headers.iter().any(|h| h == "focal_length_mm") {
            TableKind::Lenses
        } else if headers.iter().any(|h| h == "sensor_width_mm") {
            TableKind::Cameras
        } else {
            return Err(err(
                header_line,
                None,
                "header names neither a camera table (sensor_width_mm) nor a lens table (focal_length_mm)".into(),
            ));
        };
        if seen_kinds.contains(&kind) {
            return Err(err(header_line, None, "duplicate table".into()));
        }
        seen_kinds.push(kind);

        let (required, optional): (&[&str], &[&str]) = match kind {
            TableKind::Cameras => (CAMERA_COLUMNS, &["interface"]),
            TableKind::Lenses => (LENS_COLUMNS, &["format"]),
        };
        for col in required {
            if !headers.iter().any(|h| h == col) {
                return Err(err(header_line, Some(col), "missing column".into()));
            }
        }
        let mut seen_headers = HashSet::new();
        for h in &headers {
            if !seen_headers.insert(h.as_str()) {
                return Err(err(header_line, Some(h), "duplicate column".into()));
            }
        }
        let idx = |name: &str| headers.iter().position(|h| h == name);
        let extra_idx: Vec<usize> = (0..headers.len())
            .filter(|&i| {
                !required.contains(&headers[i].as_str()) && !optional.contains(&headers[i].as_str())
            })
            .collect();
        let extras = ExtraColumns {
            headers: extra_idx.iter().map(|&i| headers[i].clone()).collect(),
            rows: Vec::new(),
        };
        match kind {
            TableKind::Cameras => catalog.camera_extras = extras,
            TableKind::Lenses => catalog.lens_extras = extras,
        }

        let mut names = HashSet::new();
        for (row_idx, record) in reader.records().enumerate() {
            let line = section
                .lines
                .get(row_idx + 1)
                .copied()
                .unwrap_or(header_line);
            let record = record.map_err(|e| err(line, None, e.to_string()))?;
            let cell = |col: &str| idx(col).and_then(|i| record.get(i)).unwrap_or("");

            let name = cell("name").to_owned();
            if name.is_empty() {
                return Err(err(line, Some("name"), "empty device name".into()));
            }
            if !names.insert(name.clone()) {
                return Err(err(line, Some("name"), format!("duplicate name `{name}`")));
            }

            let real = |col: &str| -> Result<f64> {
                let raw = cell(col);
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line, Some(col), format!("`{raw}` is not a number")))
            };
            let positive = |col: &str| -> Result<f64> {
                let v = real(col)?;
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(err(line, Some(col), format!("must be positive, got {v}")))
                }
            };
            let count = |col: &str| -> Result<u32> {
                let raw = cell(col);
                raw.parse::<u32>().ok().filter(|v| *v > 0).ok_or_else(|| {
                    err(
                        line,
                        Some(col),
                        format!("`{raw}` is not a positive integer"),
                    )
                })
            };
            let text_opt = |col: &str| Some(cell(col)).filter(|s| !s.is_empty()).map(str::to_owned);

            let extra_row: Vec<String> = extra_idx
                .iter()
                .map(|&i| record.get(i).unwrap_or("").to_owned())
                .collect();

            match kind {
                TableKind::Cameras => {
                    let dynamic_range_db = if cell("dynamic_range_db").is_empty() {
                        None
                    } else {
                        Some(positive("dynamic_range_db")?)
                    };
                    catalog.cameras.push(CameraSpec {
                        name,
                        sensor_width_mm: positive("sensor_width_mm")?,
                        sensor_height_mm: positive("sensor_height_mm")?,
                        res_width_px: count("res_width_px")?,
                        res_height_px: count("res_height_px")?,
                        dynamic_range_db,
                        interface: text_opt("interface"),
                    });
                    if !catalog.camera_extras.headers.is_empty() {
                        catalog.camera_extras.rows.push(extra_row);
                    }
                }
                TableKind::Lenses => {
                    let distortion_pct = if cell("distortion_pct").is_empty() {
                        None
                    } else {
                        Some(real("distortion_pct")?)
                    };
                    catalog.lenses.push(LensSpec {
                        name,
                        focal_length_mm: positive("focal_length_mm")?,
                        min_f_stop: positive("min_f_stop")?,
                        distortion_pct,
                        format: text_opt("format"),
                    });
                    if !catalog.lens_extras.headers.is_empty() {
                        catalog.lens_extras.rows.push(extra_row);
                    }
                }
            }
        }
    }

    let last_line = text.lines().count().max(1);
    if catalog.cameras.is_empty() {
        return Err(err(last_line, None, "catalog has no camera rows".into()));
    }
    if catalog.lenses.is_empty() {
        return Err(err(last_line, None, "catalog has no lens rows".into()));
    }
    Ok(catalog)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_row(out: &mut String, cells: &[String]) {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(cells).expect("in-memory write");
    let bytes = w.into_inner().expect("in-memory flush");
    out.push_str(&String::from_utf8(bytes).expect("utf-8 cells"));
}

/// Writes the catalog back in its text form.
pub fn serialize_catalog(catalog: &CatalogFile) -> String {
    let mut out = String::new();

    let with_interface = catalog.cameras.iter().any(|c| c.interface.is_some());
    let mut header: Vec<String> = CAMERA_COLUMNS.iter().map(|s| s.to_string()).collect();
    if with_interface {
        header.push("interface".into());
    }
    header.extend(catalog.camera_extras.headers.iter().cloned());
    write_row(&mut out, &header);
    for (i, c) in catalog.cameras.iter().enumerate() {
        let mut row = vec![
            c.name.clone(),
            c.sensor_width_mm.to_string(),
            c.sensor_height_mm.to_string(),
            c.res_width_px.to_string(),
            c.res_height_px.to_string(),
            opt_num(c.dynamic_range_db),
        ];
        if with_interface {
            row.push(c.interface.clone().unwrap_or_default());
        }
        if let Some(extra) = catalog.camera_extras.rows.get(i) {
            row.extend(extra.iter().cloned());
        }
        write_row(&mut out, &row);
    }

    out.push('\n');

    let with_format = catalog.lenses.iter().any(|l| l.format.is_some());
    let mut header: Vec<String> = LENS_COLUMNS.iter().map(|s| s.to_string()).collect();
    if with_format {
        header.push("format".into());
    }
    header.extend(catalog.lens_extras.headers.iter().cloned());
    write_row(&mut out, &header);
    for (i, l) in catalog.lenses.iter().enumerate() {
        let mut row = vec![
            l.name.clone(),
            l.focal_length_mm.to_string(),
            l.min_f_stop.to_string(),
            opt_num(l.distortion_pct),
        ];
        if with_format {
            row.push(l.format.clone().unwrap_or_default());
        }
        if let Some(extra) = catalog.lens_extras.rows.get(i) {
            row.extend(extra.iter().cloned());
        }
        write_row(&mut out, &row);
    }
    out
}
