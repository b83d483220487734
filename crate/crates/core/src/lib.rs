//! Design calculations for outdoor stereo vision rigs.
//!
//! - [`optics`]: field of view, working distance, depth of field.
//! - [`stereo`]: baseline bounds from depth error, overlap and disparity.
//! - [`selector`]: camera × lens feasibility, ranking and mounting geometry.
//! - [`coverage`]: frames per target and processing budgets for a moving rig.
//! - [`exposure`]: saturation-based glare auditing of image sets.
//! - [`catalog`], [`config`], [`report`]: file formats and report rendering.
//!
//! ```
//! use rigdesign::{catalog::reference_catalog, config::RunConfig, report::run_design};
//!
//! let report = run_design(&reference_catalog(), &RunConfig::reference()).unwrap();
//! assert_eq!(report.best().unwrap().camera.name, "acA1920-40uc");
//! ```

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod config;
pub mod coverage;
pub mod error;
pub mod exec;
pub mod exposure;
pub mod optics;
pub mod report;
pub mod selector;
pub mod serde_ext;
pub mod stereo;

pub use error::{DesignError, Result};
pub use exec::Execution;
