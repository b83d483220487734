use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the design and audit pipeline.
///
/// Every variant maps onto a stable machine-readable [`code`](DesignError::code)
/// and a process [`exit_code`](DesignError::exit_code).
#[derive(Debug, Error)]
pub enum DesignError {
    /// An operation received an input outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The stereo constraints leave no admissible baseline.
    #[error(
        "no admissible baseline: lower bound {lower_mm:.1} mm exceeds upper bound {upper_mm:.1} mm (binding: {binding})"
    )]
    EmptyBaselineInterval {
        lower_mm: f64,
        upper_mm: f64,
        binding: String,
    },

    /// Requested coverage cannot be met by a single camera.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// No candidate rig survived the feasibility filter.
    #[error("no feasible rig among {candidates} candidates")]
    NoFeasibleRig { candidates: usize },

    /// A value supplied by the caller failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A catalog or manifest failed to parse.
    #[error("{path}:{line}{}: {message}", column.as_ref().map(|c| format!(" (column `{c}`)")).unwrap_or_default())]
    Parse {
        path: String,
        line: usize,
        column: Option<String>,
        message: String,
    },

    /// The run configuration is malformed or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// An image could not be used for auditing.
    #[error("image format error: {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// Unexpected failure inside the tool itself.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DesignError {
    /// Stable identifier for machine consumers.
    pub fn code(&self) -> &'static str {
        match self {
            DesignError::Domain(_) => "E_DOMAIN",
            DesignError::EmptyBaselineInterval { .. } => "E_BASELINE_EMPTY",
            DesignError::Infeasible(_) => "E_INFEASIBLE",
            DesignError::NoFeasibleRig { .. } => "E_NO_FEASIBLE_RIG",
            DesignError::Validation(_) => "E_VALIDATION",
            DesignError::Parse { .. } => "E_PARSE",
            DesignError::Config(_) => "E_CONFIG",
            DesignError::Format { .. } => "E_FORMAT",
            DesignError::Internal(_) => "E_INTERNAL",
            DesignError::Io { .. } => "E_IO",
        }
    }

    /// 1 for an infeasible design, 2 for bad input, 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            DesignError::EmptyBaselineInterval { .. }
            | DesignError::Infeasible(_)
            | DesignError::NoFeasibleRig { .. } => 1,
            DesignError::Domain(_)
            | DesignError::Validation(_)
            | DesignError::Parse { .. }
            | DesignError::Config(_)
            | DesignError::Format { .. }
            | DesignError::Io { .. } => 2,
            DesignError::Internal(_) => 3,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        DesignError::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DesignError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = DesignError> = std::result::Result<T, E>;

/// Fails with a domain error unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(DesignError::domain(format!(
            "{name} must be a positive finite number, got {value}"
        )))
    }
}
