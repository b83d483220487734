use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rigdesign::catalog::{parse_catalog, reference_catalog, CatalogFile};
use rigdesign::config::{parse_config, RunConfig};
use rigdesign::exposure::{audit_paths, collect_dir, read_manifest, SaturationMode};
use rigdesign::optics::{CameraSpec, LensSpec};
use rigdesign::report::{
    baseline_report, coverage_section, envelope_report, run_design_with, AuditReport,
    CoverageReport, OutputFormat, Provenance, Report,
};
use rigdesign::{DesignError, Execution};

#[derive(Parser)]
#[command(
    name = "rigdesign",
    version,
    about = "Stereo vision rig design and exposure auditing"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,

    /// Run configuration (TOML). Defaults to the bundled reference config.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Run on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Select a rig from a catalog and produce the full design report.
    Design(CatalogArg),
    /// Focus envelope of one camera + lens pair.
    Envelope {
        #[command(flatten)]
        pair: PairArgs,
        /// Aperture; defaults to the largest stop in the config policy.
        #[arg(long)]
        f_stop: Option<f64>,
        /// Focus distance; defaults to where the target spans its minimum pixels.
        #[arg(long)]
        distance_mm: Option<f64>,
    },
    /// Admissible stereo baseline interval for one camera + lens pair.
    Baseline {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Frames per target and processing budgets across the configured speeds.
    Coverage {
        #[command(flatten)]
        catalog: CatalogArg,
        /// Vertical view extent for frame counts and budgets; defaults to the
        /// selected rig's at the configured planes.
        #[arg(long)]
        fov_v_mm: Option<f64>,
    },
    /// Saturation audit of an image sequence.
    Audit {
        /// Directory of images, audited in file-name order.
        #[arg(
            long,
            conflicts_with = "manifest",
            required_unless_present = "manifest"
        )]
        dir: Option<PathBuf>,
        /// Text file listing image paths in capture order.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Channel threshold (1-255); overrides the config.
        #[arg(long)]
        threshold: Option<u8>,
        /// Saturation mode; overrides the config.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
}

#[derive(Args)]
struct CatalogArg {
    /// Device catalog (CSV). Defaults to the bundled reference catalog.
    #[arg(long, value_name = "PATH")]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
struct PairArgs {
    #[command(flatten)]
    catalog: CatalogArg,
    #[arg(long)]
    camera: String,
    #[arg(long)]
    lens: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    AllChannels,
    BlueBiased,
}

const BUNDLED_CATALOG: &[&str] = &["paper_catalog", "paper_catalog.csv"];
const BUNDLED_CONFIG: &[&str] = &["paper_config", "paper_config.toml"];

fn is_bundled(path: &Path, names: &[&str]) -> bool {
    !path.exists() && names.iter().any(|n| path.as_os_str() == *n)
}

fn load_catalog(arg: &CatalogArg) -> Result<CatalogFile, DesignError> {
    match &arg.catalog {
        Some(p) if !is_bundled(p, BUNDLED_CATALOG) => parse_catalog(p),
        _ => Ok(reference_catalog()),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, DesignError> {
    match path {
        Some(p) if !is_bundled(p, BUNDLED_CONFIG) => parse_config(p),
        _ => Ok(RunConfig::reference()),
    }
}

fn find_pair(
    catalog: &CatalogFile,
    pair: &PairArgs,
) -> Result<(CameraSpec, LensSpec), DesignError> {
    let camera = catalog.camera(&pair.camera).ok_or_else(|| {
        DesignError::Validation(format!("camera `{}` is not in the catalog", pair.camera))
    })?;
    let lens = catalog.lens(&pair.lens).ok_or_else(|| {
        DesignError::Validation(format!("lens `{}` is not in the catalog", pair.lens))
    })?;
    Ok((camera.clone(), lens.clone()))
}

/// Rendered output plus the error that should set the exit status after the
/// output has been written.
struct Outcome {
    text: String,
    status: Option<DesignError>,
}

fn dispatch(cli: &Cli) -> Result<Outcome, DesignError> {
    let format = match cli.format {
        Format::Table => OutputFormat::Table,
        Format::Structured => OutputFormat::Structured,
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let mut config = load_config(cli.config.as_deref())?;
    let done = |text: String| Ok(Outcome { text, status: None });

    match &cli.command {
        Command::Design(arg) => {
            let catalog = load_catalog(arg)?;
            let report = run_design_with(&catalog, &config, exec)?;
            Ok(Outcome {
                text: report.render(format),
                status: report.ensure_feasible().err(),
            })
        }
        Command::Envelope {
            pair,
            f_stop,
            distance_mm,
        } => {
            let catalog = load_catalog(&pair.catalog)?;
            let (camera, lens) = find_pair(&catalog, pair)?;
            let stop = f_stop.unwrap_or_else(|| {
                config
                    .constraints
                    .f_stop_policy
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            });
            done(envelope_report(&camera, &lens, &config, stop, *distance_mm)?.render(format))
        }
        Command::Baseline { pair } => {
            let catalog = load_catalog(&pair.catalog)?;
            let (camera, lens) = find_pair(&catalog, pair)?;
            done(baseline_report(&camera, &lens, &config)?.render(format))
        }
        Command::Coverage { catalog, fov_v_mm } => {
            let coverage = match fov_v_mm {
                Some(v) => {
                    coverage_section(&config, (config.plane, *v), (config.budget_plane, *v))?
                }
                None => {
                    let report = run_design_with(&load_catalog(catalog)?, &config, exec)?;
                    report.ensure_feasible()?;
                    report.coverage.ok_or_else(|| {
                        DesignError::Internal("feasible design without coverage".into())
                    })?
                }
            };
            done(
                CoverageReport {
                    coverage,
                    provenance: Provenance::new(&config, None),
                }
                .render(format),
            )
        }
        Command::Audit {
            dir,
            manifest,
            threshold,
            mode,
        } => {
            if let Some(t) = threshold {
                config.saturation.channel_threshold = *t;
            }
            if let Some(m) = mode {
                config.saturation.mode = match m {
                    Mode::AllChannels => SaturationMode::AllChannels,
                    Mode::BlueBiased => SaturationMode::BlueBiased,
                };
            }
            config.saturation.validate()?;
            let paths = match (dir, manifest) {
                (Some(d), _) => collect_dir(d)?,
                (None, Some(m)) => read_manifest(m)?,
                (None, None) => {
                    return Err(DesignError::Validation(
                        "audit needs --dir or --manifest".into(),
                    ))
                }
            };
            if paths.is_empty() {
                return Err(DesignError::Validation("no images found to audit".into()));
            }
            let dataset = audit_paths(&paths, &config.saturation, exec)?;
            done(
                AuditReport {
                    dataset,
                    provenance: Provenance::new(&config, None),
                }
                .render(format),
            )
        }
    }
}

fn write_output(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing report to {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fail(err: &DesignError) -> ExitCode {
    eprintln!("error[{}]: {err}", err.code());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let outcome = match dispatch(&cli) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    if let Err(e) = write_output(&cli, &outcome.text) {
        eprintln!("error[E_IO]: {e:#}");
        return ExitCode::from(2);
    }
    match outcome.status {
        Some(e) => fail(&e),
        None => ExitCode::SUCCESS,
    }
}
