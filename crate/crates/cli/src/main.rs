//! Batch front door for the laboratory: parse an experiment config, run
//! flows, monodromy, fits, and cross-validations, and write machine-readable
//! reports.
//!
//! Exit codes: 0 on success, 2 on a validation error (bad flags or config,
//! reported with a JSON pointer), 3 on a numerical failure (reported with the
//! error's name), 1 on I/O trouble. Identical config and flags produce
//! bit-identical reports.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand, ValueEnum};
use schlesinger_lab::Error;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "schlesinger-lab",
    version,
    about = "Isomonodromic deformation laboratory for rank-2 Fuchsian systems",
    long_about = "Integrates Schlesinger deformations, computes monodromy, fits \
pole-collision expansion models, and cross-validates against the Painlevé VI \
equation, all driven by one JSON experiment config.\n\n\
The flow and p6-check commands always write their CSV artifacts; canonical \
adds a defect-ladder CSV under --format csv; the remaining reports are JSON. \
Set SCHLESINGER_LAB_THREADS to cap fan-out (sub-computations currently run \
sequentially, which honors any cap)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for reports, created if absent.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    out: PathBuf,

    /// Report serialization, where a report has both forms.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Override /tolerances/rel.
    #[arg(long, global = true, value_name = "X")]
    tol_rel: Option<f64>,

    /// Override /tolerances/abs.
    #[arg(long, global = true, value_name = "X")]
    tol_abs: Option<f64>,

    /// Override /sector as "theta0,psi,r".
    #[arg(long, global = true, value_name = "T,P,R")]
    sector: Option<String>,

    /// Recorded in report metadata. Commands are deterministic; the seed is
    /// reserved for randomized fixtures.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the deformation along the configured path
    /// (trajectory.csv, flow.json).
    Flow,
    /// Monodromy generators, trace invariants, and the product check
    /// (monodromy.json).
    Monodromy,
    /// Classify the merging pair's monodromy and extract the exponent gap
    /// (classify.json).
    Classify,
    /// Gauge-sign and limit-defect reports for the pair's two-pole family
    /// (canonical.json).
    Canonical,
    /// Fit expansion models to every residue entry along the sector ray
    /// (fit.json).
    Fit,
    /// Cross-validate the matrix flow against the scalar Painlevé VI route
    /// (p6_comparison.csv, p6_check.json).
    P6Check,
    /// The full pipeline into one directory (all.json indexes what ran).
    All,
}

/// What went wrong, sorted by whose fault it is.
pub enum Failure {
    /// Bad flags or config: exit 2.
    Validation(Error),
    /// The mathematics refused: exit 3.
    Numerical(Error),
    /// The filesystem refused: exit 1.
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ConfigInvalid { .. } => Failure::Validation(e),
            other => Failure::Numerical(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// The variant name, for `error[...]:` prefixes in diagnostics.
fn error_name(e: &Error) -> &'static str {
    match e {
        Error::NonFiniteMatrix => "NonFiniteMatrix",
        Error::ZeroBase => "ZeroBase",
        Error::SingularMatrix { .. } => "SingularMatrix",
        Error::BrokenPath { .. } => "BrokenPath",
        Error::EmptyPath => "EmptyPath",
        Error::StepUnderflow { .. } => "StepUnderflow",
        Error::MaxStepsExceeded { .. } => "MaxStepsExceeded",
        Error::RadiusTooLarge { .. } => "RadiusTooLarge",
        Error::PoleCollision { .. } => "PoleCollision",
        Error::ProductDefect { .. } => "ProductDefect",
        Error::OutOfSector { .. } => "OutOfSector",
        Error::IllConditioned { .. } => "IllConditioned",
        Error::InsufficientSamples { .. } => "InsufficientSamples",
        Error::DenominatorVanishes { .. } => "DenominatorVanishes",
        Error::SingularPoint { .. } => "SingularPoint",
        Error::ExponentGapOutOfRange { .. } => "ExponentGapOutOfRange",
        Error::MovablePole { .. } => "MovablePole",
        Error::ConfigInvalid { .. } => "ConfigInvalid",
    }
}

fn invalid_flag(flag: &str, message: &str) -> Failure {
    Failure::Validation(Error::ConfigInvalid {
        pointer: flag.to_string(),
        message: message.to_string(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error[{}]: {e}", error_name(&e));
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config_path = cli
        .config
        .ok_or_else(|| invalid_flag("--config", "required: path to the experiment JSON"))?;
    let bytes = fs::read(&config_path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| invalid_flag("--config", "config file is not UTF-8"))?;
    let mut cfg = config::parse(&text)?;

    if let Some(x) = cli.tol_rel {
        if !(x > 0.0) {
            return Err(invalid_flag("--tol-rel", "must be positive"));
        }
        cfg.tolerances.rel = x;
    }
    if let Some(x) = cli.tol_abs {
        if !(x > 0.0) {
            return Err(invalid_flag("--tol-abs", "must be positive"));
        }
        cfg.tolerances.abs = x;
    }
    if let Some(s) = &cli.sector {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| invalid_flag("--sector", "expected three numbers \"theta0,psi,r\""))?;
        let [theta0, psi, r] = parts[..] else {
            return Err(invalid_flag(
                "--sector",
                "expected three numbers \"theta0,psi,r\"",
            ));
        };
        if psi <= 0.0 || r <= 0.0 {
            return Err(invalid_flag("--sector", "psi and r must be positive"));
        }
        cfg.sector = config::SectorConfig { theta0, psi, r };
    }

    let threads_cap = match std::env::var("SCHLESINGER_LAB_THREADS") {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => {
                eprintln!("warning: SCHLESINGER_LAB_THREADS is not a positive integer; ignoring");
                None
            }
        },
        Err(_) => None,
    };

    fs::create_dir_all(&cli.out)?;
    let meta = report::Meta::new(&bytes, cli.seed, threads_cap);
    let ctx = commands::Ctx {
        cfg: &cfg,
        out: &cli.out,
        csv_extras: cli.format == Format::Csv,
        meta: meta.to_value(),
    };

    match cli.command {
        Command::Flow => commands::run_flow(&ctx).map(|_| ()),
        Command::Monodromy => commands::run_monodromy(&ctx),
        Command::Classify => commands::run_classify(&ctx),
        Command::Canonical => commands::run_canonical(&ctx),
        Command::Fit => commands::run_fit(&ctx),
        Command::P6Check => commands::run_p6_check(&ctx, None),
        Command::All => commands::run_all(&ctx),
    }
}
