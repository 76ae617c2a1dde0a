//! `skrein`: spectra, Krein identity checks, heat traces and small-t
//! expansions for the inverse-square operator, driven by a flat config file.
//!
//! Exit codes: 0 ok, 2 bad config or input, 3 numerical failure, 4 a
//! scientific check failed.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{ExpansionMode, Verdict};
use config::{parse_thetas, RunConfig};
use output::{sha256_hex, Format, OutDir};
use skrein::Tolerances;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] skrein::Error),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "skrein",
    version,
    about = "Self-adjoint extensions of the inverse-square operator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Comma-separated θ values (`inf` allowed); overrides the config.
    #[arg(long, global = true)]
    theta: Option<String>,
    /// Scales K by 1.01 inside krein-check (negative control).
    #[arg(long, global = true, hide = true)]
    corrupt_k: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Eigenvalues up to lambda_max for each θ.
    Spectrum,
    /// Random samples of the Krein resolvent identity.
    KreinCheck,
    /// Tr{exp(-tA^θ) - exp(-tA^∞)} on the t grid.
    HeatTrace,
    /// Predicted and fitted small-t expansions.
    Expansion {
        #[arg(value_enum)]
        mode: ExpansionMode,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::KreinCheck => "krein-check",
            Command::HeatTrace => "heat-trace",
            Command::Expansion {
                mode: ExpansionMode::Predict,
            } => "expansion predict",
            Command::Expansion {
                mode: ExpansionMode::Fit,
            } => "expansion fit",
            Command::Expansion {
                mode: ExpansionMode::Compare,
            } => "expansion compare",
        }
    }
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_sha256: String,
    config: &'a std::collections::BTreeMap<String, String>,
    theta: Vec<String>,
    nu: f64,
    tolerances: Tolerances,
    seed: u64,
    format: &'static str,
    outputs: Vec<OutputEntry>,
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("SKREIN_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "SKREIN_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Verdict, CliError> {
    init_threads()?;
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let (mut cfg, raw) = RunConfig::load(path)?;
    if let Some(list) = &cli.theta {
        cfg.thetas = parse_thetas(list)?;
    }
    let mut out = OutDir::create(&cli.out)?;
    let verdict = match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &mut out, cli.format)?,
        Command::KreinCheck => commands::krein_check(&cfg, &mut out, cli.format, cli.corrupt_k)?,
        Command::HeatTrace => commands::heat_trace(&cfg, &mut out, cli.format)?,
        Command::Expansion { mode } => commands::expansion(&cfg, &mut out, cli.format, mode)?,
    };
    let manifest = Manifest {
        tool: "skrein",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config_sha256: sha256_hex(&raw),
        config: &cfg.entries,
        theta: cfg.thetas.iter().map(|t| t.label()).collect(),
        nu: cfg.spec.nu(),
        tolerances: cfg.spec.tolerances,
        seed: cfg.seed,
        format: cli.format.ext(),
        outputs: out
            .written
            .iter()
            .map(|(f, h)| OutputEntry {
                file: f.clone(),
                sha256: h.clone(),
            })
            .collect(),
    };
    out.write_json("run_manifest.json", &manifest)?;
    Ok(verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
