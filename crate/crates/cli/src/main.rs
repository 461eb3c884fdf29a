//! `slfv`: runs one simulation or experiment and writes CSV data, a JSON
//! summary and a hashed manifest to the output directory.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 results written but flagged unreliable (budget or reliability check).

mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slfv_core::simulator::DEFAULT_BUDGET;
use slfv_core::{ExperimentError, RadiusMeasure, SeedRegion, SimError};

use config::{Params, RunConfig};
use manifest::{Manifest, Verification};

const DEFAULT_MASTER_SEED: u64 = 1;
const DEFAULT_OUT: &str = "slfv-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Experiment(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Experiment(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Experiment(ExperimentError::Params(_) | ExperimentError::Measure(_)) => 2,
            CliError::Experiment(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Forward runs with full event logs and hitting geodesics.
    Simulate,
    /// Front speed from half-plane and axis-point hitting times.
    Nu,
    /// Transverse wandering exponent of hitting geodesics.
    Exponent,
    /// Delay between front arrival and bulk coverage.
    Gap,
    /// Point-to-plane against plane-to-point hitting times.
    Duality,
    /// Directional reach against the asymptotic disc.
    Shape,
    /// Tail checks for coverage chains, hitting times and jump counts.
    Slowchain,
    /// Two-type sector persistence.
    Sectors,
    /// Forward coverage against backward skeletons.
    SkeletonCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Nu => "nu",
            Command::Exponent => "exponent",
            Command::Gap => "gap",
            Command::Duality => "duality",
            Command::Shape => "shape",
            Command::Slowchain => "slowchain",
            Command::Sectors => "sectors",
            Command::SkeletonCheck => "skeleton-check",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "slfv", version, about = "Monte Carlo for the infinite-parent SLFV growth process")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    x: Option<f64>,
    /// Comma-separated distance grid.
    #[arg(long, global = true, value_delimiter = ',')]
    xs: Option<Vec<f64>>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Strip half-width factor of half-plane windows.
    #[arg(long = "window-a", global = true)]
    window_a: Option<f64>,
}

/// Config merged with command-line overrides.
pub struct Settings {
    pub measure: RadiusMeasure,
    pub seed_region: Option<SeedRegion>,
    pub master_seed: u64,
    pub out: PathBuf,
    pub budget: u64,
    pub params: Params,
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => RunConfig {
            measure: RadiusMeasure::unit().to_spec(),
            ..RunConfig::default()
        },
    };
    let measure = RadiusMeasure::from_spec(&cfg.measure).map_err(|e| CliError::Config(format!("$.measure: {e}")))?;
    if let Some(seed) = &cfg.seed_region {
        seed.validate().map_err(|e| CliError::Config(format!("$.seed_region: {e}")))?;
    }
    let mut params = cfg.params;
    params.x = cli.x.or(params.x);
    params.xs = cli.xs.clone().or(params.xs);
    params.reps = cli.reps.or(params.reps);
    params.window_a = cli.window_a.or(params.window_a);
    Ok(Settings {
        measure,
        seed_region: cfg.seed_region,
        master_seed: cli.seed.or(cfg.master_seed).unwrap_or(DEFAULT_MASTER_SEED),
        out: cli.out.clone().or(cfg.out).unwrap_or_else(|| DEFAULT_OUT.into()),
        budget: cfg.budget.unwrap_or(DEFAULT_BUDGET),
        params,
    })
}

pub fn write_file(path: &Path, data: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, data).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let s = settings(cli)?;
    std::fs::create_dir_all(&s.out).map_err(|source| CliError::Output {
        path: s.out.clone(),
        source,
    })?;
    let produced = commands::execute(cli.command, &s)?;
    let manifest = Manifest::new(cli.command.name(), s.master_seed, &produced.files);
    match manifest.verify_against(&s.out) {
        Verification::Unchanged(n) => eprintln!("slfv: {n} output file(s) match the previous manifest"),
        Verification::Changed(files) => eprintln!("slfv: differs from the previous manifest: {}", files.join(", ")),
        Verification::FirstRun | Verification::DifferentRun => {}
    }
    for (name, data) in &produced.files {
        write_file(&s.out.join(name), data)?;
    }
    manifest.write(&s.out)?;
    Ok(produced.flagged)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("slfv: {} results are flagged as unreliable; see the summary", cli.command.name());
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("slfv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
