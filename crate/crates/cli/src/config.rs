//! JSON run configuration, validated before anything runs.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use slfv_core::experiments::{GapMode, SectorConfig, TailConfig};
use slfv_core::{MeasureSpec, SeedRegion, StopCondition, Window};

use crate::CliError;

/// Top-level keys that must be present in a config file.
const REQUIRED: [&str; 1] = ["measure"];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub measure: MeasureSpec,
    #[serde(default)]
    pub seed_region: Option<SeedRegion>,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Candidate budget per replica.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub params: Params,
}

/// Experiment parameters; each subcommand reads the keys it needs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub x: Option<f64>,
    pub xs: Option<Vec<f64>>,
    pub reps: Option<usize>,
    /// Strip half-width factor of restricted half-plane runs.
    pub window_a: Option<f64>,
    pub gap_mode: Option<GapMode>,
    /// `simulate`: stop rule and optional fixed window.
    pub stop: Option<StopCondition>,
    pub window: Option<Window>,
    /// `shape`.
    pub ts: Option<Vec<f64>>,
    pub n_dir: Option<usize>,
    pub nu_hat: Option<f64>,
    pub calibration_x: Option<f64>,
    pub calibration_reps: Option<usize>,
    /// `slowchain`.
    pub tails: Option<TailConfig>,
    /// `sectors`.
    pub sectors: Option<SectorConfig>,
    /// `skeleton-check`.
    pub queries: Option<usize>,
    pub n_events: Option<u64>,
}

/// JSON path in `$.a.b[0]` form.
fn json_path(p: &serde_path_to_error::Path) -> String {
    let s = p.to_string();
    if s == "." {
        "$".into()
    } else if s.starts_with('[') {
        format!("${s}")
    } else {
        format!("$.{s}")
    }
}

pub fn parse(text: &str, source: &Path) -> Result<RunConfig, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("{}: not valid JSON: {e}", source.display())))?;
    let Some(obj) = value.as_object() else {
        return Err(CliError::Config(format!("{}: $ must be a JSON object", source.display())));
    };
    for key in REQUIRED {
        if !obj.contains_key(key) {
            return Err(CliError::Config(format!("{}: missing required key $.{key}", source.display())));
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        CliError::Config(format!("{}: at {}: {}", source.display(), json_path(e.path()), e.inner()))
    })
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text, path)
}
