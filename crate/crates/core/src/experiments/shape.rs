//! Directional reach of the occupied set from a point seed.
//!
//! `R(t, θ)` is the farthest covered distance along the ray of angle `θ`
//! from the origin at time `t`. The asymptotic shape is the disc of radius
//! `t / ν`, so `max_θ |R(t,θ)/t − 1/ν|` should shrink with `t`.

use std::io::Write;

use serde::Serialize;

use super::{check_reps, tag, write_rows, Context, ExperimentOutput};
use crate::error::{ExperimentError, SimError};
use crate::geometry::Point;
use crate::occupancy::{LogMode, SeedRegion};
use crate::replicas::map_replicas;
use crate::simulator::{SimConfig, Simulation, StopCondition};
use crate::stats::{mean, pooled_se, standard_error};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeConfig {
    /// Observation times, strictly increasing.
    pub ts: Vec<f64>,
    pub n_dir: usize,
    pub reps: usize,
    /// Speed to compare against; calibrated from independent runs when `None`.
    pub nu_hat: Option<f64>,
    pub calibration_x: f64,
    pub calibration_reps: usize,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            ts: vec![20.0, 40.0, 80.0],
            n_dir: 16,
            reps: 100,
            nu_hat: None,
            calibration_x: 200.0,
            calibration_reps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeRecord {
    pub replica: u64,
    pub t: f64,
    pub direction: usize,
    pub theta: f64,
    pub reach: f64,
    pub reach_over_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeRow {
    pub t: f64,
    pub n: usize,
    /// Mean over replicas of `max_θ |R/t − 1/ν̂|`.
    pub mean_deviation: f64,
    pub se_deviation: f64,
    pub mean_reach_east: f64,
    pub se_reach_east: f64,
    pub mean_reach_north: f64,
    pub se_reach_north: f64,
    /// `|mean east − mean north|` over their pooled standard error.
    pub isotropy_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeSummary {
    pub experiment: &'static str,
    pub reps: usize,
    pub n_dir: usize,
    pub master_seed: u64,
    pub nu_hat: f64,
    /// Sample size behind a calibrated `nu_hat`; `0` when it was given.
    pub nu_hat_calibration_n: usize,
    pub rows: Vec<ShapeRow>,
    /// Fraction of replicas whose deviation at the last time is at most the
    /// one at the first time.
    pub paired_decrease_fraction: f64,
    /// Ray-time pairs where the reach shrank.
    pub monotonicity_violations: usize,
    pub incomplete: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeResult {
    pub records: Vec<ShapeRecord>,
    pub summary: ShapeSummary,
}

impl ExperimentOutput for ShapeResult {
    fn name(&self) -> &'static str {
        "shape"
    }
    fn write_records<W: Write>(&self, w: W) -> Result<(), ExperimentError> {
        write_rows(w, &self.records)
    }
    fn summary_json(&self) -> Result<String, ExperimentError> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }
    fn flagged(&self) -> bool {
        self.summary.flagged
    }
}

/// Reach on every ray at every time; `None` if the budget ran out.
fn one_replica(ctx: &Context, cfg: &ShapeConfig, replica: u64) -> Result<Option<Vec<Vec<f64>>>, ExperimentError> {
    let sim_cfg = SimConfig::default()
        .with_budget(ctx.budget)
        .with_log_mode(LogMode::Frontier);
    let rng = ctx.stream(tag::SHAPE, 0, replica);
    let mut sim = Simulation::new(SeedRegion::origin(), ctx.measure, rng, sim_cfg)?;
    sim.track_reach(Point::ORIGIN, cfg.n_dir);
    let mut out = Vec::with_capacity(cfg.ts.len());
    for &t in &cfg.ts {
        match sim.run_until(StopCondition::TimeHorizon(t)) {
            Ok(_) => out.push(sim.reach().expect("reach tracked").reach().to_vec()),
            Err(SimError::BudgetExceeded { .. }) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Some(out))
}

/// `τ(H^x)/x` over independent point-seed replicas, for calibrating `ν̂`.
fn calibrate(ctx: &Context, x: f64, reps: usize) -> Result<(f64, usize), ExperimentError> {
    let times = map_replicas(reps as u64, |r| {
        let cfg = SimConfig::default()
            .with_budget(ctx.budget)
            .with_log_mode(LogMode::Frontier);
        let rng = ctx.stream(tag::SHAPE_CALIBRATION, 0, r);
        let mut sim = Simulation::new(SeedRegion::origin(), ctx.measure, rng, cfg)?;
        match sim.run_until(StopCondition::HalfPlaneReached(x)) {
            Ok(rep) => Ok(Some(rep.stop_time / x)),
            Err(SimError::BudgetExceeded { .. }) => Ok(None),
            Err(e) => Err(ExperimentError::from(e)),
        }
    });
    let mut v = Vec::with_capacity(reps);
    for t in times {
        v.extend(t?);
    }
    if v.is_empty() {
        return Err(ExperimentError::FitUndefined("no calibration replica finished".into()));
    }
    Ok((mean(&v), v.len()))
}

/// Index of the ray closest to angle `theta`.
fn ray_at(n_dir: usize, theta: f64) -> usize {
    let k = (theta / std::f64::consts::TAU * n_dir as f64).round() as usize;
    k % n_dir
}

/// Records `R(t, θ)` on `n_dir` rays for `reps` replicas and tests the
/// approach to the asymptotic disc.
pub fn shape_scan(cfg: &ShapeConfig, ctx: &Context) -> Result<ShapeResult, ExperimentError> {
    check_reps(cfg.reps)?;
    if cfg.n_dir < 8 {
        return Err(ExperimentError::Params(format!("need at least 8 directions, got {}", cfg.n_dir)));
    }
    if cfg.ts.is_empty() || cfg.ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(ExperimentError::Params("times must be finite and positive".into()));
    }
    if cfg.ts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Params("times must be strictly increasing".into()));
    }
    let (nu_hat, nu_hat_calibration_n) = match cfg.nu_hat {
        Some(v) if v.is_finite() && v > 0.0 => (v, 0),
        Some(v) => return Err(ExperimentError::Params(format!("nu_hat must be positive, got {v}"))),
        None => {
            if !(cfg.calibration_x > 0.0) {
                return Err(ExperimentError::Params("calibration x must be positive".into()));
            }
            check_reps(cfg.calibration_reps)?;
            calibrate(ctx, cfg.calibration_x, cfg.calibration_reps)?
        }
    };
    let runs = map_replicas(cfg.reps as u64, |r| one_replica(ctx, cfg, r));
    let angles: Vec<f64> = (0..cfg.n_dir)
        .map(|k| std::f64::consts::TAU * k as f64 / cfg.n_dir as f64)
        .collect();
    let mut records = Vec::new();
    // deviations[replica][time]
    let mut deviations: Vec<Vec<f64>> = Vec::new();
    let mut finished: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut incomplete = 0;
    for (replica, run) in runs.into_iter().enumerate() {
        let Some(reach) = run? else {
            incomplete += 1;
            continue;
        };
        let mut dev = Vec::with_capacity(cfg.ts.len());
        for (&t, rs) in cfg.ts.iter().zip(&reach) {
            let mut d = 0f64;
            for (k, &r) in rs.iter().enumerate() {
                records.push(ShapeRecord {
                    replica: replica as u64,
                    t,
                    direction: k,
                    theta: angles[k],
                    reach: r,
                    reach_over_t: r / t,
                });
                d = d.max((r / t - 1.0 / nu_hat).abs());
            }
            dev.push(d);
        }
        deviations.push(dev);
        finished.push(reach);
    }
    let (east, north) = (0, ray_at(cfg.n_dir, std::f64::consts::FRAC_PI_2));
    let rows = cfg
        .ts
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let d: Vec<f64> = deviations.iter().map(|v| v[ti]).collect();
            let e: Vec<f64> = finished.iter().map(|v| v[ti][east]).collect();
            let n: Vec<f64> = finished.iter().map(|v| v[ti][north]).collect();
            ShapeRow {
                t,
                n: d.len(),
                mean_deviation: mean(&d),
                se_deviation: standard_error(&d),
                mean_reach_east: mean(&e),
                se_reach_east: standard_error(&e),
                mean_reach_north: mean(&n),
                se_reach_north: standard_error(&n),
                isotropy_z: (mean(&e) - mean(&n)).abs() / pooled_se(&e, &n),
            }
        })
        .collect();
    let last = cfg.ts.len() - 1;
    let paired_decrease_fraction =
        deviations.iter().filter(|v| v[last] <= v[0]).count() as f64 / deviations.len().max(1) as f64;
    let monotonicity_violations = finished
        .iter()
        .map(|v| {
            v.windows(2)
                .map(|w| w[0].iter().zip(&w[1]).filter(|(a, b)| b < a).count())
                .sum::<usize>()
        })
        .sum();
    Ok(ShapeResult {
        records,
        summary: ShapeSummary {
            experiment: "shape",
            reps: cfg.reps,
            n_dir: cfg.n_dir,
            master_seed: ctx.master_seed,
            nu_hat,
            nu_hat_calibration_n,
            rows,
            paired_decrease_fraction,
            monotonicity_violations,
            incomplete,
            flagged: incomplete > 0,
        },
    })
}
