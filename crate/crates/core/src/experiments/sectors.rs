//! Two-type growth from a split disc: do both types keep a share of the front?

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{check_reps, tag, write_rows, Context, ExperimentOutput};
use crate::error::{ExperimentError, SimError};
use crate::geometry::Point;
use crate::occupancy::SeedRegion;
use crate::replicas::map_replicas;
use crate::simulator::{run_two_type, SimConfig, SplitRule, StopCondition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConfig {
    pub seed_radius: f64,
    pub rule: SplitRule,
    pub t: f64,
    /// Rays on which the front type is read.
    pub n_dir: usize,
    pub reps: usize,
}

impl Default for SectorConfig {
    fn default() -> Self {
        SectorConfig {
            seed_radius: 5.0,
            rule: SplitRule::LeftRight,
            t: 50.0,
            n_dir: 64,
            reps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorRecord {
    pub replica: u64,
    pub n_events: u64,
    /// Rays whose front point carries type 0.
    pub front_type0: usize,
    pub front_type1: usize,
    pub both_survive: bool,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorSummary {
    pub experiment: &'static str,
    pub config: SectorConfig,
    pub master_seed: u64,
    pub survival_rate: f64,
    pub mean_type1_share: f64,
    pub incomplete: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorResult {
    pub records: Vec<SectorRecord>,
    pub summary: SectorSummary,
}

impl ExperimentOutput for SectorResult {
    fn name(&self) -> &'static str {
        "sectors"
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

fn one_replica(ctx: &Context, cfg: &SectorConfig, replica: u64) -> Result<SectorRecord, ExperimentError> {
    let seed = SeedRegion::disk(Point::ORIGIN, cfg.seed_radius);
    let rng = ctx.stream(tag::SECTORS, 0, replica);
    let sim_cfg = SimConfig::default().with_budget(ctx.budget);
    match run_two_type(
        seed,
        cfg.rule,
        ctx.measure,
        rng,
        StopCondition::TimeHorizon(cfg.t),
        sim_cfg,
        cfg.n_dir,
    ) {
        Ok(run) => {
            let front_type1 = run.front_types.iter().filter(|&&t| t == 1).count();
            let front_type0 = run.front_types.len() - front_type1;
            Ok(SectorRecord {
                replica,
                n_events: run.report.n_events,
                front_type0,
                front_type1,
                both_survive: front_type0 > 0 && front_type1 > 0,
                completed: true,
            })
        }
        Err(SimError::BudgetExceeded { report, .. }) => Ok(SectorRecord {
            replica,
            n_events: report.n_events,
            front_type0: 0,
            front_type1: 0,
            both_survive: false,
            completed: false,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Fraction of replicas in which both seed types still hold part of the front at time `t`.
pub fn sector_survival(cfg: &SectorConfig, ctx: &Context) -> Result<SectorResult, ExperimentError> {
    check_reps(cfg.reps)?;
    if !(cfg.seed_radius > 0.0 && cfg.t.is_finite() && cfg.t >= 0.0 && cfg.n_dir > 0) {
        return Err(ExperimentError::Params(
            "sectors need a positive seed radius, finite t >= 0 and at least one ray".into(),
        ));
    }
    let mut records = Vec::with_capacity(cfg.reps);
    for r in map_replicas(cfg.reps as u64, |r| one_replica(ctx, cfg, r)) {
        records.push(r?);
    }
    let done: Vec<&SectorRecord> = records.iter().filter(|r| r.completed).collect();
    let n = done.len().max(1) as f64;
    let survival_rate = done.iter().filter(|r| r.both_survive).count() as f64 / n;
    let mean_type1_share = done.iter().map(|r| r.front_type1 as f64 / cfg.n_dir as f64).sum::<f64>() / n;
    let incomplete = records.len() - done.len();
    Ok(SectorResult {
        summary: SectorSummary {
            experiment: "sectors",
            config: *cfg,
            master_seed: ctx.master_seed,
            survival_rate,
            mean_type1_share,
            incomplete,
            flagged: incomplete > 0,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::RadiusMeasure;

    #[test]
    fn time_zero_front_is_the_seed_split() {
        let m = RadiusMeasure::unit();
        let cfg = SectorConfig {
            t: 0.0,
            reps: 3,
            n_dir: 8,
            ..SectorConfig::default()
        };
        let res = sector_survival(&cfg, &Context::new(&m, 1)).unwrap();
        assert_eq!(res.summary.survival_rate, 1.0);
        assert!(res.records.iter().all(|r| r.front_type0 + r.front_type1 == 8));
    }

    #[test]
    fn short_run_keeps_both_types() {
        let m = RadiusMeasure::unit();
        let cfg = SectorConfig {
            t: 2.0,
            reps: 4,
            ..SectorConfig::default()
        };
        let res = sector_survival(&cfg, &Context::new(&m, 2)).unwrap();
        assert_eq!(res.summary.survival_rate, 1.0);
    }
}
