//! Forward coverage against backward reachability of the seed.
//!
//! A point `z` is covered at time `t` exactly when the ancestral skeleton
//! started at `(t, z)` and run back to time 0 meets the seed.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use super::{check_reps, tag, write_rows, Context, ExperimentOutput};
use crate::chains::{ancestral_skeleton, skeleton_meets_seed};
use crate::error::ExperimentError;
use crate::geometry::Point;
use crate::occupancy::{LogMode, SeedRegion};
use crate::replicas::map_replicas;
use crate::simulator::{SimConfig, Simulation, StopCondition};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonRecord {
    pub run: u64,
    pub query: usize,
    pub zx: f64,
    pub zy: f64,
    pub t: f64,
    pub covered: bool,
    pub skeleton_meets_seed: bool,
    pub skeleton_size: usize,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonSummary {
    pub experiment: &'static str,
    pub runs: usize,
    pub queries_per_run: usize,
    pub n_events: u64,
    pub master_seed: u64,
    pub queries: usize,
    pub covered: usize,
    pub disagreements: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonResult {
    pub records: Vec<SkeletonRecord>,
    pub summary: SkeletonSummary,
}

impl ExperimentOutput for SkeletonResult {
    fn name(&self) -> &'static str {
        "skeleton"
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

fn one_run(ctx: &Context, queries: usize, n_events: u64, run: u64) -> Result<Vec<SkeletonRecord>, ExperimentError> {
    let cfg = SimConfig::default()
        .with_budget(ctx.budget)
        .with_log_mode(LogMode::Full);
    let mut sim = Simulation::new(SeedRegion::origin(), ctx.measure, ctx.stream(tag::SKELETON, 0, run), cfg)?;
    let rep = sim.run_until(StopCondition::EventCount(n_events))?;
    let state = sim.state();
    let t = rep.stop_time;
    let w = state
        .inflated_bbox(ctx.measure.max_radius())
        .expect("a point seed has a bounding box");
    let mut rng = ctx.stream(tag::SKELETON, 1, run);
    Ok((0..queries)
        .map(|query| {
            let z = Point::new(rng.random_range(w.x_lo..w.x_hi), rng.random_range(w.y_lo..w.y_hi));
            let covered = state.covers(z);
            let sk = ancestral_skeleton(state, z, t, t);
            let meets = skeleton_meets_seed(state, &sk);
            SkeletonRecord {
                run,
                query,
                zx: z.x,
                zy: z.y,
                t,
                covered,
                skeleton_meets_seed: meets,
                skeleton_size: sk.len(),
                agree: covered == meets,
            }
        })
        .collect())
}

/// `runs` point-seed runs stopped after `n_events` acceptances, each queried
/// at `queries` uniform points of its inflated bounding box.
pub fn skeleton_check(runs: usize, queries: usize, n_events: u64, ctx: &Context) -> Result<SkeletonResult, ExperimentError> {
    check_reps(runs)?;
    let mut records = Vec::with_capacity(runs * queries);
    for batch in map_replicas(runs as u64, |r| one_run(ctx, queries, n_events, r)) {
        records.extend(batch?);
    }
    let disagreements = records.iter().filter(|r| !r.agree).count();
    Ok(SkeletonResult {
        summary: SkeletonSummary {
            experiment: "skeleton",
            runs,
            queries_per_run: queries,
            n_events,
            master_seed: ctx.master_seed,
            queries: records.len(),
            covered: records.iter().filter(|r| r.covered).count(),
            disagreements,
            flagged: false,
        },
        records,
    })
}
