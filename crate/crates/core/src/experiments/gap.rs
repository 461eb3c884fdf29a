//! Front–bulk gap: time between the front reaching `x` and the bulk covering
//! the segment `[0, x] × {0}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{check_grid, check_reps, select, tag, write_rows, Context, ExperimentOutput};
use crate::error::{ExperimentError, SimError};
use crate::geometry::Point;
use crate::occupancy::{LogMode, SeedRegion};
use crate::replicas::map_replicas;
use crate::simulator::{SimConfig, Simulation, StopCondition, Target, WindowPolicy};
use crate::stats::{median, quantile};

/// Truncation rate above which a windowed run is flagged.
pub const MAX_TRUNCATION_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapMode {
    /// Seed `{0}`: `σ((x,0)) − τ(H^x)`, one run per replica for all x.
    PointSeed,
    /// Seed `{x <= 0}` on the strip of half-width `a √x`: `σ^H((x,0)) − τ^H((x,0))`.
    HalfPlaneWindow { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRecord {
    pub x: f64,
    pub replica: u64,
    /// Front time: `τ(H^x)` or `τ^H((x,0))`.
    pub tau: f64,
    /// Bulk time: first coverage of the segment to `(x,0)`.
    pub sigma: f64,
    pub gap: f64,
    /// `gap / √x`.
    pub scaled_gap: f64,
    pub truncated: bool,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub x: f64,
    pub n: usize,
    pub median_gap: f64,
    pub median_scaled: f64,
    pub p90_scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRatio {
    pub x_from: f64,
    pub x_to: f64,
    /// Median gap at `x_to` over median gap at `x_from`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub experiment: &'static str,
    pub mode: GapMode,
    pub reps: usize,
    pub master_seed: u64,
    pub rows: Vec<GapRow>,
    /// Median ratios between consecutive grid points.
    pub ratios: Vec<GapRatio>,
    pub negative_gaps: usize,
    pub truncation_rate: f64,
    pub incomplete: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapResult {
    pub records: Vec<GapRecord>,
    pub summary: GapSummary,
}

impl GapResult {
    /// Median gap at `b` over median gap at `a`, both grid points.
    pub fn median_ratio(&self, a: f64, b: f64) -> Option<f64> {
        let row = |x: f64| self.summary.rows.iter().find(|r| r.x == x);
        Some(row(b)?.median_gap / row(a)?.median_gap)
    }
}

impl ExperimentOutput for GapResult {
    fn name(&self) -> &'static str {
        "gap"
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

fn record(x: f64, replica: u64, tau: Option<f64>, sigma: Option<f64>, truncated: bool) -> GapRecord {
    let (tau, sigma) = (tau.unwrap_or(f64::NAN), sigma.unwrap_or(f64::NAN));
    let gap = sigma - tau;
    GapRecord {
        x,
        replica,
        tau,
        sigma,
        gap,
        scaled_gap: if x > 0.0 { gap / x.sqrt() } else { f64::NAN },
        truncated,
        completed: !gap.is_nan(),
    }
}

fn point_seed_replica(ctx: &Context, xs: &[f64], replica: u64) -> Result<Vec<GapRecord>, ExperimentError> {
    let cfg = SimConfig::default()
        .with_budget(ctx.budget)
        .with_log_mode(LogMode::Frontier);
    let rng = ctx.stream(tag::GAP, 0, replica);
    let mut sim = Simulation::new(SeedRegion::origin(), ctx.measure, rng, cfg)?;
    let probes: Vec<(usize, usize)> = xs
        .iter()
        .map(|&x| {
            let front = sim.add_probe(Target::HalfPlane { x });
            let bulk = sim.add_probe(Target::Segment { z: Point::new(x, 0.0) });
            (front, bulk)
        })
        .collect();
    let x_max = *xs.last().expect("grid is non-empty");
    match sim.run_until(StopCondition::SegmentCovered(Point::new(x_max, 0.0))) {
        Ok(_) | Err(SimError::BudgetExceeded { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    let time = |p: usize| sim.probe_hit(p).map(|h| h.time);
    Ok(xs
        .iter()
        .zip(&probes)
        .map(|(&x, &(f, b))| record(x, replica, time(f), time(b), false))
        .collect())
}

fn window_replica(ctx: &Context, a: f64, x: f64, xi: usize, replica: u64) -> Result<GapRecord, ExperimentError> {
    let policy = WindowPolicy::half_plane_strip(x, a, ctx.measure.max_radius())?;
    let cfg = SimConfig {
        policy,
        ..SimConfig::default()
    }
    .with_budget(ctx.budget)
    .with_log_mode(LogMode::Frontier);
    let rng = ctx.stream(tag::GAP, xi + 1, replica);
    let z = Point::new(x, 0.0);
    let mut sim = Simulation::new(SeedRegion::half_plane(0.0), ctx.measure, rng, cfg)?;
    let front = sim.add_probe(Target::Point { z });
    match sim.run_until(StopCondition::SegmentCovered(z)) {
        Ok(rep) => Ok(record(
            x,
            replica,
            sim.probe_hit(front).map(|h| h.time),
            Some(rep.stop_time),
            rep.truncated,
        )),
        Err(SimError::BudgetExceeded { .. }) => {
            Ok(record(x, replica, sim.probe_hit(front).map(|h| h.time), None, false))
        }
        Err(e) => Err(e.into()),
    }
}

/// Measures the front–bulk gap at every `x` in the chosen mode.
pub fn front_bulk_gap(xs: &[f64], reps: usize, ctx: &Context, mode: GapMode) -> Result<GapResult, ExperimentError> {
    check_grid(xs)?;
    check_reps(reps)?;
    let mut records = Vec::with_capacity(xs.len() * reps);
    match mode {
        GapMode::PointSeed => {
            for batch in map_replicas(reps as u64, |r| point_seed_replica(ctx, xs, r)) {
                records.extend(batch?);
            }
        }
        GapMode::HalfPlaneWindow { a } => {
            if !(a.is_finite() && a > 0.0) {
                return Err(ExperimentError::Params(format!("window constant must be positive, got {a}")));
            }
            if xs[0] <= 0.0 {
                return Err(ExperimentError::Params("windowed gap needs x > 0".into()));
            }
            for (xi, &x) in xs.iter().enumerate() {
                for rec in map_replicas(reps as u64, |r| window_replica(ctx, a, x, xi, r)) {
                    records.push(rec?);
                }
            }
        }
    }
    let rows: Vec<GapRow> = xs
        .iter()
        .map(|&x| {
            let g = select(&records, |r| r.x == x && r.completed, |r| r.gap);
            let s = select(&records, |r| r.x == x && r.completed, |r| r.scaled_gap);
            GapRow {
                x,
                n: g.len(),
                median_gap: median(&g),
                median_scaled: median(&s),
                p90_scaled: quantile(&s, 0.9),
            }
        })
        .collect();
    let ratios = rows
        .windows(2)
        .map(|w| GapRatio {
            x_from: w[0].x,
            x_to: w[1].x,
            ratio: w[1].median_gap / w[0].median_gap,
        })
        .collect();
    let done: Vec<&GapRecord> = records.iter().filter(|r| r.completed).collect();
    let negative_gaps = done.iter().filter(|r| r.gap < 0.0).count();
    let truncation_rate = done.iter().filter(|r| r.truncated).count() as f64 / done.len().max(1) as f64;
    let incomplete = records.len() - done.len();
    let flagged = incomplete > 0 || truncation_rate > MAX_TRUNCATION_RATE;
    Ok(GapResult {
        summary: GapSummary {
            experiment: "gap",
            mode,
            reps,
            master_seed: ctx.master_seed,
            rows,
            ratios,
            negative_gaps,
            truncation_rate,
            incomplete,
            flagged,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::RadiusMeasure;

    #[test]
    fn point_seed_gaps_are_nonnegative() {
        let m = RadiusMeasure::unit();
        let ctx = Context::new(&m, 11);
        let res = front_bulk_gap(&[1.0, 4.0, 8.0], 20, &ctx, GapMode::PointSeed).unwrap();
        assert_eq!(res.records.len(), 60);
        assert_eq!(res.summary.negative_gaps, 0);
        assert_eq!(res.summary.incomplete, 0);
        assert!(res.median_ratio(4.0, 8.0).unwrap().is_finite());
    }

    #[test]
    fn windowed_gaps_are_nonnegative() {
        let m = RadiusMeasure::unit();
        let ctx = Context::new(&m, 11);
        let res = front_bulk_gap(&[4.0, 9.0], 10, &ctx, GapMode::HalfPlaneWindow { a: 6.0 }).unwrap();
        assert_eq!(res.summary.negative_gaps, 0);
        assert!(res.records.iter().all(|r| r.completed));
    }

    #[test]
    fn windowed_gap_rejects_zero() {
        let m = RadiusMeasure::unit();
        let ctx = Context::new(&m, 11);
        let err = front_bulk_gap(&[0.0, 4.0], 2, &ctx, GapMode::HalfPlaneWindow { a: 6.0 });
        assert!(matches!(err, Err(ExperimentError::Params(_))));
    }
}
