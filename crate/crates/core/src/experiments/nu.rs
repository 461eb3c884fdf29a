//! Front speed: `τ(H^x)/x` and `τ((x,0))/x` from a point seed.

use std::io::Write;

use serde::Serialize;

use super::{check_grid, check_reps, select, tag, write_rows, Context, ExperimentOutput};
use crate::chains::{chain_stats, extract_geodesic};
use crate::error::{ExperimentError, SimError};
use crate::geometry::Point;
use crate::occupancy::{LogMode, SeedRegion};
use crate::replicas::map_replicas;
use crate::simulator::{SimConfig, Simulation, StopCondition, Target};
use crate::stats::{mean, pooled_se, standard_error};

/// Smallest replica count for which the summary is not marked as under-sampled.
pub const RECOMMENDED_REPS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuRecord {
    pub x: f64,
    pub replica: u64,
    /// `τ(H^x)`.
    pub tau_half_plane: f64,
    /// `τ((x,0))`.
    pub tau_point: f64,
    /// Jumps of a geodesic to `H^x`.
    pub n_jumps: usize,
    pub n_events: u64,
    pub n_candidates: u64,
    /// `false` when the candidate budget ran out; times are then `NaN`.
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuRow {
    pub x: f64,
    pub n: usize,
    pub mean_half_plane: f64,
    pub se_half_plane: f64,
    pub mean_point: f64,
    pub se_point: f64,
    /// `⌈x / 2R0⌉`, the least number of jumps that can reach `H^x`.
    pub jump_floor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuDrift {
    pub x_from: f64,
    pub x_to: f64,
    /// Difference of mean `τ(H^x)/x`, later minus earlier.
    pub difference: f64,
    pub pooled_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuSummary {
    pub experiment: &'static str,
    pub reps: usize,
    pub master_seed: u64,
    pub rows: Vec<NuRow>,
    /// Inverse-variance weighted mean of both estimators at the largest x.
    pub nu_hat: f64,
    pub nu_hat_se: f64,
    pub nu_hat_n: usize,
    pub drift: Vec<NuDrift>,
    /// Replicas with `τ(H^x) > τ((x,0))`.
    pub ordering_violations: usize,
    /// Replicas with fewer geodesic jumps than the floor, or `τ(H^x) = 0` for `x > 0`.
    pub floor_violations: usize,
    pub incomplete: usize,
    pub under_sampled: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuResult {
    pub records: Vec<NuRecord>,
    pub summary: NuSummary,
}

impl ExperimentOutput for NuResult {
    fn name(&self) -> &'static str {
        "nu"
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

fn one_replica(ctx: &Context, x: f64, xi: usize, replica: u64) -> Result<NuRecord, ExperimentError> {
    let cfg = SimConfig::default()
        .with_budget(ctx.budget)
        .with_log_mode(LogMode::Frontier);
    let rng = ctx.stream(tag::NU, xi, replica);
    let mut sim = Simulation::new(SeedRegion::origin(), ctx.measure, rng, cfg)?;
    let probe = sim.add_probe(Target::HalfPlane { x });
    match sim.run_until(StopCondition::PointCovered(Point::new(x, 0.0))) {
        Ok(report) => {
            let hit = sim.probe_hit(probe).expect("the point lies in the half-plane");
            let n_jumps = match hit.event {
                Some(id) => {
                    let mut g = ctx.geodesic_rng(tag::NU, xi, replica);
                    chain_stats(&extract_geodesic(sim.state(), id, &mut g)?).n_jumps
                }
                None => 0,
            };
            Ok(NuRecord {
                x,
                replica,
                tau_half_plane: hit.time,
                tau_point: report.stop_time,
                n_jumps,
                n_events: report.n_events,
                n_candidates: report.n_candidates,
                completed: true,
            })
        }
        Err(SimError::BudgetExceeded { report, .. }) => Ok(NuRecord {
            x,
            replica,
            tau_half_plane: sim.probe_hit(probe).map_or(f64::NAN, |h| h.time),
            tau_point: f64::NAN,
            n_jumps: 0,
            n_events: report.n_events,
            n_candidates: report.n_candidates,
            completed: false,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Runs `reps` independent point-seed replicas at every `x` and estimates
/// the front speed.
pub fn estimate_nu(xs: &[f64], reps: usize, ctx: &Context) -> Result<NuResult, ExperimentError> {
    check_grid(xs)?;
    check_reps(reps)?;
    let r0 = ctx.measure.max_radius();
    let mut records = Vec::with_capacity(xs.len() * reps);
    for (xi, &x) in xs.iter().enumerate() {
        let batch = map_replicas(reps as u64, |r| one_replica(ctx, x, xi, r));
        for rec in batch {
            records.push(rec?);
        }
    }
    let summary = summarize(xs, reps, ctx.master_seed, r0, &records);
    Ok(NuResult { records, summary })
}

fn floor_jumps(x: f64, r0: f64) -> usize {
    (x / (2.0 * r0)).ceil().max(0.0) as usize
}

fn summarize(xs: &[f64], reps: usize, master_seed: u64, r0: f64, records: &[NuRecord]) -> NuSummary {
    let per_x = |x: f64, f: fn(&NuRecord) -> f64| {
        select(records, |r| r.x == x && r.completed && x > 0.0, move |r| f(r) / x)
    };
    let rows: Vec<NuRow> = xs
        .iter()
        .map(|&x| {
            let hp = per_x(x, |r| r.tau_half_plane);
            let pt = per_x(x, |r| r.tau_point);
            NuRow {
                x,
                n: hp.len(),
                mean_half_plane: mean(&hp),
                se_half_plane: standard_error(&hp),
                mean_point: mean(&pt),
                se_point: standard_error(&pt),
                jump_floor: floor_jumps(x, r0),
            }
        })
        .collect();
    let drift = xs
        .windows(2)
        .map(|w| {
            let (a, b) = (per_x(w[0], |r| r.tau_half_plane), per_x(w[1], |r| r.tau_half_plane));
            NuDrift {
                x_from: w[0],
                x_to: w[1],
                difference: mean(&b) - mean(&a),
                pooled_se: pooled_se(&a, &b),
            }
        })
        .collect();
    let last = rows.last().expect("grid is non-empty");
    let (nu_hat, nu_hat_se) = weighted(
        (last.mean_half_plane, last.se_half_plane),
        (last.mean_point, last.se_point),
    );
    let done = records.iter().filter(|r| r.completed);
    let ordering_violations = done.clone().filter(|r| r.tau_half_plane > r.tau_point).count();
    let floor_violations = done
        .filter(|r| r.x > 0.0 && (r.tau_half_plane <= 0.0 || r.n_jumps < floor_jumps(r.x, r0)))
        .count();
    let incomplete = records.iter().filter(|r| !r.completed).count();
    NuSummary {
        experiment: "nu",
        reps,
        master_seed,
        nu_hat_n: last.n,
        rows,
        nu_hat,
        nu_hat_se,
        drift,
        ordering_violations,
        floor_violations,
        incomplete,
        under_sampled: reps < RECOMMENDED_REPS,
        flagged: incomplete > 0,
    }
}

/// Inverse-variance weighted mean of two estimates `(value, se)`.
pub(crate) fn weighted(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (wa, wb) = (1.0 / (a.1 * a.1), 1.0 / (b.1 * b.1));
    if !(wa.is_finite() && wb.is_finite()) {
        // zero spread on one side: fall back to the plain mean
        return ((a.0 + b.0) / 2.0, a.1.max(b.1));
    }
    ((wa * a.0 + wb * b.0) / (wa + wb), (wa + wb).sqrt().recip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::RadiusMeasure;

    #[test]
    fn weighted_mean_of_equal_errors_is_midpoint() {
        let (v, se) = weighted((1.0, 0.1), (2.0, 0.1));
        assert!((v - 1.5).abs() < 1e-12);
        assert!((se - 0.1 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn small_run_orderings() {
        let m = RadiusMeasure::unit();
        let ctx = Context::new(&m, 7);
        let res = estimate_nu(&[0.0, 4.0, 8.0], 20, &ctx).unwrap();
        assert_eq!(res.records.len(), 60);
        assert_eq!(res.summary.ordering_violations, 0);
        assert_eq!(res.summary.floor_violations, 0);
        assert!(res.summary.nu_hat > 0.0);
        assert!(res.records.iter().filter(|r| r.x == 0.0).all(|r| r.tau_point == 0.0));
        assert!(res.summary.under_sampled);
    }

    #[test]
    fn budget_exhaustion_flags_the_result() {
        let m = RadiusMeasure::unit();
        let ctx = Context::new(&m, 7).with_budget(50);
        let res = estimate_nu(&[30.0], 3, &ctx).unwrap();
        assert!(res.summary.flagged);
        assert_eq!(res.summary.incomplete, 3);
    }
}
