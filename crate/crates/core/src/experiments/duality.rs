//! Point-to-plane against plane-to-point hitting times.
//!
//! `τ^{0}(H^x)` is simulated exactly from a point seed; `τ^H((x,0))` from the
//! half-plane `{x <= 0}` on a fixed strip window. The two laws agree, so a
//! two-sample KS test measures the window's truncation bias.

use std::io::Write;

use serde::Serialize;

use super::{check_reps, tag, write_rows, Context, ExperimentOutput};
use crate::error::{ExperimentError, SimError};
use crate::geometry::Point;
use crate::occupancy::{LogMode, SeedRegion};
use crate::replicas::map_replicas;
use crate::simulator::{SimConfig, Simulation, StopCondition, WindowPolicy};
use crate::stats::{ks_critical_01, ks_two_sample, mean, standard_error};

pub use super::gap::MAX_TRUNCATION_RATE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `τ^{0}(H^x)`.
    PointSeed,
    /// `τ^H((x,0))` on the strip.
    HalfPlane,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityRecord {
    pub side: Side,
    pub replica: u64,
    pub tau: f64,
    pub n_events: u64,
    pub truncated: bool,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualitySummary {
    pub experiment: &'static str,
    pub x: f64,
    pub window_a: f64,
    pub reps: usize,
    pub master_seed: u64,
    pub n_point: usize,
    pub n_half_plane: usize,
    pub mean_point: f64,
    pub se_point: f64,
    pub mean_half_plane: f64,
    pub se_half_plane: f64,
    pub ks_d: f64,
    pub ks_p_value: f64,
    pub ks_critical_01: f64,
    /// Fraction of half-plane replicas whose geodesic touched the outer window edges.
    pub truncation_rate: f64,
    pub incomplete: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityResult {
    pub records: Vec<DualityRecord>,
    pub summary: DualitySummary,
}

impl ExperimentOutput for DualityResult {
    fn name(&self) -> &'static str {
        "duality"
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

fn run_side(ctx: &Context, side: Side, x: f64, a: f64, replica: u64) -> Result<DualityRecord, ExperimentError> {
    let (seed, policy, stop, t) = match side {
        Side::PointSeed => (
            SeedRegion::origin(),
            WindowPolicy::Adaptive,
            StopCondition::HalfPlaneReached(x),
            tag::DUALITY_POINT,
        ),
        Side::HalfPlane => (
            SeedRegion::half_plane(0.0),
            WindowPolicy::half_plane_strip(x, a, ctx.measure.max_radius())?,
            StopCondition::PointCovered(Point::new(x, 0.0)),
            tag::DUALITY_PLANE,
        ),
    };
    let cfg = SimConfig {
        policy,
        ..SimConfig::default()
    }
    .with_budget(ctx.budget)
    .with_log_mode(LogMode::Frontier);
    let mut sim = Simulation::new(seed, ctx.measure, ctx.stream(t, 0, replica), cfg)?;
    let (tau, n_events, truncated, completed) = match sim.run_until(stop) {
        Ok(r) => (r.stop_time, r.n_events, r.truncated, true),
        Err(SimError::BudgetExceeded { report, .. }) => (f64::NAN, report.n_events, false, false),
        Err(e) => return Err(e.into()),
    };
    Ok(DualityRecord {
        side,
        replica,
        tau,
        n_events,
        truncated,
        completed,
    })
}

/// Compares `reps` replicas of each side at distance `x` with strip constant `a`.
pub fn duality_check(x: f64, reps: usize, a: f64, ctx: &Context) -> Result<DualityResult, ExperimentError> {
    check_reps(reps)?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(ExperimentError::Params(format!("x must be finite and >= 0, got {x}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(ExperimentError::Params(format!("window constant must be positive, got {a}")));
    }
    let mut records = Vec::with_capacity(2 * reps);
    for side in [Side::PointSeed, Side::HalfPlane] {
        if x == 0.0 {
            // the origin lies in both closed targets: both laws are the point mass at 0
            records.extend((0..reps as u64).map(|replica| DualityRecord {
                side,
                replica,
                tau: 0.0,
                n_events: 0,
                truncated: false,
                completed: true,
            }));
            continue;
        }
        for rec in map_replicas(reps as u64, |r| run_side(ctx, side, x, a, r)) {
            records.push(rec?);
        }
    }
    let times = |s: Side| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.side == s && r.completed)
            .map(|r| r.tau)
            .collect()
    };
    let (pt, hp) = (times(Side::PointSeed), times(Side::HalfPlane));
    let (ks_d, ks_p_value) = ks_two_sample(&pt, &hp);
    let truncation_rate = records
        .iter()
        .filter(|r| r.side == Side::HalfPlane && r.completed && r.truncated)
        .count() as f64
        / hp.len().max(1) as f64;
    let incomplete = records.iter().filter(|r| !r.completed).count();
    Ok(DualityResult {
        summary: DualitySummary {
            experiment: "duality",
            x,
            window_a: a,
            reps,
            master_seed: ctx.master_seed,
            n_point: pt.len(),
            n_half_plane: hp.len(),
            mean_point: mean(&pt),
            se_point: standard_error(&pt),
            mean_half_plane: mean(&hp),
            se_half_plane: standard_error(&hp),
            ks_d,
            ks_p_value,
            ks_critical_01: ks_critical_01(pt.len(), hp.len()),
            truncation_rate,
            incomplete,
            flagged: incomplete > 0 || truncation_rate > MAX_TRUNCATION_RATE,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::RadiusMeasure;

    #[test]
    fn zero_distance_is_a_point_mass() {
        let m = RadiusMeasure::unit();
        let res = duality_check(0.0, 10, 6.0, &Context::new(&m, 1)).unwrap();
        assert_eq!(res.summary.ks_d, 0.0);
        assert!(res.records.iter().all(|r| r.tau == 0.0));
    }

    #[test]
    fn small_run_produces_both_sides() {
        let m = RadiusMeasure::unit();
        let res = duality_check(5.0, 20, 6.0, &Context::new(&m, 1)).unwrap();
        assert_eq!(res.summary.n_point, 20);
        assert_eq!(res.summary.n_half_plane, 20);
        assert!(res.summary.mean_point > 0.0 && res.summary.mean_half_plane > 0.0);
    }

    #[test]
    fn narrow_window_truncates() {
        let m = RadiusMeasure::unit();
        let res = duality_check(20.0, 20, 0.3, &Context::new(&m, 1)).unwrap();
        assert!(res.summary.truncation_rate > MAX_TRUNCATION_RATE);
        assert!(res.summary.flagged);
    }
}
