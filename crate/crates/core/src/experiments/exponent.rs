//! Transverse wandering of geodesics to `H^x` from a point seed.
//!
//! Each replica is one run with a half-plane probe at every grid point, so
//! the samples at different `x` of the same replica are correlated.

use std::io::Write;

use serde::Serialize;

use super::{check_grid, check_reps, select, tag, write_rows, Context, ExperimentOutput};
use crate::chains::{chain_stats, extract_geodesic, ChainStats};
use crate::error::{ExperimentError, SimError};
use crate::occupancy::{LogMode, SeedRegion};
use crate::replicas::map_replicas;
use crate::simulator::{SimConfig, Simulation, StopCondition, Target};
use crate::stats::{ks_critical_01, ks_two_sample, median, ols, quantile};

/// Probabilities at which the `|Y_end|/√x` quantiles are reported.
pub const QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
/// Scale below which `|Y_end|/√x` counts as "near the axis".
pub const NEAR_AXIS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentRecord {
    pub x: f64,
    pub replica: u64,
    pub tau: f64,
    pub n_jumps: usize,
    pub y_end: f64,
    pub max_abs_y: f64,
    pub strip_radius: f64,
    pub x_advance_max: f64,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentRow {
    pub x: f64,
    pub n: usize,
    pub median_abs_y_end: f64,
    pub median_max_abs_y: f64,
    pub median_jumps: f64,
    /// Quantiles of `|Y_end|/√x` at [`QUANTILES`].
    pub scaled_quantiles: Vec<f64>,
    /// Empirical `P(|Y_end| < 0.05 √x)`.
    pub near_axis_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Number of grid points in the fit.
    pub points: usize,
    /// Replicas per grid point.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsCheck {
    pub x_a: f64,
    pub x_b: f64,
    pub d: f64,
    pub p_value: f64,
    pub critical_01: f64,
    pub n_a: usize,
    pub n_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentSummary {
    pub experiment: &'static str,
    pub reps: usize,
    pub master_seed: u64,
    pub rows: Vec<ExponentRow>,
    /// Slope of log median `|Y_end|` against log x.
    pub xi_hat: Fit,
    /// Same fit for the median of `max |Y|`.
    pub max_abs_y_fit: Option<Fit>,
    /// `|Y_end|/√x` at the two largest grid points.
    pub stability: Option<KsCheck>,
    /// Replicas violating `|Y_end| <= max|Y| <= strip radius`.
    pub definition_violations: usize,
    pub incomplete: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentResult {
    pub records: Vec<ExponentRecord>,
    pub summary: ExponentSummary,
}

impl ExperimentOutput for ExponentResult {
    fn name(&self) -> &'static str {
        "exponent"
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

fn record(x: f64, replica: u64, tau: f64, s: Option<ChainStats>) -> ExponentRecord {
    let s = s.unwrap_or(ChainStats {
        n_jumps: 0,
        y_end: f64::NAN,
        max_abs_y: f64::NAN,
        strip_radius: f64::NAN,
        x_advance_max: f64::NAN,
    });
    ExponentRecord {
        x,
        replica,
        tau,
        n_jumps: s.n_jumps,
        y_end: s.y_end,
        max_abs_y: s.max_abs_y,
        strip_radius: s.strip_radius,
        x_advance_max: s.x_advance_max,
        completed: !tau.is_nan(),
    }
}

fn one_replica(ctx: &Context, xs: &[f64], replica: u64) -> Result<Vec<ExponentRecord>, ExperimentError> {
    let cfg = SimConfig::default()
        .with_budget(ctx.budget)
        .with_log_mode(LogMode::Frontier);
    let rng = ctx.stream(tag::EXPONENT, 0, replica);
    let mut sim = Simulation::new(SeedRegion::origin(), ctx.measure, rng, cfg)?;
    let probes: Vec<usize> = xs.iter().map(|&x| sim.add_probe(Target::HalfPlane { x })).collect();
    let x_max = *xs.last().expect("grid is non-empty");
    match sim.run_until(StopCondition::HalfPlaneReached(x_max)) {
        Ok(_) | Err(SimError::BudgetExceeded { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    let mut g = ctx.geodesic_rng(tag::EXPONENT, 0, replica);
    let mut out = Vec::with_capacity(xs.len());
    for (&x, &p) in xs.iter().zip(&probes) {
        let rec = match sim.probe_hit(p) {
            None => record(x, replica, f64::NAN, None),
            Some(h) => {
                let stats = match h.event {
                    Some(id) => chain_stats(&extract_geodesic(sim.state(), id, &mut g)?),
                    // met at time zero: the seed point itself
                    None => ChainStats {
                        n_jumps: 0,
                        y_end: 0.0,
                        max_abs_y: 0.0,
                        strip_radius: 0.0,
                        x_advance_max: 0.0,
                    },
                };
                record(x, replica, h.time, Some(stats))
            }
        };
        out.push(rec);
    }
    Ok(out)
}

/// Runs `reps` point-seed replicas to `H^{max x}` and fits the growth
/// exponent of the geodesic end displacement.
pub fn exponent_fit(xs: &[f64], reps: usize, ctx: &Context) -> Result<ExponentResult, ExperimentError> {
    check_grid(xs)?;
    check_reps(reps)?;
    let mut records = Vec::with_capacity(xs.len() * reps);
    for batch in map_replicas(reps as u64, |r| one_replica(ctx, xs, r)) {
        records.extend(batch?);
    }
    let summary = summarize(xs, reps, ctx.master_seed, &records)?;
    Ok(ExponentResult { records, summary })
}

/// Fit of `log median(v)` against `log x` over grid points with `x > 0`.
fn loglog_fit(xs: &[f64], medians: &[f64], samples: usize, what: &str) -> Result<Fit, ExperimentError> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(medians)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, m)| (x.ln(), m.ln()))
        .collect();
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(ExperimentError::FitUndefined(format!("median {what} is zero or missing at some x")));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (slope, intercept) =
        ols(&lx, &ly).ok_or_else(|| ExperimentError::FitUndefined("fewer than two distinct positive x".into()))?;
    Ok(Fit {
        slope,
        intercept,
        points: lx.len(),
        samples,
    })
}

fn summarize(
    xs: &[f64],
    reps: usize,
    master_seed: u64,
    records: &[ExponentRecord],
) -> Result<ExponentSummary, ExperimentError> {
    let abs_y = |x: f64| select(records, |r| r.x == x && r.completed, |r| r.y_end.abs());
    let scaled = |x: f64| abs_y(x).into_iter().map(|v| v / x.sqrt()).collect::<Vec<f64>>();
    let rows: Vec<ExponentRow> = xs
        .iter()
        .map(|&x| {
            let ay = abs_y(x);
            let my = select(records, |r| r.x == x && r.completed, |r| r.max_abs_y);
            let nj = select(records, |r| r.x == x && r.completed, |r| r.n_jumps as f64);
            let sc = scaled(x);
            ExponentRow {
                x,
                n: ay.len(),
                median_abs_y_end: median(&ay),
                median_max_abs_y: median(&my),
                median_jumps: median(&nj),
                scaled_quantiles: QUANTILES.iter().map(|&q| quantile(&sc, q)).collect(),
                near_axis_fraction: sc.iter().filter(|&&v| v < NEAR_AXIS).count() as f64 / sc.len() as f64,
            }
        })
        .collect();
    let min_n = rows.iter().map(|r| r.n).min().unwrap_or(0);
    let med: Vec<f64> = rows.iter().map(|r| r.median_abs_y_end).collect();
    let xi_hat = loglog_fit(xs, &med, min_n, "|Y_end|")?;
    let med_max: Vec<f64> = rows.iter().map(|r| r.median_max_abs_y).collect();
    let max_abs_y_fit = loglog_fit(xs, &med_max, min_n, "max |Y|").ok();
    let stability = (xs.len() >= 2 && xs[xs.len() - 2] > 0.0).then(|| {
        let (xa, xb) = (xs[xs.len() - 2], xs[xs.len() - 1]);
        let (a, b) = (scaled(xa), scaled(xb));
        let (d, p_value) = ks_two_sample(&a, &b);
        KsCheck {
            x_a: xa,
            x_b: xb,
            d,
            p_value,
            critical_01: ks_critical_01(a.len(), b.len()),
            n_a: a.len(),
            n_b: b.len(),
        }
    });
    let definition_violations = records
        .iter()
        .filter(|r| r.completed && !(r.y_end.abs() <= r.max_abs_y && r.max_abs_y <= r.strip_radius))
        .count();
    let incomplete = records.iter().filter(|r| !r.completed).count();
    Ok(ExponentSummary {
        experiment: "exponent",
        reps,
        master_seed,
        rows,
        xi_hat,
        max_abs_y_fit,
        stability,
        definition_violations,
        incomplete,
        flagged: incomplete > 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::RadiusMeasure;

    #[test]
    fn loglog_fit_recovers_power() {
        let xs = [10.0, 20.0, 40.0, 80.0];
        let med: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.5)).collect();
        let f = loglog_fit(&xs, &med, 5, "y").unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_displacement_is_undefined() {
        let xs = [0.0, 1.0, 2.0];
        let recs: Vec<ExponentRecord> = xs
            .iter()
            .map(|&x| {
                let zero = ChainStats {
                    n_jumps: 1,
                    y_end: 0.0,
                    max_abs_y: 0.0,
                    strip_radius: 1.0,
                    x_advance_max: x,
                };
                record(x, 0, 1.0, Some(zero))
            })
            .collect();
        assert!(matches!(summarize(&xs, 1, 0, &recs), Err(ExperimentError::FitUndefined(_))));
    }

    #[test]
    fn small_run_definitions_hold() {
        let m = RadiusMeasure::unit();
        let ctx = Context::new(&m, 3);
        let res = exponent_fit(&[5.0, 10.0, 20.0], 30, &ctx).unwrap();
        assert_eq!(res.records.len(), 90);
        assert_eq!(res.summary.definition_violations, 0);
        assert!(res.summary.xi_hat.slope.is_finite());
        // hitting times along one replica are ordered in x
        for r in 0..30 {
            let t: Vec<f64> = res.records.iter().filter(|e| e.replica == r).map(|e| e.tau).collect();
            assert!(t.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
