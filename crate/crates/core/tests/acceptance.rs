//! Acceptance suite on the unit model. Every criterion prints one
//! `PASS name: detail` or `FAIL name: detail` line, then asserts.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use slfv_core::experiments::duality::Side;
use slfv_core::experiments::{
    duality_check, estimate_nu, exponent_fit, front_bulk_gap, records_csv, sector_survival, shape_scan, skeleton_check,
    tail_validator, BoundPoint, ExponentResult, GapMode, JumpPoint, SectorConfig, ShapeConfig, ShapeResult, TailConfig,
};
use slfv_core::{replica_stream, run_forward, Context, RadiusMeasure, SeedRegion, SimConfig, StopCondition};

const SEED: u64 = 20_240_601;
const GRID: [f64; 5] = [25.0, 50.0, 100.0, 200.0, 400.0];

fn unit() -> &'static RadiusMeasure {
    static M: OnceLock<RadiusMeasure> = OnceLock::new();
    M.get_or_init(RadiusMeasure::unit)
}

fn ctx() -> Context<'static> {
    Context::new(unit(), SEED)
}

/// Writes around the test harness's output capture so the line always shows.
fn report(name: &str, pass: bool, detail: String) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "{name}: {detail}");
}

/// Asymptotic two-sample KS threshold at α = 0.01.
fn ks_threshold(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n * m) as f64).sqrt()
}

fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let cdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    pooled.iter().map(|&t| (cdf(a, t) - cdf(b, t)).abs()).fold(0.0, f64::max)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn exponent() -> &'static ExponentResult {
    static R: OnceLock<ExponentResult> = OnceLock::new();
    R.get_or_init(|| exponent_fit(&GRID, 200, &ctx()).unwrap())
}

fn shape() -> &'static ShapeResult {
    static R: OnceLock<ShapeResult> = OnceLock::new();
    R.get_or_init(|| shape_scan(&ShapeConfig::default(), &ctx()).unwrap())
}

#[test]
fn forward_backward_equivalence() {
    let res = skeleton_check(1000, 20, 50, &ctx()).unwrap();
    let s = &res.summary;
    report(
        "forward_backward_equivalence",
        s.queries == 20_000 && s.disagreements == 0,
        format!("{} queries, {} covered, {} disagreements", s.queries, s.covered, s.disagreements),
    );
}

#[test]
fn point_seed_first_jump_law() {
    let start = Instant::now();
    let n = 10_000u64;
    let m = unit();
    let times: Vec<f64> = (0..n)
        .map(|r| {
            let (log, _) = run_forward(SeedRegion::origin(), m, replica_stream(SEED, r), StopCondition::EventCount(1), SimConfig::default()).unwrap();
            log.events[0].time
        })
        .collect();
    let elapsed = start.elapsed();
    let mean = times.iter().sum::<f64>() / n as f64;
    // Exp(π): mean 1/π, standard deviation 1/π
    let target = 1.0 / std::f64::consts::PI;
    let sigma = target / (n as f64).sqrt();
    report(
        "point_seed_first_jump_law",
        (mean - target).abs() <= 3.0 * sigma && elapsed < Duration::from_secs(10),
        format!("mean {mean:.5} vs 1/π {target:.5} (3σ = {:.5}), {:.2} s", 3.0 * sigma, elapsed.as_secs_f64()),
    );
}

#[test]
fn slow_chain_tail() {
    let start = Instant::now();
    let point = |beta| BoundPoint {
        delta: 0.3,
        eta: Some(1.0),
        x: 3.0,
        beta,
        samples: 100_000,
    };
    let cfg = TailConfig {
        slow_chain: vec![point(40.0), point(35.0)],
        hitting: vec![],
        jumps: vec![],
    };
    let res = tail_validator(&cfg, &ctx()).unwrap();
    let elapsed = start.elapsed();
    let (b40, b35) = (&res.records[0], &res.records[1]);
    // β = 40: no exceedance of βx at all
    let pass40 = b40.exceedances == 0;
    // β = 35: exp(−δηβx) plus three binomial deviations at that level
    let bound35 = (-0.3f64 * 35.0 * 3.0).exp();
    let limit35 = bound35 + 3.0 * (bound35 * (1.0 - bound35) / 100_000.0).sqrt();
    let pass35 = b35.empirical <= limit35;
    report(
        "slow_chain_tail",
        pass40 && pass35 && elapsed < Duration::from_secs(5),
        format!(
            "β=40: {} exceedances of {} (bound {:.2e}, exact tail {:.3e}); β=35: empirical {:.3e} vs limit {:.3e} (exact tail {:.3e}); {:.2} s",
            b40.exceedances,
            b40.samples,
            b40.bound,
            b40.exact,
            b35.empirical,
            limit35,
            b35.exact,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn speed_convergence() {
    let start = Instant::now();
    let res = estimate_nu(&[50.0, 100.0, 200.0], 200, &ctx()).unwrap();
    let elapsed = start.elapsed();
    // recompute the drift from the records
    let scaled = |x: f64| -> Vec<f64> {
        res.records
            .iter()
            .filter(|r| r.x == x && r.completed)
            .map(|r| r.tau_half_plane / x)
            .collect()
    };
    let (m100, se100) = mean_se(&scaled(100.0));
    let (m200, se200) = mean_se(&scaled(200.0));
    let diff = (m100 - m200).abs();
    let pooled = (se100 * se100 + se200 * se200).sqrt();
    let ordered = res.records.iter().filter(|r| r.tau_half_plane <= r.tau_point).count();
    report(
        "speed_convergence",
        diff <= 2.0 * pooled && ordered == res.records.len() && res.summary.incomplete == 0 && elapsed <= Duration::from_secs(900),
        format!(
            "τ/x: {m100:.4} at 100, {m200:.4} at 200, |diff| {diff:.4} vs 2·SE {:.4}; ordering holds on {ordered}/{}; {:.0} s",
            2.0 * pooled,
            res.records.len(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn duality() {
    let start = Instant::now();
    let res = duality_check(50.0, 500, 6.0, &ctx()).unwrap();
    let elapsed = start.elapsed();
    let side = |s: Side| -> Vec<f64> {
        res.records
            .iter()
            .filter(|r| r.completed && r.side == s)
            .map(|r| r.tau)
            .collect()
    };
    let (pt, hp) = (side(Side::PointSeed), side(Side::HalfPlane));
    let d = ks_distance(&pt, &hp);
    let crit = ks_threshold(pt.len(), hp.len());
    let trunc = res.summary.truncation_rate;
    report(
        "duality",
        pt.len() == 500 && hp.len() == 500 && d <= crit && trunc <= 0.05 && elapsed <= Duration::from_secs(600),
        format!("KS D {d:.4} vs {crit:.4}, truncation {trunc:.3}, {:.0} s", elapsed.as_secs_f64()),
    );
}

#[test]
fn wandering_exponent() {
    let res = exponent();
    let xi = res.summary.xi_hat.slope;
    let at400: Vec<f64> = res
        .records
        .iter()
        .filter(|r| r.x == 400.0 && r.completed)
        .map(|r| r.y_end.abs() / 20.0)
        .collect();
    let near = at400.iter().filter(|&&v| v < 0.05).count() as f64 / at400.len() as f64;
    report(
        "wandering_exponent",
        (0.40..=0.60).contains(&xi) && near <= 0.25 && at400.len() == 200,
        format!("xi_hat {xi:.3}, P(|Y_end| < 0.05·√400) = {near:.3}"),
    );
}

#[test]
fn front_bulk_gap_scaling() {
    let res = front_bulk_gap(&GRID, 200, &ctx(), GapMode::PointSeed).unwrap();
    let median = |x: f64| {
        let mut g: Vec<f64> = res.records.iter().filter(|r| r.x == x && r.completed).map(|r| r.gap).collect();
        g.sort_by(f64::total_cmp);
        let n = g.len();
        if n % 2 == 1 {
            g[n / 2]
        } else {
            0.5 * (g[n / 2 - 1] + g[n / 2])
        }
    };
    let ratio = median(400.0) / median(100.0);
    let negative = res.records.iter().filter(|r| r.gap < 0.0).count();
    report(
        "front_bulk_gap",
        (1.0..=3.0).contains(&ratio) && negative == 0 && res.summary.incomplete == 0,
        format!(
            "median gap {:.3} at 100, {:.3} at 400, ratio {ratio:.3}; {negative} negative gaps",
            median(100.0),
            median(400.0)
        ),
    );
}

#[test]
fn shape_trend() {
    let res = shape();
    let s = &res.summary;
    let inv = 1.0 / s.nu_hat;
    // max over rays of |R/t − 1/ν̂| per (replica, t), from the records
    let dev = |rep: u64, t: f64| {
        res.records
            .iter()
            .filter(|r| r.replica == rep && r.t == t)
            .map(|r| (r.reach / t - inv).abs())
            .fold(0.0, f64::max)
    };
    let decreased = (0..s.reps as u64).filter(|&r| dev(r, 80.0) <= dev(r, 20.0)).count();
    let frac = decreased as f64 / s.reps as f64;
    report(
        "shape_trend",
        frac >= 0.8 && s.n_dir == 16 && s.incomplete == 0,
        format!("deviation shrank from t=20 to t=80 in {decreased}/{} replicas (ν̂ = {:.4})", s.reps, s.nu_hat),
    );
}

#[test]
fn determinism() {
    let c = ctx();
    let twice = |f: &dyn Fn() -> Vec<u8>| {
        let a = f();
        !a.is_empty() && a == f()
    };
    let checks: Vec<(&str, bool)> = vec![
        ("nu", twice(&|| records_csv(&estimate_nu(&[5.0, 10.0], 8, &c).unwrap()).unwrap())),
        ("exponent", twice(&|| records_csv(&exponent_fit(&[4.0, 8.0], 8, &c).unwrap()).unwrap())),
        (
            "gap_point",
            twice(&|| records_csv(&front_bulk_gap(&[4.0, 8.0], 8, &c, GapMode::PointSeed).unwrap()).unwrap()),
        ),
        (
            "gap_window",
            twice(&|| records_csv(&front_bulk_gap(&[4.0, 8.0], 8, &c, GapMode::HalfPlaneWindow { a: 6.0 }).unwrap()).unwrap()),
        ),
        ("duality", twice(&|| records_csv(&duality_check(6.0, 8, 6.0, &c).unwrap()).unwrap())),
        (
            "shape",
            twice(&|| {
                let cfg = ShapeConfig {
                    ts: vec![2.0, 4.0],
                    n_dir: 8,
                    reps: 4,
                    nu_hat: None,
                    calibration_x: 5.0,
                    calibration_reps: 4,
                };
                records_csv(&shape_scan(&cfg, &c).unwrap()).unwrap()
            }),
        ),
        (
            "tails",
            twice(&|| {
                let cfg = TailConfig {
                    slow_chain: vec![BoundPoint {
                        delta: 0.3,
                        eta: None,
                        x: 3.0,
                        beta: 40.0,
                        samples: 100,
                    }],
                    hitting: vec![BoundPoint {
                        delta: 0.3,
                        eta: Some(1.0),
                        x: 2.0,
                        beta: 40.0,
                        samples: 8,
                    }],
                    jumps: vec![JumpPoint {
                        x: 5.0,
                        theta_over_m0: 4.0,
                        samples: 8,
                        guard: 1e-2,
                    }],
                };
                records_csv(&tail_validator(&cfg, &c).unwrap()).unwrap()
            }),
        ),
        (
            "sectors",
            twice(&|| {
                let cfg = SectorConfig {
                    t: 3.0,
                    reps: 4,
                    ..SectorConfig::default()
                };
                records_csv(&sector_survival(&cfg, &c).unwrap()).unwrap()
            }),
        ),
        ("skeleton", twice(&|| records_csv(&skeleton_check(8, 5, 20, &c).unwrap()).unwrap())),
    ];
    let differing: Vec<&str> = checks.iter().filter(|(_, same)| !same).map(|(n, _)| *n).collect();
    report(
        "determinism",
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} experiments re-ran to identical CSV bytes", checks.len())
        } else {
            format!("CSV bytes differ for {}", differing.join(", "))
        },
    );
}

// Checks below reuse the large runs above and print nothing.

#[test]
fn scaled_endpoint_law_is_stable_between_the_largest_distances() {
    let res = exponent();
    let scaled = |x: f64| -> Vec<f64> {
        res.records
            .iter()
            .filter(|r| r.x == x && r.completed)
            .map(|r| r.y_end.abs() / x.sqrt())
            .collect()
    };
    let (a, b) = (scaled(200.0), scaled(400.0));
    let d = ks_distance(&a, &b);
    assert!(d <= ks_threshold(a.len(), b.len()), "KS D {d}");
    assert_eq!(res.summary.definition_violations, 0);
}

#[test]
fn reach_is_isotropic_and_monotone() {
    let res = shape();
    for &t in &[20.0, 40.0, 80.0] {
        let ray = |k: usize| -> Vec<f64> {
            res.records
                .iter()
                .filter(|r| r.t == t && r.direction == k)
                .map(|r| r.reach)
                .collect()
        };
        // 16 rays: index 4 is θ = π/2
        let ((me, se), (mn, sn)) = (mean_se(&ray(0)), mean_se(&ray(4)));
        assert!((me - mn).abs() <= 2.0 * (se * se + sn * sn).sqrt(), "t={t}: east {me}, north {mn}");
    }
    assert_eq!(res.summary.monotonicity_violations, 0);
}
