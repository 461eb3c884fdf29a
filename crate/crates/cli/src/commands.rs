//! One function per subcommand; each returns the files to write.

use serde::Serialize;
use slfv_core::experiments::{
    duality_check, estimate_nu, exponent_fit, front_bulk_gap, records_csv, sector_survival, shape_scan, skeleton_check,
    tail_validator, GapMode, ShapeConfig,
};
use slfv_core::replicas::map_replicas;
use slfv_core::simulator::DEFAULT_WINDOW_A;
use slfv_core::{
    extract_geodesic, replica_stream, stream_id, Context, EventLog, ExperimentError, ExperimentOutput, SeedRegion, SimConfig,
    SimError, Simulation, StopCondition, StopReport, Window, WindowPolicy,
};

use crate::{CliError, Command, Settings};

const DEFAULT_XS: [f64; 5] = [25.0, 50.0, 100.0, 200.0, 400.0];
const DEFAULT_REPS: usize = 200;
const DEFAULT_DUALITY_X: f64 = 50.0;
const DEFAULT_DUALITY_REPS: usize = 500;
const DEFAULT_SIMULATE_EVENTS: u64 = 1000;
const DEFAULT_SKELETON_QUERIES: usize = 20;
const DEFAULT_SKELETON_EVENTS: u64 = 50;
const DEFAULT_SKELETON_RUNS: usize = 1000;
/// Stream tag of `simulate` replicas; experiments use 1..=12.
const SIMULATE_TAG: u16 = 0x40;

/// Files to write plus whether the result is unreliable.
pub struct Produced {
    pub files: Vec<(String, Vec<u8>)>,
    pub flagged: bool,
}

fn experiment<E: ExperimentOutput>(e: E) -> Result<Produced, CliError> {
    let mut summary = e.summary_json()?;
    summary.push('\n');
    Ok(Produced {
        files: vec![
            (format!("{}.csv", e.name()), records_csv(&e)?),
            (format!("{}_summary.json", e.name()), summary.into_bytes()),
        ],
        flagged: e.flagged(),
    })
}

pub fn execute(cmd: Command, s: &Settings) -> Result<Produced, CliError> {
    let ctx = Context::new(&s.measure, s.master_seed).with_budget(s.budget);
    let p = &s.params;
    let xs = p.xs.clone().unwrap_or_else(|| DEFAULT_XS.to_vec());
    let reps = p.reps.unwrap_or(DEFAULT_REPS);
    match cmd {
        Command::Simulate => simulate(s),
        Command::Nu => experiment(estimate_nu(&xs, reps, &ctx)?),
        Command::Exponent => experiment(exponent_fit(&xs, reps, &ctx)?),
        Command::Gap => {
            let mode = match (p.window_a, p.gap_mode) {
                (Some(a), _) => GapMode::HalfPlaneWindow { a },
                (None, Some(m)) => m,
                (None, None) => GapMode::PointSeed,
            };
            experiment(front_bulk_gap(&xs, reps, &ctx, mode)?)
        }
        Command::Duality => experiment(duality_check(
            p.x.unwrap_or(DEFAULT_DUALITY_X),
            p.reps.unwrap_or(DEFAULT_DUALITY_REPS),
            p.window_a.unwrap_or(DEFAULT_WINDOW_A),
            &ctx,
        )?),
        Command::Shape => {
            let d = ShapeConfig::default();
            let cfg = ShapeConfig {
                ts: p.ts.clone().unwrap_or(d.ts),
                n_dir: p.n_dir.unwrap_or(d.n_dir),
                reps: p.reps.unwrap_or(d.reps),
                nu_hat: p.nu_hat.or(d.nu_hat),
                calibration_x: p.calibration_x.unwrap_or(d.calibration_x),
                calibration_reps: p.calibration_reps.unwrap_or(d.calibration_reps),
            };
            experiment(shape_scan(&cfg, &ctx)?)
        }
        Command::Slowchain => {
            let mut cfg = p.tails.clone().unwrap_or_default();
            for b in cfg.slow_chain.iter_mut().chain(cfg.hitting.iter_mut()) {
                b.x = p.x.unwrap_or(b.x);
                b.samples = p.reps.unwrap_or(b.samples);
            }
            for j in &mut cfg.jumps {
                j.x = p.x.unwrap_or(j.x);
                j.samples = p.reps.unwrap_or(j.samples);
            }
            experiment(tail_validator(&cfg, &ctx)?)
        }
        Command::Sectors => {
            let mut cfg = p.sectors.unwrap_or_default();
            cfg.reps = p.reps.unwrap_or(cfg.reps);
            experiment(sector_survival(&cfg, &ctx)?)
        }
        Command::SkeletonCheck => experiment(skeleton_check(
            p.reps.unwrap_or(DEFAULT_SKELETON_RUNS),
            p.queries.unwrap_or(DEFAULT_SKELETON_QUERIES),
            p.n_events.unwrap_or(DEFAULT_SKELETON_EVENTS),
            &ctx,
        )?),
    }
}

const EVENT_HEADER: &[&str] = &["replica", "id", "time", "cx", "cy", "radius"];
const RUN_HEADER: &[&str] = &[
    "replica",
    "stop_time",
    "trigger_event_id",
    "n_events",
    "n_candidates",
    "truncated",
    "completed",
];
const GEODESIC_HEADER: &[&str] = &["replica", "step", "time", "cx", "cy", "radius", "event"];

/// CSV with a header row even when there are no records.
fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Experiment(ExperimentError::Io(e.into_error())))
}

#[derive(Serialize)]
struct EventRow {
    replica: u64,
    id: u64,
    time: f64,
    cx: f64,
    cy: f64,
    radius: f64,
}

#[derive(Serialize)]
struct RunRow {
    replica: u64,
    stop_time: f64,
    trigger_event_id: Option<u64>,
    n_events: u64,
    n_candidates: u64,
    truncated: bool,
    completed: bool,
}

#[derive(Serialize)]
struct GeodesicRow {
    replica: u64,
    step: usize,
    time: f64,
    cx: f64,
    cy: f64,
    radius: f64,
    event: Option<u64>,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    experiment: &'static str,
    master_seed: u64,
    seed_region: &'a SeedRegion,
    stop: StopCondition,
    window: Option<Window>,
    reps: usize,
    total_events: u64,
    incomplete: usize,
    flagged: bool,
}

struct Replica {
    log: EventLog,
    report: StopReport,
    completed: bool,
    geodesic: Vec<GeodesicRow>,
}

fn simulate(s: &Settings) -> Result<Produced, CliError> {
    let p = &s.params;
    let seed = s.seed_region.clone().unwrap_or_else(SeedRegion::origin);
    let stop = p.stop.unwrap_or(StopCondition::EventCount(DEFAULT_SIMULATE_EVENTS));
    let reps = p.reps.unwrap_or(1);
    let r0 = s.measure.max_radius();
    let policy = match (p.window, seed.is_compact()) {
        (Some(w), _) => {
            let w = Window::new(w.x_lo, w.x_hi, w.y_lo, w.y_hi).map_err(|e| CliError::Config(format!("$.params.window: {e}")))?;
            WindowPolicy::Fixed { window: w }
        }
        (None, true) => WindowPolicy::Adaptive,
        (None, false) => {
            let x = p.x.unwrap_or(match stop {
                StopCondition::PointCovered(z) | StopCondition::SegmentCovered(z) => z.x,
                StopCondition::HalfPlaneReached(x) => x,
                _ => DEFAULT_DUALITY_X,
            });
            WindowPolicy::half_plane_strip(x, p.window_a.unwrap_or(DEFAULT_WINDOW_A), r0)?
        }
    };
    let cfg = SimConfig {
        policy,
        ..SimConfig::default()
    }
    .with_budget(s.budget);
    let runs = map_replicas(reps as u64, |r| -> Result<Replica, ExperimentError> {
        let rng = replica_stream(s.master_seed, stream_id(SIMULATE_TAG, 0, r as u32));
        let mut sim = Simulation::new(seed.clone(), &s.measure, rng, cfg)?;
        let (report, completed) = match sim.run_until(stop) {
            Ok(rep) => (rep, true),
            Err(SimError::BudgetExceeded { report, .. }) => (report, false),
            Err(e) => return Err(e.into()),
        };
        let geodesic = match report.trigger_event_id {
            Some(id) if completed && !matches!(stop, StopCondition::EventCount(_) | StopCondition::TimeHorizon(_)) => {
                let mut g = replica_stream(s.master_seed, stream_id(SIMULATE_TAG | 0x100, 0, r as u32));
                extract_geodesic(sim.state(), id, &mut g)?
                    .links
                    .iter()
                    .enumerate()
                    .map(|(step, l)| GeodesicRow {
                        replica: r,
                        step,
                        time: l.time,
                        cx: l.center.x,
                        cy: l.center.y,
                        radius: l.radius,
                        event: l.event,
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        Ok(Replica {
            log: sim.log(),
            report,
            completed,
            geodesic,
        })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut events = Vec::new();
    let mut summary = Vec::new();
    let mut geodesic = Vec::new();
    for (r, run) in runs.iter().enumerate() {
        let replica = r as u64;
        events.extend(run.log.events.iter().map(|e| EventRow {
            replica,
            id: e.id,
            time: e.time,
            cx: e.center.x,
            cy: e.center.y,
            radius: e.radius,
        }));
        summary.push(RunRow {
            replica,
            stop_time: run.report.stop_time,
            trigger_event_id: run.report.trigger_event_id,
            n_events: run.report.n_events,
            n_candidates: run.report.n_candidates,
            truncated: run.report.truncated,
            completed: run.completed,
        });
        geodesic.extend(run.geodesic.iter());
    }
    let incomplete = runs.iter().filter(|r| !r.completed).count();
    let window = match policy {
        WindowPolicy::Fixed { window } => Some(window),
        WindowPolicy::Adaptive => None,
    };
    let flagged = incomplete > 0;
    let mut json = serde_json::to_string_pretty(&SimulateSummary {
        experiment: "simulate",
        master_seed: s.master_seed,
        seed_region: &seed,
        stop,
        window,
        reps,
        total_events: runs.iter().map(|r| r.log.events.len() as u64).sum(),
        incomplete,
        flagged,
    })
    .map_err(ExperimentError::from)?;
    json.push('\n');
    Ok(Produced {
        files: vec![
            ("events.csv".into(), csv_bytes(&events, EVENT_HEADER)?),
            ("runs.csv".into(), csv_bytes(&summary, RUN_HEADER)?),
            ("geodesic.csv".into(), csv_bytes(&geodesic, GEODESIC_HEADER)?),
            ("simulate_summary.json".into(), json.into_bytes()),
        ],
        flagged,
    })
}
