//! Forward simulation of the growth process by thinning.
//!
//! Candidates are drawn from a rectangle that contains every centre whose
//! ball could meet the occupied set: the bounding box inflated by `R0` for
//! compact seeds, or the fixed window of a restricted run. A candidate is
//! accepted iff its ball meets the current state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chains::{chain_stats, extract_geodesic};
use crate::error::SimError;
use crate::events::{next_candidate, Event, EventLog, ReplicaRng};
use crate::geometry::{Overlap, Point, Window};
use crate::measure::RadiusMeasure;
use crate::occupancy::{LogMode, OccupiedState, RayReach, SeedRegion, SegmentTracker};
use crate::replicas::map_replicas;
use crate::stats;

pub const DEFAULT_BUDGET: u64 = 1_000_000_000;
/// Default strip half-width factor of restricted half-plane runs.
pub const DEFAULT_WINDOW_A: f64 = 6.0;
pub const MAX_PARENT_TRIALS: u32 = 100_000;
/// Direct proposals from the new ball before switching to overlap sampling.
const QUICK_PARENT_TRIALS: u32 = 64;

/// Fixed auxiliary stream for the geodesic behind the truncation flag, so the
/// flag never perturbs the replica stream.
const TRUNCATION_STREAM_SEED: u64 = 0x7472_756e_6361_7465;

/// A set the process may hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// The occupied set contains `z`.
    Point { z: Point },
    /// The occupied set meets `{x' >= x}`.
    HalfPlane { x: f64 },
    /// The whole segment from the anchor to `z` is occupied.
    Segment { z: Point },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    PointCovered(Point),
    HalfPlaneReached(f64),
    SegmentCovered(Point),
    TimeHorizon(f64),
    EventCount(u64),
}

impl StopCondition {
    fn target(&self) -> Option<Target> {
        match *self {
            StopCondition::PointCovered(z) => Some(Target::Point { z }),
            StopCondition::HalfPlaneReached(x) => Some(Target::HalfPlane { x }),
            StopCondition::SegmentCovered(z) => Some(Target::Segment { z }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub time: f64,
    /// `None` when the target was already met by the initial state.
    pub event: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopReport {
    pub stop_time: f64,
    pub trigger_event_id: Option<u64>,
    pub n_events: u64,
    pub n_candidates: u64,
    /// Restricted run whose hitting geodesic touched the window's outer edges.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowPolicy {
    /// Bounding box inflated by `R0` after every acceptance (compact seeds).
    Adaptive,
    /// Restricted process on a fixed window.
    Fixed { window: Window },
}

impl WindowPolicy {
    /// Default window for a half-plane seed `{x <= 0}` and targets at distance `x`:
    /// `[-2 R0, x + h] × [-A √x, A √x]` with `h = max(A √x, 2 R0)`, so the
    /// strip runs past the target by its half-width.
    pub fn half_plane_strip(x: f64, a: f64, r0: f64) -> Result<Self, SimError> {
        let half = a * x.max(0.0).sqrt();
        let window = Window::new(-2.0 * r0, x + half.max(2.0 * r0), -half, half)?;
        Ok(WindowPolicy::Fixed { window })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub policy: WindowPolicy,
    pub budget: u64,
    /// Start of the segments of segment targets.
    pub anchor: Point,
    pub log_mode: LogMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            policy: WindowPolicy::Adaptive,
            budget: DEFAULT_BUDGET,
            anchor: Point::ORIGIN,
            log_mode: LogMode::Full,
        }
    }
}

impl SimConfig {
    pub fn fixed(window: Window) -> Self {
        SimConfig {
            policy: WindowPolicy::Fixed { window },
            ..Default::default()
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_log_mode(mut self, mode: LogMode) -> Self {
        self.log_mode = mode;
        self
    }
}

/// How the seed is split into two types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    /// Type 0 for `x < 0`.
    LeftRight,
    /// Type 0 for `y < 0`.
    UpperLower,
    /// `n` equal angular sectors, alternating types.
    Sectors { n: u32 },
}

impl SplitRule {
    pub fn type_at(&self, p: Point) -> u8 {
        match *self {
            SplitRule::LeftRight => u8::from(p.x >= 0.0),
            SplitRule::UpperLower => u8::from(p.y >= 0.0),
            SplitRule::Sectors { n } => {
                let theta = p.y.atan2(p.x).rem_euclid(std::f64::consts::TAU);
                let k = ((theta / std::f64::consts::TAU) * f64::from(n.max(1))) as u32;
                (k.min(n.max(1) - 1) % 2) as u8
            }
        }
    }
}

/// Incremental evaluation of one target.
#[derive(Debug, Clone)]
enum Tracker {
    Point(Point),
    HalfPlane(f64),
    Segment(Box<SegmentTracker>),
}

impl Tracker {
    fn new(target: Target, state: &OccupiedState, anchor: Point) -> Self {
        match target {
            Target::Point { z } => Tracker::Point(z),
            Target::HalfPlane { x } => Tracker::HalfPlane(x),
            Target::Segment { z } => Tracker::Segment(Box::new(SegmentTracker::new(state, anchor, z))),
        }
    }

    fn met_by_state(&self, state: &OccupiedState) -> bool {
        match self {
            Tracker::Point(z) => state.covers(*z),
            Tracker::HalfPlane(x) => state.max_x() >= *x,
            Tracker::Segment(s) => s.covered(),
        }
    }

    /// Update after a ball that changed the state.
    fn met_after(&mut self, state: &OccupiedState, e: &Event) -> bool {
        match self {
            Tracker::Point(z) => e.covers(*z) && state.clip().is_none_or(|c| c.contains(*z)),
            Tracker::HalfPlane(x) => state.max_x() >= *x,
            Tracker::Segment(s) => {
                s.add_ball(e.center, e.radius);
                s.covered()
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Probe {
    tracker: Tracker,
    hit: Option<Hit>,
}

/// A resumable forward run.
#[derive(Debug, Clone)]
pub struct Simulation<'m> {
    measure: &'m RadiusMeasure,
    rng: ReplicaRng,
    state: OccupiedState,
    policy: WindowPolicy,
    window: Window,
    budget: u64,
    anchor: Point,
    candidates: u64,
    clock: f64,
    pending: Option<Event>,
    probes: Vec<Probe>,
    reach: Option<RayReach>,
    coloring: Option<(SplitRule, Vec<u8>)>,
}

impl<'m> Simulation<'m> {
    pub fn new(seed: SeedRegion, measure: &'m RadiusMeasure, rng: ReplicaRng, cfg: SimConfig) -> Result<Self, SimError> {
        let r0 = measure.max_radius();
        let (state, window) = match cfg.policy {
            WindowPolicy::Adaptive => {
                if !seed.is_compact() {
                    return Err(SimError::UnboundedSeed);
                }
                let state = OccupiedState::new(seed, r0)?;
                let window = state
                    .inflated_bbox(r0)
                    .ok_or_else(|| SimError::Setup("seed region is empty".into()))?;
                (state, window)
            }
            WindowPolicy::Fixed { window } => (OccupiedState::restricted(seed, r0, window)?, window),
        };
        Ok(Simulation {
            measure,
            rng,
            state: state.with_log_mode(cfg.log_mode),
            policy: cfg.policy,
            window,
            budget: cfg.budget,
            anchor: cfg.anchor,
            candidates: 0,
            clock: 0.0,
            pending: None,
            probes: Vec::new(),
            reach: None,
            coloring: None,
        })
    }

    /// Colours every accepted event by the type of a uniformly chosen parent
    /// point. Requires a full log.
    pub fn with_two_type(mut self, rule: SplitRule) -> Result<Self, SimError> {
        if self.state.log_mode() != LogMode::Full {
            return Err(SimError::Setup("two-type runs need the full event log".into()));
        }
        if !self.state.events().is_empty() {
            return Err(SimError::Setup("two-type colouring must start with the run".into()));
        }
        self.coloring = Some((rule, Vec::new()));
        Ok(self)
    }

    /// Records the first time `target` is met; returns the probe index.
    pub fn add_probe(&mut self, target: Target) -> usize {
        let tracker = Tracker::new(target, &self.state, self.anchor);
        let hit = tracker.met_by_state(&self.state).then_some(Hit {
            time: self.clock,
            event: None,
        });
        self.probes.push(Probe { tracker, hit });
        self.probes.len() - 1
    }

    pub fn probe_hit(&self, probe: usize) -> Option<Hit> {
        self.probes.get(probe).and_then(|p| p.hit)
    }

    /// Tracks the farthest covered distance along `n_dir` rays from `anchor`.
    pub fn track_reach(&mut self, anchor: Point, n_dir: usize) {
        self.reach = Some(RayReach::new(&self.state, anchor, n_dir));
    }

    pub fn reach(&self) -> Option<&RayReach> {
        self.reach.as_ref()
    }

    pub fn state(&self) -> &OccupiedState {
        &self.state
    }

    /// Type of each logged event, when colouring is on.
    pub fn types(&self) -> Option<&[u8]> {
        self.coloring.as_ref().map(|(_, t)| t.as_slice())
    }

    pub fn split_rule(&self) -> Option<SplitRule> {
        self.coloring.as_ref().map(|(r, _)| *r)
    }

    pub fn time(&self) -> f64 {
        self.clock
    }

    pub fn candidates(&self) -> u64 {
        self.candidates
    }

    pub fn log(&self) -> EventLog {
        EventLog {
            events: self.state.events().to_vec(),
            candidate_count: self.candidates,
            window: match self.policy {
                WindowPolicy::Fixed { window } => Some(window),
                WindowPolicy::Adaptive => None,
            },
            master_seed: None,
            replica_id: None,
        }
    }

    fn report(&self, stop_time: f64, trigger: Option<u64>) -> StopReport {
        StopReport {
            stop_time,
            trigger_event_id: trigger,
            n_events: self.state.accepted(),
            n_candidates: self.candidates,
            truncated: trigger.is_some_and(|id| self.geodesic_truncated(id)),
        }
    }

    /// For restricted runs: whether a geodesic to `trigger` touches the
    /// window's top, bottom or right edge.
    fn geodesic_truncated(&self, trigger: u64) -> bool {
        let WindowPolicy::Fixed { window } = self.policy else {
            return false;
        };
        let mut aux = ChaCha8Rng::seed_from_u64(TRUNCATION_STREAM_SEED);
        match extract_geodesic(&self.state, trigger, &mut aux) {
            Ok(chain) => chain.links.iter().filter(|l| l.event.is_some()).any(|l| {
                l.center.y + l.radius >= window.y_hi
                    || l.center.y - l.radius <= window.y_lo
                    || l.center.x + l.radius >= window.x_hi
            }),
            Err(_) => true,
        }
    }

    fn sample_parent_type(&mut self, e: &Event) -> Result<u8, SimError> {
        if self.coloring.is_none() {
            return Ok(0);
        }
        let p = match self.propose_parent(e) {
            Some(p) => p,
            None => self.overlap_parent(e)?,
        };
        let Some((rule, types)) = &self.coloring else { return Ok(0) };
        Ok(match self.state.latest_covering(p) {
            Some(i) => types[i],
            None => rule.type_at(p),
        })
    }

    /// Uniform proposals from the new ball; `Some` as soon as one lands in
    /// the occupied set.
    fn propose_parent(&mut self, e: &Event) -> Option<Point> {
        for _ in 0..QUICK_PARENT_TRIALS {
            let (u, v): (f64, f64) = (self.rng.random(), self.rng.random());
            let (dx, dy) = (2.0 * u - 1.0, 2.0 * v - 1.0);
            if dx * dx + dy * dy > 1.0 {
                continue;
            }
            let p = Point::new(e.center.x + e.radius * dx, e.center.y + e.radius * dy);
            if self.state.covers(p) {
                return Some(p);
            }
        }
        None
    }

    /// Uniform point of the overlap of the new ball with the occupied set,
    /// for thin overlaps: pick a part in proportion to its overlap area, draw
    /// uniformly from it, keep the point with probability one over the
    /// number of parts containing it.
    fn overlap_parent(&mut self, e: &Event) -> Result<Point, SimError> {
        let degenerate = SimError::DegenerateIntersection {
            id: e.id,
            trials: MAX_PARENT_TRIALS,
        };
        let mut parts = Vec::new();
        self.state.seed().area_parts(&mut parts);
        let before = self.state.events().len();
        for i in self.state.earlier_intersecting(e.center, e.radius, before) {
            let b = &self.state.events()[i];
            parts.push(Overlap::Disc {
                center: b.center,
                radius: b.radius,
            });
        }
        let areas: Vec<f64> = parts.iter().map(|o| o.area_with_ball(e.center, e.radius)).collect();
        let total: f64 = areas.iter().sum();
        if !(total > 0.0) {
            return Err(degenerate);
        }
        let clip = self.state.clip().copied();
        for _ in 0..MAX_PARENT_TRIALS {
            let mut pick = total * self.rng.random::<f64>();
            let j = areas
                .iter()
                .position(|&a| {
                    pick -= a;
                    pick < 0.0
                })
                .unwrap_or(areas.len() - 1);
            let Some(p) = parts[j].sample_with_ball(e.center, e.radius, &mut self.rng, MAX_PARENT_TRIALS) else {
                continue;
            };
            if clip.is_some_and(|w| !w.contains(p)) {
                continue;
            }
            let mult = parts.iter().filter(|o| o.contains(p)).count();
            if self.rng.random::<f64>() * mult as f64 <= 1.0 {
                return Ok(p);
            }
        }
        Err(degenerate)
    }

    fn budget_error(&self) -> SimError {
        let mut log = self.log();
        log.candidate_count = self.candidates;
        SimError::BudgetExceeded {
            budget: self.budget,
            log: Box::new(log),
            report: self.report(self.clock, None),
        }
    }

    /// Advances the run until `stop` holds (first-satisfied semantics).
    pub fn run_until(&mut self, stop: StopCondition) -> Result<StopReport, SimError> {
        let mut tracker = stop.target().map(|t| Tracker::new(t, &self.state, self.anchor));
        let met_now = match (&tracker, stop) {
            (Some(t), _) => t.met_by_state(&self.state),
            (None, StopCondition::EventCount(n)) => self.state.accepted() >= n,
            (None, StopCondition::TimeHorizon(t)) => self.clock >= t,
            _ => false,
        };
        if met_now {
            if let StopCondition::TimeHorizon(t) = stop {
                self.clock = self.clock.max(t);
            }
            return Ok(self.report(self.clock, None));
        }
        let r0 = self.measure.max_radius();
        loop {
            let cand = match self.pending.take() {
                Some(c) => c,
                None => {
                    if self.candidates >= self.budget {
                        return Err(self.budget_error());
                    }
                    self.candidates += 1;
                    next_candidate(&mut self.rng, &self.window, self.measure, self.clock)?
                }
            };
            if let StopCondition::TimeHorizon(t) = stop {
                if cand.time > t {
                    self.pending = Some(cand);
                    self.clock = t;
                    return Ok(self.report(t, None));
                }
            }
            self.clock = cand.time;
            if !self.state.intersects(cand.center, cand.radius) {
                continue;
            }
            let e = Event { id: self.state.accepted(), ..cand };
            let ty = self.sample_parent_type(&e)?;
            let changed = self.state.insert_accepted(e);
            if let Some((_, types)) = &mut self.coloring {
                types.push(ty);
            }
            if changed {
                if self.policy == WindowPolicy::Adaptive {
                    self.window = self.state.inflated_bbox(r0).expect("state holds a ball");
                }
                if let Some(reach) = &mut self.reach {
                    reach.add_ball(self.state.events().len() - 1, e.center, e.radius);
                }
                for p in &mut self.probes {
                    if p.hit.is_none() && p.tracker.met_after(&self.state, &e) {
                        p.hit = Some(Hit { time: e.time, event: Some(e.id) });
                    }
                }
            }
            let done = match (&mut tracker, stop) {
                (Some(t), _) => changed && t.met_after(&self.state, &e),
                (None, StopCondition::EventCount(n)) => self.state.accepted() >= n,
                _ => false,
            };
            if done {
                return Ok(self.report(e.time, Some(e.id)));
            }
        }
    }
}

/// Runs one replica to `stop` and returns its log and report.
pub fn run_forward(
    seed: SeedRegion,
    m: &RadiusMeasure,
    rng: ReplicaRng,
    stop: StopCondition,
    cfg: SimConfig,
) -> Result<(EventLog, StopReport), SimError> {
    let mut sim = Simulation::new(seed, m, rng, cfg)?;
    let report = sim.run_until(stop)?;
    Ok((sim.log(), report))
}

/// First time the run from `seed` meets `target`.
pub fn hitting_time(
    seed: SeedRegion,
    m: &RadiusMeasure,
    rng: ReplicaRng,
    target: Target,
    cfg: SimConfig,
) -> Result<f64, SimError> {
    let stop = match target {
        Target::Point { z } => StopCondition::PointCovered(z),
        Target::HalfPlane { x } => StopCondition::HalfPlaneReached(x),
        Target::Segment { z } => StopCondition::SegmentCovered(z),
    };
    let mut sim = Simulation::new(seed, m, rng, cfg.with_log_mode(LogMode::Frontier))?;
    Ok(sim.run_until(stop)?.stop_time)
}

/// Feeds a fixed candidate list, in time order, through the acceptance rule
/// of the unrestricted process. Accepted events keep their scripted ids.
/// The report is `None` when the list ends before `stop` holds.
pub fn run_scripted(
    seed: SeedRegion,
    m: &RadiusMeasure,
    candidates: &[Event],
    stop: StopCondition,
) -> Result<(EventLog, Option<StopReport>), SimError> {
    let mut state = OccupiedState::new(seed, m.max_radius())?;
    let mut tracker = stop.target().map(|t| Tracker::new(t, &state, Point::ORIGIN));
    let report = |state: &OccupiedState, time: f64, trigger: Option<u64>, seen: usize| StopReport {
        stop_time: time,
        trigger_event_id: trigger,
        n_events: state.accepted(),
        n_candidates: seen as u64,
        truncated: false,
    };
    let log = |state: &OccupiedState, seen: usize| EventLog {
        candidate_count: seen as u64,
        ..EventLog::from_events(state.events().to_vec())
    };
    let met_now = match (&tracker, stop) {
        (Some(t), _) => t.met_by_state(&state),
        (None, StopCondition::EventCount(n)) => n == 0,
        (None, StopCondition::TimeHorizon(t)) => t <= 0.0,
        _ => false,
    };
    if met_now {
        return Ok((log(&state, 0), Some(report(&state, 0.0, None, 0))));
    }
    for (k, e) in candidates.iter().enumerate() {
        if let StopCondition::TimeHorizon(t) = stop {
            if e.time > t {
                return Ok((log(&state, k), Some(report(&state, t, None, k))));
            }
        }
        if !state.intersects(e.center, e.radius) {
            continue;
        }
        state.insert(*e)?;
        let done = match (&mut tracker, stop) {
            (Some(t), _) => t.met_after(&state, e),
            (None, StopCondition::EventCount(n)) => state.accepted() >= n,
            _ => false,
        };
        if done {
            return Ok((log(&state, k + 1), Some(report(&state, e.time, Some(e.id), k + 1))));
        }
    }
    Ok((log(&state, candidates.len()), None))
}

#[derive(Debug, Clone)]
pub struct TwoTypeRun {
    pub log: EventLog,
    /// Type of `log.events[i]`.
    pub types: Vec<u8>,
    pub report: StopReport,
    /// Type of the front along each of the tracked rays.
    pub front_types: Vec<u8>,
}

/// Two-type run with `n_dir` rays from the origin used to read the front.
pub fn run_two_type(
    seed: SeedRegion,
    rule: SplitRule,
    m: &RadiusMeasure,
    rng: ReplicaRng,
    stop: StopCondition,
    cfg: SimConfig,
    n_dir: usize,
) -> Result<TwoTypeRun, SimError> {
    let mut sim = Simulation::new(seed, m, rng, cfg.with_log_mode(LogMode::Full))?.with_two_type(rule)?;
    sim.track_reach(Point::ORIGIN, n_dir);
    let report = sim.run_until(stop)?;
    let types = sim.types().unwrap_or_default().to_vec();
    let reach = sim.reach().expect("reach tracked");
    let front_types = (0..n_dir)
        .map(|k| match reach.frontier_events()[k] {
            Some(i) => types[i],
            None => rule.type_at(reach.frontier_point(k)),
        })
        .collect();
    Ok(TwoTypeRun {
        log: sim.log(),
        types,
        report,
        front_types,
    })
}

/// One member of a coupled run.
#[derive(Debug, Clone)]
struct Member {
    state: OccupiedState,
    policy: WindowPolicy,
    stop: StopCondition,
    tracker: Option<Tracker>,
    report: Option<StopReport>,
}

/// Several processes driven by one candidate stream, e.g. restricted runs on
/// nested windows. Candidates are drawn from the union of the members'
/// windows, so each member sees an exact realisation of its own process.
pub fn run_coupled(
    seed: &SeedRegion,
    m: &RadiusMeasure,
    mut rng: ReplicaRng,
    members: &[(WindowPolicy, StopCondition)],
    budget: u64,
) -> Result<Vec<(EventLog, StopReport)>, SimError> {
    let r0 = m.max_radius();
    let mut ms = members
        .iter()
        .map(|&(policy, stop)| {
            let state = match policy {
                WindowPolicy::Adaptive if !seed.is_compact() => return Err(SimError::UnboundedSeed),
                WindowPolicy::Adaptive => OccupiedState::new(seed.clone(), r0)?,
                WindowPolicy::Fixed { window } => OccupiedState::restricted(seed.clone(), r0, window)?,
            };
            let tracker = stop.target().map(|t| Tracker::new(t, &state, Point::ORIGIN));
            let report = match (&tracker, stop) {
                (Some(t), _) if t.met_by_state(&state) => Some(0.0),
                (None, StopCondition::EventCount(0)) => Some(0.0),
                (None, StopCondition::TimeHorizon(t)) if t <= 0.0 => Some(0.0),
                _ => None,
            }
            .map(|t| StopReport {
                stop_time: t,
                trigger_event_id: None,
                n_events: 0,
                n_candidates: 0,
                truncated: false,
            });
            Ok(Member {
                state,
                policy,
                stop,
                tracker,
                report,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let window_of = |mb: &Member| match mb.policy {
        WindowPolicy::Adaptive => mb.state.inflated_bbox(r0),
        WindowPolicy::Fixed { window } => Some(window),
    };
    let mut candidates = 0u64;
    let mut clock = 0.0;
    while ms.iter().any(|mb| mb.report.is_none()) {
        let window = ms
            .iter()
            .filter(|mb| mb.report.is_none())
            .filter_map(window_of)
            .reduce(|a, b| a.union(&b))
            .ok_or_else(|| SimError::Setup("coupled run has no candidate window".into()))?;
        // draw until some member accepts, so the union window stays current
        loop {
            if candidates >= budget {
                let mb = &ms[ms.iter().position(|mb| mb.report.is_none()).expect("unfinished member")];
                return Err(SimError::BudgetExceeded {
                    budget,
                    log: Box::new(EventLog {
                        events: mb.state.events().to_vec(),
                        candidate_count: candidates,
                        ..Default::default()
                    }),
                    report: StopReport {
                        stop_time: clock,
                        trigger_event_id: None,
                        n_events: mb.state.accepted(),
                        n_candidates: candidates,
                        truncated: false,
                    },
                });
            }
            candidates += 1;
            let cand = next_candidate(&mut rng, &window, m, clock)?;
            clock = cand.time;
            let mut any = false;
            for mb in ms.iter_mut().filter(|mb| mb.report.is_none()) {
                if let StopCondition::TimeHorizon(t) = mb.stop {
                    if cand.time > t {
                        mb.report = Some(StopReport {
                            stop_time: t,
                            trigger_event_id: None,
                            n_events: mb.state.accepted(),
                            n_candidates: candidates - 1,
                            truncated: false,
                        });
                        any = true;
                        continue;
                    }
                }
                if let WindowPolicy::Fixed { window } = mb.policy {
                    if !window.contains(cand.center) {
                        continue;
                    }
                }
                if !mb.state.intersects(cand.center, cand.radius) {
                    continue;
                }
                any = true;
                let e = Event { id: mb.state.accepted(), ..cand };
                let changed = mb.state.insert_accepted(e);
                let done = match (&mut mb.tracker, mb.stop) {
                    (Some(t), _) => changed && t.met_after(&mb.state, &e),
                    (None, StopCondition::EventCount(n)) => mb.state.accepted() >= n,
                    _ => false,
                };
                if done {
                    mb.report = Some(StopReport {
                        stop_time: e.time,
                        trigger_event_id: Some(e.id),
                        n_events: mb.state.accepted(),
                        n_candidates: candidates,
                        truncated: false,
                    });
                }
            }
            if any {
                break;
            }
        }
    }
    Ok(ms
        .into_iter()
        .map(|mb| {
            let window = match mb.policy {
                WindowPolicy::Fixed { window } => Some(window),
                WindowPolicy::Adaptive => None,
            };
            let log = EventLog {
                events: mb.state.into_events(),
                candidate_count: candidates,
                window,
                ..Default::default()
            };
            (log, mb.report.expect("all members finished"))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub window: Window,
    pub mean_tau: f64,
    pub se_tau: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowConvergence {
    pub x: f64,
    pub rows: Vec<WindowRow>,
    /// Mean difference between the two largest windows.
    pub top_difference: f64,
    /// Standard error of that paired difference.
    pub top_difference_se: f64,
    /// Replicas on which a larger window hit later than a smaller one.
    pub monotonicity_violations: usize,
}

/// Half-plane seed, target `(x, 0)`, one coupled replica per stream over
/// increasing windows.
pub fn window_convergence(
    x: f64,
    windows: &[Window],
    reps: usize,
    m: &RadiusMeasure,
    master_seed: u64,
    budget: u64,
) -> Result<WindowConvergence, SimError> {
    if windows.is_empty() {
        return Err(SimError::Setup("no windows given".into()));
    }
    let members: Vec<_> = windows
        .iter()
        .map(|&w| (WindowPolicy::Fixed { window: w }, StopCondition::PointCovered(Point::new(x, 0.0))))
        .collect();
    let seed = SeedRegion::half_plane(0.0);
    let runs = map_replicas(reps as u64, |r| {
        run_coupled(&seed, m, crate::events::replica_stream(master_seed, r), &members, budget)
            .map(|v| v.into_iter().map(|(_, rep)| rep.stop_time).collect::<Vec<f64>>())
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let rows = windows
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let taus: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            WindowRow {
                window: w,
                mean_tau: stats::mean(&taus),
                se_tau: stats::standard_error(&taus),
                reps,
            }
        })
        .collect();
    let k = windows.len();
    let (top_difference, top_difference_se) = if k >= 2 {
        let diffs: Vec<f64> = runs.iter().map(|r| r[k - 2] - r[k - 1]).collect();
        (stats::mean(&diffs), stats::standard_error(&diffs))
    } else {
        (0.0, 0.0)
    };
    let monotonicity_violations = runs
        .iter()
        .filter(|r| r.windows(2).any(|p| p[1] > p[0]))
        .count();
    Ok(WindowConvergence {
        x,
        rows,
        top_difference,
        top_difference_se,
        monotonicity_violations,
    })
}

/// Jump count of a geodesic to the given trigger, for quick checks.
pub fn geodesic_jumps<R: Rng + ?Sized>(state: &OccupiedState, trigger: u64, rng: &mut R) -> Option<usize> {
    extract_geodesic(state, trigger, rng).ok().map(|c| chain_stats(&c).n_jumps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::replica_stream;

    #[test]
    fn split_rules() {
        assert_eq!(SplitRule::LeftRight.type_at(Point::new(-1.0, 0.0)), 0);
        assert_eq!(SplitRule::LeftRight.type_at(Point::new(1.0, 0.0)), 1);
        assert_eq!(SplitRule::UpperLower.type_at(Point::new(0.0, -1.0)), 0);
        let s = SplitRule::Sectors { n: 4 };
        assert_eq!(s.type_at(Point::new(1.0, 0.1)), 0);
        assert_eq!(s.type_at(Point::new(-0.1, 1.0)), 1);
        assert_eq!(s.type_at(Point::new(-1.0, -0.1)), 0);
        assert_eq!(s.type_at(Point::new(0.1, -1.0)), 1);
    }

    #[test]
    fn strip_window_extends_past_the_target() {
        let WindowPolicy::Fixed { window } = WindowPolicy::half_plane_strip(16.0, 6.0, 1.0).unwrap() else {
            panic!("strip is a fixed window")
        };
        assert_eq!(window, Window::new(-2.0, 40.0, -24.0, 24.0).unwrap());
        let WindowPolicy::Fixed { window } = WindowPolicy::half_plane_strip(1.0, 0.5, 1.0).unwrap() else {
            panic!("strip is a fixed window")
        };
        assert_eq!((window.x_lo, window.x_hi), (-2.0, 3.0));
    }

    #[test]
    fn already_met_targets_stop_at_zero() {
        let m = RadiusMeasure::unit();
        let t = hitting_time(
            SeedRegion::origin(),
            &m,
            replica_stream(1, 0),
            Target::HalfPlane { x: 0.0 },
            SimConfig::default(),
        )
        .unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn half_plane_seed_needs_fixed_window() {
        let m = RadiusMeasure::unit();
        let err = Simulation::new(SeedRegion::half_plane(0.0), &m, replica_stream(1, 0), SimConfig::default());
        assert!(matches!(err, Err(SimError::UnboundedSeed)));
    }

    #[test]
    fn hitting_half_plane_before_point() {
        let m = RadiusMeasure::unit();
        for r in 0..20 {
            let mut sim = Simulation::new(SeedRegion::origin(), &m, replica_stream(3, r), SimConfig::default()).unwrap();
            let hp = sim.add_probe(Target::HalfPlane { x: 10.0 });
            let rep = sim.run_until(StopCondition::PointCovered(Point::new(10.0, 0.0))).unwrap();
            assert!(sim.probe_hit(hp).unwrap().time <= rep.stop_time);
            assert!(rep.n_events >= 5);
        }
    }

    #[test]
    fn per_event_advance_bound() {
        let m = RadiusMeasure::unit();
        let mut sim = Simulation::new(SeedRegion::origin(), &m, replica_stream(4, 0), SimConfig::default()).unwrap();
        let mut last = 0.0;
        for n in 1..300 {
            sim.run_until(StopCondition::EventCount(n)).unwrap();
            let now = sim.state().max_x();
            assert!(now - last <= 2.0 + 1e-12);
            last = now;
        }
    }

    #[test]
    fn time_horizon_resumes_with_pending_candidate() {
        let m = RadiusMeasure::unit();
        let mut a = Simulation::new(SeedRegion::origin(), &m, replica_stream(9, 0), SimConfig::default()).unwrap();
        a.run_until(StopCondition::TimeHorizon(2.0)).unwrap();
        a.run_until(StopCondition::TimeHorizon(4.0)).unwrap();
        let mut b = Simulation::new(SeedRegion::origin(), &m, replica_stream(9, 0), SimConfig::default()).unwrap();
        b.run_until(StopCondition::TimeHorizon(4.0)).unwrap();
        assert_eq!(a.state().events(), b.state().events());
    }

    #[test]
    fn frontier_log_keeps_hitting_times() {
        let m = RadiusMeasure::unit();
        for r in 0..5 {
            let z = Point::new(15.0, 0.0);
            let (full, rf) = run_forward(SeedRegion::origin(), &m, replica_stream(6, r), StopCondition::SegmentCovered(z), SimConfig::default()).unwrap();
            let cfg = SimConfig::default().with_log_mode(LogMode::Frontier);
            let (lean, rl) = run_forward(SeedRegion::origin(), &m, replica_stream(6, r), StopCondition::SegmentCovered(z), cfg).unwrap();
            assert_eq!(rf, rl);
            assert!(lean.len() <= full.len());
            let kept: Vec<_> = lean.events.iter().map(|e| full.get(e.id).copied()).collect();
            assert!(kept.iter().zip(&lean.events).all(|(a, b)| a.as_ref() == Some(b)));
        }
    }

    #[test]
    fn budget_exhaustion_returns_partial_log() {
        let m = RadiusMeasure::unit();
        let cfg = SimConfig::default().with_budget(1000);
        let err = run_forward(SeedRegion::origin(), &m, replica_stream(1, 0), StopCondition::HalfPlaneReached(1e6), cfg)
            .unwrap_err();
        match err {
            SimError::BudgetExceeded { budget, log, report } => {
                assert_eq!(budget, 1000);
                assert_eq!(log.candidate_count, 1000);
                assert_eq!(report.n_events as usize, log.len());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_window_exhausts_budget() {
        let m = RadiusMeasure::unit();
        let w = Window::new(-2.0, 3.0, -3.0, 3.0).unwrap();
        let r = window_convergence(10.0, &[w], 2, &m, 1, 100_000);
        assert!(matches!(r, Err(SimError::BudgetExceeded { .. })));
    }

    #[test]
    fn two_type_point_seed_is_degenerate() {
        let m = RadiusMeasure::unit();
        let r = run_two_type(
            SeedRegion::origin(),
            SplitRule::LeftRight,
            &m,
            replica_stream(1, 0),
            StopCondition::EventCount(1),
            SimConfig::default(),
            8,
        );
        assert!(matches!(r, Err(SimError::DegenerateIntersection { .. })));
    }

    #[test]
    fn overlap_parent_is_uniform_on_thin_overlaps() {
        // ball grazing a disk seed and one earlier ball: compare with brute rejection
        let m = RadiusMeasure::unit();
        let seed = SeedRegion::disk(Point::ORIGIN, 5.0);
        let mut sim = Simulation::new(seed, &m, replica_stream(3, 0), SimConfig::default())
            .unwrap()
            .with_two_type(SplitRule::LeftRight)
            .unwrap();
        sim.state.insert_accepted(Event::new(0, 0.5, Point::new(5.5, 1.2), 0.6));
        sim.coloring.as_mut().unwrap().1.push(1);
        let e = Event::new(1, 1.0, Point::new(5.95, 0.0), 1.0);
        let n = 20_000;
        let mut fast = Vec::with_capacity(n);
        for _ in 0..n {
            fast.push(sim.overlap_parent(&e).unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut slow = Vec::with_capacity(n);
        while slow.len() < n {
            let p = Point::new(e.center.x + 2.0 * rng.random::<f64>() - 1.0, e.center.y + 2.0 * rng.random::<f64>() - 1.0);
            if p.dist2(e.center) <= 1.0 && sim.state.covers(p) {
                slow.push(p);
            }
        }
        for f in [|p: &Point| p.x, |p: &Point| p.y] {
            let a: Vec<f64> = fast.iter().map(f).collect();
            let b: Vec<f64> = slow.iter().map(f).collect();
            let (d, _) = stats::ks_two_sample(&a, &b);
            assert!(d < stats::ks_critical_01(n, n), "KS {d}");
        }
        assert!(fast.iter().all(|p| sim.state.covers(*p) && p.dist2(e.center) <= 1.0));
    }

    fn script() -> Vec<Event> {
        vec![
            Event::new(1, 1.0, Point::new(0.5, 0.0), 1.0),
            Event::new(2, 2.0, Point::new(2.2, 0.0), 1.0),
            Event::new(3, 3.0, Point::new(5.0, 5.0), 1.0),
        ]
    }

    #[test]
    fn scripted_half_plane_run() {
        let m = RadiusMeasure::unit();
        let (log, rep) = run_scripted(SeedRegion::origin(), &m, &script(), StopCondition::HalfPlaneReached(3.0)).unwrap();
        let rep = rep.unwrap();
        assert_eq!(log.events.iter().map(|e| e.id).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(rep.stop_time, 2.0);
        assert_eq!(rep.trigger_event_id, Some(2));
        assert_eq!(rep.n_candidates, 2);
    }

    #[test]
    fn scripted_point_target() {
        let m = RadiusMeasure::unit();
        let (_, rep) = run_scripted(SeedRegion::origin(), &m, &script(), StopCondition::PointCovered(Point::new(3.0, 0.0))).unwrap();
        assert_eq!(rep.unwrap().stop_time, 2.0);
        // e3 is never accepted, so a far target is never met
        let (log, rep) = run_scripted(SeedRegion::origin(), &m, &script(), StopCondition::PointCovered(Point::new(5.0, 5.0))).unwrap();
        assert!(rep.is_none());
        assert_eq!(log.events.len(), 2);
    }
}
