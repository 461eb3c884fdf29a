//! Backward structures over a finished run: ancestral skeletons, geodesics,
//! chain statistics and the slow coverage chain.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::ChainError;
use crate::events::Event;
use crate::geometry::Point;
use crate::measure::SlowChainParams;
use crate::occupancy::OccupiedState;

/// One vertex `(time, centre, radius)` of a chain; `event` is `None` for the
/// seed link or the query point of a skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub time: f64,
    pub center: Point,
    pub radius: f64,
    pub event: Option<u64>,
}

impl ChainLink {
    pub fn from_event(e: &Event) -> Self {
        ChainLink {
            time: e.time,
            center: e.center,
            radius: e.radius,
            event: Some(e.id),
        }
    }

    pub fn seed(at: Point) -> Self {
        ChainLink {
            time: 0.0,
            center: at,
            radius: 0.0,
            event: None,
        }
    }

    fn meets(&self, other: &ChainLink) -> bool {
        let reach = self.radius + other.radius;
        self.center.dist2(other.center) <= reach * reach
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    Geodesic,
    Slow,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub links: Vec<ChainLink>,
    pub kind: ChainKind,
}

impl Chain {
    /// Times strictly increase, consecutive balls meet, the first link meets
    /// the seed and only the first link may be a seed marker.
    pub fn is_valid(&self, state: &OccupiedState) -> bool {
        let Some(first) = self.links.first() else { return false };
        let starts_on_seed = match first.event {
            None => state.seed_covers(first.center),
            Some(_) => state.seed_intersects(first.center, first.radius),
        };
        starts_on_seed
            && self.links[1..].iter().all(|l| l.event.is_some())
            && self
                .links
                .windows(2)
                .all(|w| w[0].time < w[1].time && w[0].meets(&w[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    /// Links other than the seed marker.
    pub n_jumps: usize,
    /// Signed y-coordinate of the final centre.
    pub y_end: f64,
    pub max_abs_y: f64,
    /// Smallest `L` with every ball inside the strip `|y| <= L`.
    pub strip_radius: f64,
    /// Largest x-coordinate reached by any ball.
    pub x_advance_max: f64,
}

pub fn chain_stats(c: &Chain) -> ChainStats {
    let n_jumps = c.links.iter().filter(|l| l.event.is_some()).count();
    let y_end = c.links.last().map_or(0.0, |l| l.center.y);
    let fold = |f: fn(&ChainLink) -> f64| c.links.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    ChainStats {
        n_jumps,
        y_end,
        max_abs_y: fold(|l| l.center.y.abs()),
        strip_radius: fold(|l| l.center.y.abs() + l.radius),
        x_advance_max: fold(|l| l.center.x + l.radius),
    }
}

/// Backward walk from `trigger`: each step picks uniformly among the earlier
/// kept events whose ball meets the current one, plus the seed when the
/// current ball meets it; reaching the seed ends the walk.
pub fn extract_geodesic<R: Rng + ?Sized>(state: &OccupiedState, trigger: u64, rng: &mut R) -> Result<Chain, ChainError> {
    let events = state.events();
    let mut idx = state.index_of(trigger).ok_or(ChainError::NotFound(trigger))?;
    let mut links = vec![ChainLink::from_event(&events[idx])];
    loop {
        let e = &events[idx];
        let preds = state.earlier_intersecting(e.center, e.radius, idx);
        let seed_ok = state.seed_intersects(e.center, e.radius);
        let choices = preds.len() + usize::from(seed_ok);
        if choices == 0 {
            return Err(ChainError::Stranded(e.id));
        }
        let k = rng.random_range(0..choices);
        if k == preds.len() {
            let at = seed_contact(state, e.center).ok_or(ChainError::Stranded(e.id))?;
            links.push(ChainLink::seed(at));
            break;
        }
        idx = preds[k];
        links.push(ChainLink::from_event(&events[idx]));
    }
    links.reverse();
    Ok(Chain {
        links,
        kind: ChainKind::Geodesic,
    })
}

/// Point of `seed ∩ clip` closest to `p`.
fn seed_contact(state: &OccupiedState, p: Point) -> Option<Point> {
    use crate::occupancy::SeedRegion;
    fn closest(seed: &SeedRegion, p: Point, clip: Option<&crate::geometry::Window>) -> Option<Point> {
        match (seed, clip) {
            (SeedRegion::PointSet { points }, Some(c)) => points
                .iter()
                .copied()
                .filter(|q| c.contains(*q))
                .min_by(|a, b| a.dist2(p).total_cmp(&b.dist2(p))),
            (SeedRegion::Union { parts }, _) => parts
                .iter()
                .filter_map(|s| closest(s, p, clip))
                .min_by(|a, b| a.dist2(p).total_cmp(&b.dist2(p))),
            _ => seed.closest_point(p),
        }
    }
    closest(state.seed(), p, state.clip())
}

/// Every link reachable backward from `(t, z)` over events with time in
/// `(t - s, t]`, taken in decreasing time.
///
/// The walk starts from `z` as a radius-0 link; that link is dropped from the
/// result when an event at exactly time `t` covers `z`.
pub fn ancestral_skeleton(state: &OccupiedState, z: Point, t: f64, s: f64) -> Vec<ChainLink> {
    let cell = 2.0 * state.r0();
    let key = |p: Point| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let start = ChainLink {
        time: t,
        center: z,
        radius: 0.0,
        event: None,
    };
    let mut links = vec![start];
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    grid.entry(key(z)).or_default().push(0);

    let events = state.events();
    let end = events.partition_point(|e| e.time <= t);
    let begin = events.partition_point(|e| e.time <= t - s);
    let mut z_covered_at_t = false;
    for e in events[begin..end].iter().rev() {
        let link = ChainLink::from_event(e);
        let (ix, iy) = key(e.center);
        let reached = (iy - 1..=iy + 1).any(|cy| {
            (ix - 1..=ix + 1).any(|cx| {
                grid.get(&(cx, cy))
                    .is_some_and(|ids| ids.iter().any(|&i| links[i].meets(&link)))
            })
        });
        if reached {
            if e.time == t && e.covers(z) {
                z_covered_at_t = true;
            }
            grid.entry((ix, iy)).or_default().push(links.len());
            links.push(link);
        }
    }
    if z_covered_at_t {
        links.remove(0);
    }
    links
}

/// Whether some skeleton link meets the seed.
pub fn skeleton_meets_seed(state: &OccupiedState, skeleton: &[ChainLink]) -> bool {
    skeleton.iter().any(|l| state.seed_intersects(l.center, l.radius))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowChain {
    pub params: SlowChainParams,
    pub waits: Vec<f64>,
    pub total: f64,
    /// Waiting times drawn at the exact step rate; `false` marks a chain
    /// sampled at a lower rate, which only bounds the true one from above.
    pub exact: bool,
}

/// Number of boxes of side `delta` needed to cross distance `x`.
pub fn slow_chain_steps(delta: f64, x: f64) -> usize {
    if x <= 0.0 {
        0
    } else {
        (x / delta).ceil() as usize
    }
}

/// Independent `Exp(step_rate)` waiting times, one per box.
pub fn sample_slow_chain<R: Rng + ?Sized>(params: &SlowChainParams, x: f64, rng: &mut R) -> SlowChain {
    let n = slow_chain_steps(params.delta, x);
    let exp = Exp::new(params.step_rate).expect("step rate is positive");
    let waits: Vec<f64> = (0..n).map(|_| exp.sample(rng)).collect();
    let total = waits.iter().sum();
    SlowChain {
        params: *params,
        waits,
        total,
        exact: true,
    }
}

/// Slow chain read off a full log: step `j` is the first event after the
/// previous step centred in `(x_{j-1}, x_j) × (-δ, δ)` with radius above `3δ`,
/// where `x_j = j δ`. `None` if the log ends first.
pub fn slow_chain_from_log(events: &[Event], params: &SlowChainParams, x: f64) -> Option<SlowChain> {
    let d = params.delta;
    let n = slow_chain_steps(d, x);
    let mut waits = Vec::with_capacity(n);
    let mut last = 0.0;
    let mut it = events.iter();
    for j in 1..=n {
        let (lo, hi) = ((j - 1) as f64 * d, j as f64 * d);
        let e = it.find(|e| {
            e.time > last && e.center.x > lo && e.center.x < hi && e.center.y.abs() < d && e.radius > 3.0 * d
        })?;
        waits.push(e.time - last);
        last = e.time;
    }
    Some(SlowChain {
        params: *params,
        waits,
        total: last,
        exact: true,
    })
}
