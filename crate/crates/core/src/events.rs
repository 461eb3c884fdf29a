//! Poisson reproduction events: candidate generation by thinning against a
//! rectangle, per-replica random streams, and the accepted-event log.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
pub use crate::geometry::Window;
use crate::geometry::Point;
use crate::measure::RadiusMeasure;

/// Random stream type used by every replica.
pub type ReplicaRng = ChaCha8Rng;

/// Reproducible stream number `replica_id` of the family seeded by `master_seed`.
///
/// ChaCha exposes 2^64 independent streams per key, so distinct replica ids
/// never overlap and the sequence does not depend on platform or scheduling.
pub fn replica_stream(master_seed: u64, replica_id: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica_id);
    rng
}

/// Packs an experiment tag, a grid index and a replica number into one stream id.
pub fn stream_id(tag: u16, index: u16, replica: u32) -> u64 {
    (u64::from(tag) << 48) | (u64::from(index) << 32) | u64::from(replica)
}

/// A point `(t, z, r)` of the driving Poisson process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: u64,
    pub time: f64,
    pub center: Point,
    pub radius: f64,
}

impl Event {
    pub fn new(id: u64, time: f64, center: Point, radius: f64) -> Self {
        Event { id, time, center, radius }
    }

    #[inline]
    pub fn intersects_ball(&self, center: Point, radius: f64) -> bool {
        let reach = self.radius + radius;
        self.center.dist2(center) <= reach * reach
    }

    #[inline]
    pub fn covers(&self, p: Point) -> bool {
        self.center.dist2(p) <= self.radius * self.radius
    }
}

/// Draws the next candidate event of the Poisson process restricted to `w`.
///
/// The inter-arrival time is exponential with rate `area(w) · total_mass`,
/// the centre is uniform on `w` and the radius follows the normalised measure.
/// The returned id is left at zero; callers number accepted events.
pub fn next_candidate<R: Rng + ?Sized>(
    rng: &mut R,
    w: &Window,
    m: &RadiusMeasure,
    t_now: f64,
) -> Result<Event, GeometryError> {
    let rate = w.area() * m.total_mass();
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(GeometryError::ZeroArea(*w));
    }
    let wait: f64 = Exp1.sample(rng);
    let mut time = t_now + wait / rate;
    if time <= t_now {
        // rounding tie: keep times strictly increasing in generation order
        time = t_now.next_up();
    }
    let x = w.x_lo + rng.random::<f64>() * w.width();
    let y = w.y_lo + rng.random::<f64>() * w.height();
    let radius = m.sample_radius(rng);
    Ok(Event::new(0, time, Point::new(x, y), radius))
}

/// Accepted events of one run, in time order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<Event>,
    pub candidate_count: u64,
    /// Fixed window of a restricted run; `None` for adaptive windows.
    pub window: Option<Window>,
    pub master_seed: Option<u64>,
    pub replica_id: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    id: u64,
    time: f64,
    cx: f64,
    cy: f64,
    radius: f64,
}

impl EventLog {
    pub fn from_events(events: Vec<Event>) -> Self {
        EventLog {
            events,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Event> {
        // ids are assigned densely from zero, but logs read from disk may not be
        match self.events.get(id as usize) {
            Some(e) if e.id == id => Some(e),
            _ => self.events.iter().find(|e| e.id == id),
        }
    }

    /// Times strictly increasing and ids strictly increasing.
    pub fn is_ordered(&self) -> bool {
        self.events
            .windows(2)
            .all(|w| w[0].time < w[1].time && w[0].id < w[1].id)
    }

    /// Writes `id,time,cx,cy,radius` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.events {
            w.serialize(EventRow {
                id: e.id,
                time: e.time,
                cx: e.center.x,
                cy: e.center.y,
                radius: e.radius,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(reader);
        let events = r
            .deserialize::<EventRow>()
            .map(|row| row.map(|e| Event::new(e.id, e.time, Point::new(e.cx, e.cy), e.radius)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EventLog::from_events(events))
    }
}
