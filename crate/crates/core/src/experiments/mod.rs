//! Replica orchestration and estimators.
//!
//! Every experiment draws replica `r` at grid index `i` from the stream
//! [`stream_id`]`(tag, i, r)` of the master seed, so results do not depend on
//! thread count or scheduling. Each result serialises to one CSV of
//! per-replica records plus a JSON summary.

use std::io::Write;

use rand::SeedableRng;
use serde::Serialize;

use crate::error::ExperimentError;
use crate::events::{replica_stream, stream_id, ReplicaRng};
use crate::measure::RadiusMeasure;
use crate::simulator::DEFAULT_BUDGET;

pub mod duality;
pub mod exponent;
pub mod gap;
pub mod nu;
pub mod sectors;
pub mod shape;
pub mod skeleton;
pub mod tails;

pub use duality::{duality_check, DualityResult};
pub use exponent::{exponent_fit, ExponentResult};
pub use gap::{front_bulk_gap, GapMode, GapResult};
pub use nu::{estimate_nu, NuResult};
pub use sectors::{sector_survival, SectorConfig, SectorResult};
pub use shape::{shape_scan, ShapeConfig, ShapeResult};
pub use skeleton::{skeleton_check, SkeletonResult};
pub use tails::{tail_validator, BoundPoint, JumpPoint, TailConfig, TailResult};

/// Stream tags, one per experiment and purpose.
pub(crate) mod tag {
    pub const NU: u16 = 1;
    pub const EXPONENT: u16 = 2;
    pub const GAP: u16 = 3;
    pub const DUALITY_POINT: u16 = 4;
    pub const DUALITY_PLANE: u16 = 5;
    pub const SHAPE: u16 = 6;
    pub const SHAPE_CALIBRATION: u16 = 7;
    pub const SLOW_CHAIN: u16 = 8;
    pub const JUMP_TAIL: u16 = 9;
    pub const HIT_TAIL: u16 = 10;
    pub const SECTORS: u16 = 11;
    pub const SKELETON: u16 = 12;
    /// Added to a tag for the stream that samples geodesics.
    pub const GEODESIC: u16 = 0x100;
}

/// What every experiment needs besides its own parameters.
#[derive(Debug, Clone, Copy)]
pub struct Context<'m> {
    pub measure: &'m RadiusMeasure,
    pub master_seed: u64,
    /// Candidate budget per replica.
    pub budget: u64,
}

impl<'m> Context<'m> {
    pub fn new(measure: &'m RadiusMeasure, master_seed: u64) -> Self {
        Context {
            measure,
            master_seed,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub(crate) fn stream(&self, tag: u16, index: usize, replica: u64) -> ReplicaRng {
        replica_stream(self.master_seed, stream_id(tag, index as u16, replica as u32))
    }

    pub(crate) fn geodesic_rng(&self, tag: u16, index: usize, replica: u64) -> rand_chacha::ChaCha8Rng {
        // separate key so geodesic sampling never shares a stream with the dynamics
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.master_seed ^ 0x6765_6f64_6573_6963);
        rng.set_stream(stream_id(tag | tag::GEODESIC, index as u16, replica as u32));
        rng
    }
}

/// Common output surface used by the command-line front end.
pub trait ExperimentOutput {
    /// Short experiment id, also the output file stem.
    fn name(&self) -> &'static str;
    /// Per-replica records as CSV with a header row.
    fn write_records<W: Write>(&self, w: W) -> Result<(), ExperimentError>;
    fn summary_json(&self) -> Result<String, ExperimentError>;
    /// Budget exhaustion or a failed reliability check.
    fn flagged(&self) -> bool;
}

pub(crate) fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<(), ExperimentError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn check_grid(xs: &[f64]) -> Result<(), ExperimentError> {
    if xs.is_empty() {
        return Err(ExperimentError::Params("empty x grid".into()));
    }
    if xs.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(ExperimentError::Params("x values must be finite and >= 0".into()));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Params("x values must be strictly increasing".into()));
    }
    Ok(())
}

pub(crate) fn check_reps(reps: usize) -> Result<(), ExperimentError> {
    if reps == 0 {
        return Err(ExperimentError::Params("reps must be >= 1".into()));
    }
    Ok(())
}

/// Values of `v` for the rows whose key equals `k`.
pub(crate) fn select<T>(rows: &[T], key: impl Fn(&T) -> bool, v: impl Fn(&T) -> f64) -> Vec<f64> {
    rows.iter().filter(|r| key(r)).map(v).filter(|v| !v.is_nan()).collect()
}

impl<T: ExperimentOutput> ExperimentOutput for &T {
    fn name(&self) -> &'static str {
        (*self).name()
    }
    fn write_records<W: Write>(&self, w: W) -> Result<(), ExperimentError> {
        (*self).write_records(w)
    }
    fn summary_json(&self) -> Result<String, ExperimentError> {
        (*self).summary_json()
    }
    fn flagged(&self) -> bool {
        (*self).flagged()
    }
}

/// CSV bytes of an experiment's records.
pub fn records_csv<E: ExperimentOutput>(e: &E) -> Result<Vec<u8>, ExperimentError> {
    let mut buf = Vec::new();
    e.write_records(&mut buf)?;
    Ok(buf)
}
