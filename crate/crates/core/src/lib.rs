//! Event-driven Monte Carlo for the ∞-parent spatial Lambda-Fleming-Viot
//! growth process: a set grows by every Poisson reproduction ball that
//! touches it.
//!
//! The crate is layered bottom-up: [`measure`] and [`events`] describe the
//! driving Poisson process, [`occupancy`] holds the occupied set with its
//! spatial index, [`simulator`] runs the forward dynamics, [`chains`] walks
//! finished runs backward, and [`experiments`] turns replicas into estimates.

// `!(a > b)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod error;
pub mod events;
pub mod experiments;
pub mod geometry;
pub mod measure;
pub mod occupancy;
pub mod replicas;
pub mod simulator;
pub mod stats;

pub use chains::{ancestral_skeleton, chain_stats, extract_geodesic, sample_slow_chain, Chain, ChainKind, ChainLink, ChainStats, SlowChain};
pub use error::{ChainError, ExperimentError, GeometryError, MeasureError, OccupancyError, SimError};
pub use events::{next_candidate, replica_stream, stream_id, Event, EventLog, ReplicaRng};
pub use experiments::{Context, ExperimentOutput};
pub use geometry::{Point, Window};
pub use measure::{Atom, MeasureSpec, RadiusMeasure, SlowChainParams, UniformPiece};
pub use occupancy::{LogMode, OccupiedState, SeedRegion};
pub use simulator::{
    hitting_time, run_forward, run_scripted, run_two_type, Hit, SimConfig, Simulation, SplitRule, StopCondition, StopReport, Target,
    WindowPolicy,
};
