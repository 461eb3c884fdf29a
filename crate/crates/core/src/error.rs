use thiserror::Error;

use crate::events::EventLog;
use crate::geometry::Window;
use crate::simulator::StopReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid window {0:?}: bounds must be finite and ordered")]
    InvalidWindow(Window),
    #[error("window {0:?} has zero area")]
    ZeroArea(Window),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid measure: {0}")]
    Invalid(String),
    #[error("no delta in (0, R0/3] leaves positive mass above 3*delta")]
    NoValidDelta,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OccupancyError {
    #[error("event {id} at t={time} does not intersect the occupied set")]
    NotIntersecting { id: u64, time: f64 },
    #[error("event {id} at t={time} is not after the current time {t_now}")]
    NotAfter { id: u64, time: f64, t_now: f64 },
    #[error("invalid seed region: {0}")]
    InvalidSeed(String),
    #[error("event {id} has radius {radius} outside (0, R0={r0}]")]
    BadRadius { id: u64, radius: f64, r0: f64 },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Occupancy(#[from] OccupancyError),
    #[error("candidate budget of {budget} exhausted before the stop condition was met")]
    BudgetExceeded {
        budget: u64,
        log: Box<EventLog>,
        report: StopReport,
    },
    #[error("parent sampling exceeded {trials} rejection trials for event {id}")]
    DegenerateIntersection { id: u64, trials: u32 },
    #[error("adaptive window policy requires a compact seed")]
    UnboundedSeed,
    #[error("invalid simulation setup: {0}")]
    Setup(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("event {0} is not in the log")]
    NotFound(u64),
    #[error("backward walk from event {0} found no predecessor")]
    Stranded(u64),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("fit undefined: {0}")]
    FitUndefined(String),
    #[error("invalid experiment parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
