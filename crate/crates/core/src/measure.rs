//! Reproduction-radius intensity measure and its derived constants.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::MeasureError;

/// Number of grid points scanned when choosing the slow-chain box size.
pub const DELTA_GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub r: f64,
    pub mass: f64,
}

/// Mass spread uniformly over the radius interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformPiece {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

/// Declarative form of a measure, as found under `"measure"` in a run config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub uniform: Vec<UniformPiece>,
}

/// A finite measure on `(0, R0]` made of atoms and uniform densities.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusMeasure {
    atoms: Vec<Atom>,
    pieces: Vec<UniformPiece>,
    r0: f64,
    total_mass: f64,
    m0: f64,
}

impl RadiusMeasure {
    pub fn new(atoms: Vec<Atom>, pieces: Vec<UniformPiece>) -> Result<Self, MeasureError> {
        if atoms.is_empty() && pieces.is_empty() {
            return Err(MeasureError::Invalid("measure has no atoms and no uniform pieces".into()));
        }
        for a in &atoms {
            if !(a.r.is_finite() && a.r > 0.0) {
                return Err(MeasureError::Invalid(format!("atom radius {} must be finite and > 0", a.r)));
            }
            if !(a.mass.is_finite() && a.mass >= 0.0) {
                return Err(MeasureError::Invalid(format!("atom mass {} must be finite and >= 0", a.mass)));
            }
        }
        for p in &pieces {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo >= 0.0 && p.lo < p.hi) {
                return Err(MeasureError::Invalid(format!(
                    "uniform piece ({}, {}] needs 0 <= lo < hi < inf",
                    p.lo, p.hi
                )));
            }
            if !(p.mass.is_finite() && p.mass >= 0.0) {
                return Err(MeasureError::Invalid(format!("uniform mass {} must be finite and >= 0", p.mass)));
            }
        }
        let total_mass: f64 = atoms.iter().map(|a| a.mass).sum::<f64>() + pieces.iter().map(|p| p.mass).sum::<f64>();
        if !(total_mass > 0.0 && total_mass.is_finite()) {
            return Err(MeasureError::Invalid(format!("total mass {total_mass} must be positive and finite")));
        }
        let r0 = atoms
            .iter()
            .filter(|a| a.mass > 0.0)
            .map(|a| a.r)
            .chain(pieces.iter().filter(|p| p.mass > 0.0).map(|p| p.hi))
            .fold(0.0_f64, f64::max);

        // M0 = ∫ π (R0 + r)² μ(dr)
        let atom_part: f64 = atoms.iter().map(|a| a.mass * PI * (r0 + a.r).powi(2)).sum();
        let piece_part: f64 = pieces
            .iter()
            .map(|p| {
                let density = p.mass / (p.hi - p.lo);
                density * PI * ((r0 + p.hi).powi(3) - (r0 + p.lo).powi(3)) / 3.0
            })
            .sum();

        Ok(RadiusMeasure {
            atoms,
            pieces,
            r0,
            total_mass,
            m0: atom_part + piece_part,
        })
    }

    /// Single atom of unit mass at radius 1.
    pub fn unit() -> Self {
        RadiusMeasure::new(vec![Atom { r: 1.0, mass: 1.0 }], Vec::new()).expect("unit measure is valid")
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<Self, MeasureError> {
        RadiusMeasure::new(spec.atoms.clone(), spec.uniform.clone())
    }

    pub fn to_spec(&self) -> MeasureSpec {
        MeasureSpec {
            atoms: self.atoms.clone(),
            uniform: self.pieces.clone(),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[UniformPiece] {
        &self.pieces
    }

    /// `R0`, the largest radius charged by the measure.
    #[inline]
    pub fn max_radius(&self) -> f64 {
        self.r0
    }

    #[inline]
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `M0 = ∫ π (R0 + r)² μ(dr)`, the largest rate at which new events can
    /// hit a single existing ball.
    #[inline]
    pub fn yule_rate_bound(&self) -> f64 {
        self.m0
    }

    /// `μ((a, ∞))`.
    pub fn tail_mass(&self, a: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|at| at.r > a).map(|at| at.mass).sum();
        let pieces: f64 = self
            .pieces
            .iter()
            .map(|p| {
                let frac = ((p.hi - a.max(p.lo)) / (p.hi - p.lo)).clamp(0.0, 1.0);
                p.mass * frac
            })
            .sum();
        atoms + pieces
    }

    /// Draws a radius from the normalised measure.
    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.pieces.is_empty() && self.atoms.len() == 1 {
            return self.atoms[0].r;
        }
        let mut target = rng.random::<f64>() * self.total_mass;
        for a in &self.atoms {
            if target < a.mass {
                return a.r;
            }
            target -= a.mass;
        }
        for p in &self.pieces {
            if target < p.mass {
                // (lo, hi]: never returns lo, so a piece starting at 0 cannot yield radius 0
                let u: f64 = rng.random();
                return p.hi - u * (p.hi - p.lo);
            }
            target -= p.mass;
        }
        // rounding left `target` just past the last positive component
        self.atoms
            .iter()
            .rev()
            .find(|a| a.mass > 0.0)
            .map(|a| a.r)
            .or_else(|| self.pieces.iter().rev().find(|p| p.mass > 0.0).map(|p| p.hi))
            .unwrap_or(self.r0)
    }

    /// Box size and rate of the slow coverage chain.
    ///
    /// With an override, `δ` is taken as given. Otherwise `δ` maximises the
    /// step rate `2δ²μ((3δ,∞))` over [`DELTA_GRID_POINTS`] equally spaced
    /// points in `(0, R0/3]`, preferring the larger `δ` on ties.
    pub fn slow_chain_params(&self, delta_override: Option<f64>) -> Result<SlowChainParams, MeasureError> {
        if let Some(delta) = delta_override {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(MeasureError::Invalid(format!("delta {delta} must be finite and > 0")));
            }
            return SlowChainParams::from_measure(self, delta);
        }
        let mut best: Option<SlowChainParams> = None;
        for k in 1..=DELTA_GRID_POINTS {
            let delta = self.r0 / 3.0 * k as f64 / DELTA_GRID_POINTS as f64;
            let Ok(candidate) = SlowChainParams::from_measure(self, delta) else {
                continue;
            };
            if best.is_none_or(|b| candidate.step_rate >= b.step_rate) {
                best = Some(candidate);
            }
        }
        best.ok_or(MeasureError::NoValidDelta)
    }
}

/// Parameters of the slow coverage chain: boxes of width `delta` and
/// half-height `delta`, radius filter `> 3·delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowChainParams {
    pub delta: f64,
    /// Lower bound on `μ((3δ, ∞))` used in the closed-form tail bounds.
    pub eta: f64,
    /// Exact waiting-time rate `2δ² μ((3δ, ∞))`.
    pub step_rate: f64,
}

impl SlowChainParams {
    /// `eta` set to the exact tail mass above `3δ`.
    pub fn from_measure(m: &RadiusMeasure, delta: f64) -> Result<Self, MeasureError> {
        let tail = m.tail_mass(3.0 * delta);
        if tail <= 0.0 {
            return Err(MeasureError::NoValidDelta);
        }
        Ok(SlowChainParams {
            delta,
            eta: tail,
            step_rate: 2.0 * delta * delta * tail,
        })
    }

    /// Uses a caller-chosen `eta <= μ((3δ,∞))`; larger values void the bound.
    pub fn with_eta(m: &RadiusMeasure, delta: f64, eta: f64) -> Result<Self, MeasureError> {
        let mut p = SlowChainParams::from_measure(m, delta)?;
        if !(eta > 0.0 && eta <= p.eta) {
            return Err(MeasureError::Invalid(format!(
                "eta {eta} must lie in (0, mu((3 delta, inf))] = (0, {}]",
                p.eta
            )));
        }
        p.eta = eta;
        Ok(p)
    }

    /// `3 / (η δ²)`: the tail bound holds for `β` strictly above this.
    pub fn beta_threshold(&self) -> f64 {
        3.0 / (self.eta * self.delta * self.delta)
    }

    /// Closed-form bound `exp(-δ η β x)` on `P(T > βx)`.
    pub fn tail_bound(&self, beta: f64, x: f64) -> f64 {
        (-self.delta * self.eta * beta * x).exp()
    }
}
