//! Single-shot work extraction in the thermal-operations setting.
//!
//! A system `S` with a discrete spectrum, a bath `B` with exponentially growing
//! multiplicities and a non-degenerate weight `W` interact through global unitaries
//! that conserve `H_S + H_B + H_W`. This crate evaluates the closed-form bounds on
//! the work that can be stored in the weight (single level, level windows and the
//! free-energy transfer bound), the work of formation, and verifies them by exact
//! subspace counting and Haar-random energy-conserving unitaries.
//!
//! Conventions: `k_B = 1`, entropies in nats, trace distance `D = ½ Σ|Δ|`, and all
//! energies are integers on a grid with unit [`Spectrum::quantum`].
#![no_std]

extern crate alloc;

mod error;
mod math;

pub mod density;
pub mod extraction;
pub mod formation;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod shells;
pub mod transfer;
pub mod typicality;

pub use error::{Error, Result};
pub use model::{DiagonalState, Level, Spectrum, ThermalContext};
pub use shells::{BathModel, CompositeModel, ConcreteBath, WeightModel};

/// Tolerance for "sums to one" checks on populations.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;
