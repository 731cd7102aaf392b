//! Toolkit for observing ground-state dynamics of an anneal by slicing:
//! quenched and paused anneal schedules, Ising/QUBO problem models on
//! Chimera topologies, schedule-aware Monte Carlo samplers, a genetic
//! search for dynamics-rich instances, and two freezeout estimators.
//!
//! All operations are deterministic for a fixed seed: random streams are
//! derived per read/slice/individual so parallel execution order never
//! changes a result.

// Validation guards are written as `!(x > lo)` so NaN inputs fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clique;
pub mod error;
pub mod evolver;
pub mod freezeout;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod sampleset;
pub mod schedule;
pub mod slicer;

pub use error::{Error, Result};

/// Boltzmann constant expressed in GHz/K, the unit system of the
/// transverse/problem energy curves.
pub const BOLTZMANN_GHZ_PER_K: f64 = 20.83661;

/// Operating temperature of the modeled annealer, in kelvin (15 mK).
pub const OPERATING_TEMPERATURE_K: f64 = 0.015;
