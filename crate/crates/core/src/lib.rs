//! Simulator and analysis toolkit for a hybrid spin sensor backed by a
//! nuclear-spin memory probing weakly coupled target nuclear spins.
//!
//! The crate covers the full pipeline: operator algebra on small labeled
//! tensor-product spin systems, the secular spin Hamiltonian and dipolar
//! geometry, Lindblad channels for sensor dissipation with an exact
//! propagator integrator, correlation-spectroscopy pulse sequences and their
//! magnetic-field sensitivity functions, dynamical-decoupling filter
//! functions with coherence-decay integrals, frequency-domain line fitting,
//! and parameter sweeps/optimization over the dissipation models.

pub mod error;
mod linalg;
pub mod quantum;
pub mod fitting;
pub mod dynamics;
pub mod physics;

pub use error::{Error, Result};
