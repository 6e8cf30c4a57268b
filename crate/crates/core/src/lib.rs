//! Squeezing-assisted cooling of an optomechanical resonator.
//!
//! A mechanical mode under parametric (two-phonon) driving is coupled by
//! radiation pressure to a driven, lossy cavity. The crate finds the
//! classical equilibria, linearizes the quantum Langevin equations around
//! them, and computes stability, steady-state second moments, the
//! phonon-number spectrum and the resulting occupation and effective
//! temperature. A truncated Fock-space master-equation solver provides an
//! independent check of the Gaussian results.
//!
//! All rates are in units of the bare mechanical frequency ω_m.

pub mod cli;
pub mod dynamics;
pub mod error;
mod linalg;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod scenario;
pub mod spectrum;
pub mod steady;

pub use error::{Error, Result};
pub use params::{SweepAxis, SystemParams};
