//! Equilibria, normal modes and phonon-mediated spin-spin couplings of
//! single-plane ion crystals in a Penning trap.
//!
//! All computations run in the dimensionless units described in [`params`].

pub mod analysis;
pub mod axial;
pub mod cli;
pub mod couplings;
pub mod equilibrium;
pub mod error;
pub mod params;
pub mod planar;
pub mod seedlat;

pub use error::{Error, Result};

/// A position or displacement in the crystal plane.
pub type Vec2 = nalgebra::Vector2<f64>;
