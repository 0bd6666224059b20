//! Operational quantum time distributions from a single measurement signal.
//!
//! A free-evolution projective-sampling signal p(t) admits two inequivalent
//! post-processings: the activity-based time-of-flow density ∝ |dp/dt| and
//! the presence-based stroboscopic density ∝ p(t). This crate computes both
//! for the analytic Rabi model and for Gaussian wave packets tunneling
//! through a rectangular barrier, together with the stationary-scattering
//! closed forms, spectral-average formulas, and an independent grid
//! propagator used to cross-validate the quadrature pipeline.

pub mod distributions;
pub mod error;
pub mod experiments;
pub mod grid_oracle;
pub mod quadrature;
pub mod rabi;
pub mod scattering;
pub mod spectral;
pub mod wavepacket;

pub use error::{Error, Result};
