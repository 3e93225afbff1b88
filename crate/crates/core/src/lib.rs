//! Numerical laboratory for "maximally mixed" states of the 2D incompressible
//! Euler equations.
//!
//! The library works with scalar vorticity fields on a periodic channel, a
//! torus, or a disk (radial profiles). Around that core it provides:
//!
//! * stream function solves and the conserved functionals (energy, momentum,
//!   angular momentum, boundary circulations, convex Casimirs),
//! * rearrangement orbit closures: membership tests, equimeasurability,
//!   bistochastic operators, Birkhoff decompositions and Fejer smoothing,
//! * constrained Casimir minimization over an orbit closure at fixed energy
//!   (Frank-Wolfe with a sorting linear oracle plus multiplier root finds),
//! * energy-based exclusion certificates showing that a peaked vorticity
//!   datum cannot relax to any shear flow,
//! * statistical-hydrodynamics equilibria (selective decay, Liouville,
//!   sinh-Poisson, Miller-Robert-Sommeria) solved as fixed points,
//! * a truncated pseudo-spectral simulator with conservation diagnostics.

pub mod bistoch;
pub mod error;
pub mod exclude;
pub mod field;
pub mod greens;
pub mod minimize;
pub mod rearrange;
pub mod sampling;
pub mod simulate;
pub mod stathydro;

pub use error::CoreError;
pub use field::{Domain, SpectralField, VorticityField};
