//! Numerical laboratory for weighted space-time smoothing estimates of
//! dispersive propagators.
//!
//! The crate provides:
//!
//! * periodic-box spectral grids with forward/inverse Fourier transforms and
//!   fractional frequency multipliers ([`grid`]),
//! * a weight catalog with the Morrey–Campanato and Kerman–Sawyer weight-class
//!   norms, dyadic cube enumeration and singular Riesz-kernel quadrature
//!   ([`weights`]),
//! * quadrature on `S^{n-1}`, the surface-measure Fourier transform, the
//!   extension operator and its dyadic kernel pieces ([`sphere`]),
//! * the fractional propagator `e^{-it(-Δ)^{γ/2}}` and weighted space-time
//!   norms ([`propagator`]),
//! * best-constant measurement, parameter admissibility, per-piece dyadic
//!   bounds and refinement/sharpness scans ([`estimator`]),
//! * experiment configuration and JSON report emission ([`config`],
//!   [`report`]).
//!
//! Everything is `f64`/`Complex64` based and deterministic for a fixed seed.

pub mod config;
pub mod estimator;
pub mod grid;
pub(crate) mod quadrature;
pub mod propagator;
pub mod report;
pub mod sphere;
pub mod weights;

pub use grid::{ComplexField, GridSpec, Side};
pub use weights::{DyadicCube, WeightSpec};
