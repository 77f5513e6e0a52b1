//! Boundary-integral toolkit for dilute suspensions of rigid spheres in Stokes flow.
//!
//! The crate computes ensemble-averaged velocity and stress fields of a
//! suspension of force- and torque-free spheres immersed in a bounded ambient
//! Stokes flow, and cross-checks those averages against a homogeneous
//! effective medium whose viscosity depends on the local particle volume
//! fraction.
//!
//! Module map:
//! - [`domain`] — geometry, ambient flows, sphere configurations, sampling.
//! - [`greens`] — Stokes Green's functions: free space, half-space images,
//!   and a numerically built spherical-cavity wall operator.
//! - [`spharm`] — vector spherical harmonic surface bases and the analytic
//!   spectrum of the single-sphere traction operator.
//! - [`traction`] — dense boundary-integral solvers for surface tractions
//!   (one sphere, sphere pairs, full N-sphere systems) and field evaluation.
//! - [`ensemble`] — Monte Carlo and deterministic ensemble averages.
//! - [`pairdist`] — two-sphere tables: stresslet excess, mobilities, and the
//!   straining-flow pair distribution.
//! - [`continuum`] — effective-medium solves and comparisons.
//! - [`scalinglab`] — empirical scaling experiments for the solver's error
//!   terms.

pub mod domain;
pub mod error;
pub mod greens;
pub mod io;
pub mod poly3;
pub mod quad;
pub mod spharm;
pub mod traction;
pub mod util;

pub use error::{Error, Result};

/// A point or vector in 3-space.
pub type Vec3 = nalgebra::Vector3<f64>;
/// A 3×3 tensor.
pub type Mat3 = nalgebra::Matrix3<f64>;
