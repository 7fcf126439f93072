//! Local discontinuous Galerkin discretization of nonlinear elliptic systems
//! `-div A(∇u) = f - div F` whose operator has Orlicz (`(p, δ)`) structure,
//! on conforming triangulations of rectangles.
//!
//! The crate is organized bottom-up:
//!
//! - [`orlicz`]: N-functions, shifts, conjugates and the maps `A`, `F`, `F*`.
//! - [`mesh`]: structured triangulations and red refinement.
//! - [`dgspace`]: broken polynomial spaces, projections, traces.
//! - [`operators`]: lifting, discrete gradient, modulars.
//! - [`solver`]: residual/Jacobian assembly, Newton, sparse linear solvers.
//! - [`experiments`]: manufactured solution, error quantities, EOC studies, CLI.

pub mod dgspace;
pub mod error;
pub mod experiments;
pub mod mesh;
pub mod operators;
pub mod orlicz;
pub mod quadrature;
pub mod solver;

pub use error::{LdgError, Result};
