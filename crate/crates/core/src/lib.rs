//! Spectral solver and estimate-verification lab for the spatially periodic
//! Boltzmann equation with constant collision kernel.
//!
//! The unknown is stored as x-Fourier coefficients at physical velocities,
//! `f̂(n, v)`; the ξ-side `f̃(n, ξ)` is produced on demand. See [`grid`] for
//! the normalization conventions every other module relies on.

pub mod bump;
pub mod collision;
pub mod counting;
pub mod error;
pub(crate) mod fft;
pub mod grid;
pub(crate) mod index;
pub mod lab;
pub mod lp;
pub mod norms;
pub mod propagator;
pub mod report;
pub mod rng;
pub mod solver;

pub use collision::{collide, gain_bobylev, gain_direct_oracle, loss_bobylev, moments, sphere_quadrature, Moments, SphereQuadrature};
pub use error::{KflError, Result};
pub use grid::{eval_xi_offgrid, make_grid, v_to_xi, x_analyze, x_synthesize, xi_to_v, GridSpec, PhaseField, PhysicalField, XiField};
pub use norms::{CutoffKind, NormParams, Trajectory};
pub use propagator::{free_evolve, interaction_frame, Direction};
pub use report::ExperimentReport;
