//! Regularization of severely ill-posed tomography by projections onto random
//! piecewise-constant Delaunay subspaces.
//!
//! The pipeline: a box-constrained least-squares warm start ([`solve::nnls`])
//! feeds per-subspace coefficient estimators ([`estimate`]); the stacked
//! coefficient estimates are recombined by TV-regularized least squares
//! ([`solve::solve_reformulated`]). [`kernel`] checks by Monte Carlo that the
//! expected minimum-norm recombination acts as an isotropic convolution.

pub mod data;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod linop;
pub mod mesh;
pub mod par;
pub mod rng;
pub mod solve;
pub mod tomo;

pub use error::{Error, Result};
pub use grid::{Grid, Image};
pub use par::Execution;
pub use rng::Seed;
