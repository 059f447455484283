//! Adaptive finite element toolkit for electrical impedance tomography (EIT)
//! under the complete electrode model (CEM).
//!
//! The crate reconstructs a conductivity distribution on the square
//! `(-1,1)^2` from boundary voltage measurements via Tikhonov-regularized
//! output least squares, and drives mesh refinement with a residual
//! a posteriori error estimator evaluated at the discrete minimizer.
//!
//! The main building blocks map one-to-one onto the modules below:
//!
//! - [`mesh`]: conforming triangulations with electrode-tagged boundary
//!   faces and newest-vertex-bisection refinement,
//! - [`fem`]: piecewise-linear fields, the coupled CEM system and nodal
//!   transfer between nested meshes,
//! - [`solver`]: forward/adjoint CEM solves and voltage measurements,
//! - [`inversion`]: the regularized least-squares functional, its adjoint
//!   gradient and a projected nonlinear CG minimizer,
//! - [`estimator`]: element residuals, face jumps and bulk marking,
//! - [`afem`]: the SOLVE -> ESTIMATE -> MARK -> REFINE loop and the
//!   uniform-refinement baseline,
//! - [`synthetic`]: ground-truth conductivities, fine-mesh data generation
//!   and calibrated Gaussian noise,
//! - [`config`]: declarative experiment configuration for the CLI.
//!
//! See the crate examples for end-to-end usage; the `eit` binary exposes
//! the batch pipeline (`gendata`, `afem`, `uniform`, `rates`).
pub mod afem;
pub mod config;
pub mod error;
pub mod estimator;

pub mod fem;
pub mod inversion;
pub mod io;
pub mod mesh;
pub mod solver;
pub mod sparse;
pub mod synthetic;
pub use error::EitError;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, EitError>;
