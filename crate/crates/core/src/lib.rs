//! Lagrangian solvers for incompressible flow with variable density on a
//! periodic box.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: grids, fields, FFT-based calculus, norms.
//! * [`besov`]: Littlewood–Paley blocks, `Ḃ^s_{p,1}` norms, the `E_p`
//!   solution norm and empirical multiplier bounds.
//! * [`flow`]: flow maps built from Lagrangian velocities, their Jacobians,
//!   inverses, adjugates, and off-grid composition.
//! * [`stokes`]: the Stokes problem with prescribed divergence.
//! * [`lagrangian`]: the fixed-point construction of solutions in
//!   Lagrangian coordinates, globally for small data and locally for large.
//! * [`eulerian`]: mapping back to Eulerian variables, residual checks, an
//!   independent reference solver, and the density-jump experiment.
//! * [`suite`]: seeded datum suites used by the tests and the CLI.

pub mod besov;
pub mod error;
pub mod eulerian;
pub mod flow;
pub mod lagrangian;
pub mod spectral;
pub mod stokes;
pub mod suite;
pub mod trajectory;

pub use error::{Error, ErrorClass, Result};
pub use spectral::{Grid, GridSpec, MatrixField, ScalarField, VectorField};
pub use trajectory::Trajectory;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/besov.md")]
    mod besov {}
    #[doc = include_str!("../../../book/src/flows.md")]
    mod flows {}
    #[doc = include_str!("../../../book/src/stokes.md")]
    mod stokes {}
    #[doc = include_str!("../../../book/src/fixed_point.md")]
    mod fixed_point {}
    #[doc = include_str!("../../../book/src/eulerian.md")]
    mod eulerian {}
}
