//! Periodic grids, field containers, spectral calculus and `L_p` norms.

mod calculus;
mod field;
mod grid;
mod interp;
pub mod io;

pub use calculus::{
    divergence, gradient, gradient_lift, gradient_part, hessian, inverse_laplacian, jacobian, laplacian,
    leray_project, lp_norm, partial, second_partial, vector_laplacian, Pointwise,
};
pub use field::{point, MatrixField, PointMatrix, ScalarField, VectorField};
pub use grid::{Grid, GridSpec};
pub use interp::{OffGridEvaluator, DIRECT_SUMMATION_LIMIT};
