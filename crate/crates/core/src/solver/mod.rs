//! Assembly of the discrete nonlinear system, Newton's method and the
//! sparse linear solver.

mod assembly;
mod linear;
mod newton;
mod sparse;

pub use assembly::{GradientStencil, LdgSystem, ProblemData, ShiftMode, State, TensorFn, VectorFn};
pub use linear::{bicgstab, linear_solve, Ilu0, LinearSolveStats, LinearSolverOptions};
pub use newton::{newton_solve, prolongate, NewtonOptions, SolveReport};
pub use sparse::{dot, norm2, CsrMatrix};

#[cfg(test)]
mod tests;
