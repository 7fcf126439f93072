//! Damped Newton iteration on the residual of [`LdgSystem`].

use serde::{Deserialize, Serialize};

use crate::dgspace::{BrokenField, DgSpace, Rank};
use crate::error::{LdgError, Result};

use super::assembly::{LdgSystem, ShiftMode};
use super::linear::{linear_solve, LinearSolveStats, LinearSolverOptions};
use super::sparse::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Step reduction factor.
    pub backtrack: f64,
    pub min_step: f64,
    pub shift_mode: ShiftMode,
    pub linear: LinearSolverOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            atol: 1e-8,
            rtol: 1e-10,
            max_iter: 100,
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: 2f64.powi(-20),
            shift_mode: ShiftMode::Lagged,
            linear: LinearSolverOptions {
                rel_tol: 1e-11,
                accept_tol: 1e-10,
                max_iter: 5000,
            },
        }
    }
}

impl NewtonOptions {
    fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0) || !(self.rtol > 0.0) {
            return Err(LdgError::Config(format!(
                "tolerances must be positive (atol = {}, rtol = {})",
                self.atol, self.rtol
            )));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) || !(self.min_step > 0.0) {
            return Err(LdgError::Config(
                "line search parameters out of range".into(),
            ));
        }
        if self.linear.rel_tol > 1e-10 || self.linear.accept_tol > 1e-10 {
            return Err(LdgError::Config(
                "linear tolerances must be at most 1e-10".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of [`newton_solve`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// `‖r_0‖, ‖r_1‖, …`.
    pub residual_norms: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub linear: Vec<LinearSolveStats>,
    pub shift_mode: ShiftMode,
    pub n_dofs: usize,
    #[serde(skip)]
    pub u: BrokenField,
    #[serde(skip)]
    pub l: BrokenField,
    #[serde(skip)]
    pub a: BrokenField,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_norms.last().unwrap_or(&f64::NAN)
    }
}

/// Newton's method with backtracking Armijo line search on `‖r‖₂`.
///
/// Stops when `‖r‖ ≤ atol` or `‖r‖ / ‖r_0‖ ≤ rtol`; afterwards `L_h` and
/// `A_h = Π_h^k A(L_h)` are reconstructed from the final iterate.
pub fn newton_solve(
    system: &LdgSystem,
    initial: &BrokenField,
    opts: &NewtonOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let space = &system.space;
    if initial.rank != Rank::Vector || initial.n_cells != space.n_cells() {
        return Err(LdgError::Config(
            "initial guess must be a vector field on the system's mesh".into(),
        ));
    }
    let mut u = initial.embed_in_degree(space.degree).coeffs;
    let mut r = system.residual(&u)?;
    let mut rnorm = norm2(&r);
    let r0 = rnorm;
    let mut residual_norms = vec![rnorm];
    let mut step_sizes = Vec::new();
    let mut linear = Vec::new();
    let done = |rn: f64| rn <= opts.atol || (r0 > 0.0 && rn / r0 <= opts.rtol);

    let mut iterations = 0;
    while !done(rnorm) {
        if iterations >= opts.max_iter {
            return Err(LdgError::NonConvergence {
                iterations,
                residual: rnorm,
                trace: residual_norms,
            });
        }
        iterations += 1;
        let jac = system.jacobian(&u, opts.shift_mode)?;
        let (d, stats) = linear_solve(&jac, &r, &opts.linear)?;
        linear.push(stats);

        let mut s = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + s * b).collect();
            let rt = system.residual(&trial)?;
            let nt = norm2(&rt);
            if nt.is_finite() && nt <= (1.0 - opts.armijo * s) * rnorm {
                u = trial;
                r = rt;
                rnorm = nt;
                break;
            }
            s *= opts.backtrack;
            if s < opts.min_step {
                return Err(LdgError::Stagnation {
                    iteration: iterations,
                    residual: rnorm,
                    trace: residual_norms,
                });
            }
        }
        step_sizes.push(s);
        residual_norms.push(rnorm);
    }

    let (l, a) = system.reconstruct(&u)?;
    Ok(SolveReport {
        converged: true,
        iterations,
        residual_norms,
        step_sizes,
        linear,
        shift_mode: opts.shift_mode,
        n_dofs: system.n_dofs(),
        u: system.field(u)?,
        l,
        a,
    })
}

/// Transfers a field from a mesh to its red refinement (children of cell
/// `c` are `4c..4c+4`); exact for piecewise polynomials.
pub fn prolongate(
    coarse_space: &DgSpace,
    coarse: &BrokenField,
    fine_space: &DgSpace,
) -> Result<BrokenField> {
    if fine_space.n_cells() != 4 * coarse_space.n_cells() {
        return Err(LdgError::Config(
            "fine mesh is not a single red refinement of the coarse mesh".into(),
        ));
    }
    let nc = coarse.rank.components();
    BrokenField::project(fine_space, coarse.degree, coarse.rank, |c, x, out| {
        let v = coarse.value_at(coarse_space, c / 4, x);
        out[..nc].copy_from_slice(&v);
    })
}
