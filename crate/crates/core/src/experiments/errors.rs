use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgspace::{BrokenField, DgSpace};
use crate::error::Result;
use crate::mesh::Point;
use crate::operators::modular_jump;
use crate::orlicz::{map_f, map_fstar, Tensor2};

use super::exact::ExactSolution;

/// The four error measures of one discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorQuantities {
    /// `‖F(∇_h u_h) - F(∇u)‖₂`.
    pub grad: f64,
    /// `‖F(L_h) - F(∇u)‖₂`.
    pub l: f64,
    /// `‖F*(A_h) - F*(A(∇u))‖₂`.
    pub a: f64,
    /// `m_{φ,h}(u_h - u)^{1/2}`.
    pub jump: f64,
}

/// `Σ_K ∫_K g(c, q, x)` over cell quadrature points.
fn integrate<G>(space: &DgSpace, g: G) -> Result<f64>
where
    G: Fn(usize, usize, Point) -> Result<f64> + Sync,
{
    (0..space.n_cells())
        .into_par_iter()
        .map(|c| {
            let cd = &space.cells[c];
            let mut s = 0.0;
            for (q, (x, w)) in cd.points.iter().zip(&cd.weights).enumerate() {
                s += w * g(c, q, *x)?;
            }
            Ok(s)
        })
        .sum()
}

/// Pointwise `|F(∇_h u_h) - F(∇u)|²` at quadrature point `q` of cell `c`.
pub fn grad_error_density(
    space: &DgSpace,
    exact: &ExactSolution,
    u: &BrokenField,
    c: usize,
    q: usize,
) -> Result<f64> {
    let x = space.cells[c].points[q];
    let nf = &exact.nf;
    let d = map_f(nf, &u.gradient_at_qp(space, c, q)) - map_f(nf, &exact.grad(x)?);
    Ok(d.dot(&d))
}

/// Error quantities of `(u_h, L_h, A_h)` against the exact solution, using
/// the quadrature of `space`.
pub fn error_quantities(
    space: &DgSpace,
    exact: &ExactSolution,
    u: &BrokenField,
    l: &BrokenField,
    a: &BrokenField,
) -> Result<ErrorQuantities> {
    let nf = &exact.nf;
    let sq = |t: Tensor2| t.dot(&t);
    let grad = integrate(space, |c, q, _| grad_error_density(space, exact, u, c, q))?.sqrt();
    let l_err = integrate(space, |c, q, x| {
        Ok(sq(
            map_f(nf, &l.tensor_at_qp(space, c, q)) - map_f(nf, &exact.grad(x)?)
        ))
    })?
    .sqrt();
    let a_err = integrate(space, |c, q, x| {
        Ok(sq(
            map_fstar(nf, &a.tensor_at_qp(space, c, q)) - map_fstar(nf, &exact.flux(x)?)
        ))
    })?
    .sqrt();
    let ex = *exact;
    let boundary = move |x: Point| ex.u(x);
    // Jumps of u_h - u equal those of u_h inside; on Γ_D they are (u_h - u_D) ⊗ n.
    let jump = modular_jump(space, nf, u, Some(&boundary), space.h())?
        .value
        .sqrt();
    Ok(ErrorQuantities {
        grad,
        l: l_err,
        a: a_err,
        jump,
    })
}

/// Fraction of `∫ |F(∇_h u_h) - F(∇u)|²` located in the disc `|x| ≤ radius`.
pub fn error_concentration(
    space: &DgSpace,
    exact: &ExactSolution,
    u: &BrokenField,
    radius: f64,
) -> Result<f64> {
    let total = integrate(space, |c, q, _| grad_error_density(space, exact, u, c, q))?;
    let inner = integrate(space, |c, q, x| {
        if x[0].hypot(x[1]) <= radius {
            grad_error_density(space, exact, u, c, q)
        } else {
            Ok(0.0)
        }
    })?;
    Ok(if total > 0.0 { inner / total } else { 0.0 })
}
