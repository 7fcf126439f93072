//! Tensor-valued maps with `(p, δ)`-structure and their Jacobians.

use crate::error::{LdgError, Result};

use super::nfunction::NFunction;
use super::tensor::{Tensor2, Tensor4};

/// Default regularization floor for Jacobians at (near) zero arguments.
pub fn default_eps(p: &Tensor2) -> f64 {
    1e-12 * (1.0 + p.norm())
}

/// `A(P) = (δ + |P|)^{p-2} P`, with `A(0) = 0`.
#[inline]
pub fn op_a(nf: &NFunction, p: &Tensor2) -> Tensor2 {
    let r = p.norm();
    if r == 0.0 {
        return Tensor2::ZERO;
    }
    p.scale(nf.flux_ratio(r))
}

/// `g(r) I + g′(r) P⊗P / r` for `g(s) = φ′(shift + s)/(shift + s)`.
#[inline]
fn ratio_jacobian(nf: &NFunction, shift: f64, p: &Tensor2, eps: f64) -> Result<Tensor4> {
    let r = p.norm().max(eps);
    let s = shift + r;
    if s == 0.0 {
        if nf.delta() == 0.0 && nf.p() < 2.0 {
            return Err(LdgError::Singularity(format!(
                "Jacobian of A is unbounded at P = 0 for p = {} and delta = 0",
                nf.p()
            )));
        }
        return Ok(Tensor4::scaled_identity(nf.flux_ratio(0.0)));
    }
    let g = nf.flux_ratio(s);
    if r == 0.0 {
        return Ok(Tensor4::scaled_identity(g));
    }
    Ok(Tensor4::identity_plus_rank_one(
        g,
        nf.flux_ratio_derivative(s) / r,
        p,
    ))
}

/// `DA(P)` with `r = max(|P|, eps)` in the scalar coefficients.
pub fn op_a_jacobian(nf: &NFunction, p: &Tensor2, eps: f64) -> Result<Tensor4> {
    ratio_jacobian(nf, 0.0, p, eps)
}

/// `A_a(P) = φ′_a(|P|)/|P| P = φ′(a+|P|)/(a+|P|) P`.
#[inline]
pub fn op_a_shifted(nf: &NFunction, a: f64, p: &Tensor2) -> Tensor2 {
    let r = p.norm();
    if r == 0.0 {
        return Tensor2::ZERO;
    }
    p.scale(nf.flux_ratio(a + r))
}

/// Jacobian of [`op_a_shifted`] in `P`.
pub fn op_a_shifted_jacobian(nf: &NFunction, a: f64, p: &Tensor2, eps: f64) -> Result<Tensor4> {
    ratio_jacobian(nf, a, p, eps)
}

/// `∂A_a(P)/∂a = g′(a + |P|) P`.
#[inline]
pub fn op_a_shifted_shift_derivative(nf: &NFunction, a: f64, p: &Tensor2) -> Tensor2 {
    let r = p.norm();
    if r == 0.0 {
        return Tensor2::ZERO;
    }
    p.scale(nf.flux_ratio_derivative(a + r))
}

/// `F(P) = sqrt(φ′(|P|)/|P|) P`, zero at `P = 0`.
#[inline]
pub fn map_f(nf: &NFunction, p: &Tensor2) -> Tensor2 {
    let r = p.norm();
    if r == 0.0 {
        return Tensor2::ZERO;
    }
    p.scale(nf.flux_ratio(r).sqrt())
}

/// `F*(P) = sqrt((φ*)′(|P|)/|P|) P`, zero at `P = 0`.
pub fn map_fstar(nf: &NFunction, p: &Tensor2) -> Tensor2 {
    let s = p.norm();
    if s == 0.0 {
        return Tensor2::ZERO;
    }
    let t = nf.conjugate_prime_unchecked(s);
    // (φ*)′(s)/s = t/φ′(t) = 1/g(t)
    p.scale((1.0 / nf.flux_ratio(t)).sqrt())
}
