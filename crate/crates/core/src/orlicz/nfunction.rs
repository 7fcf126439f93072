//! The balanced `(p, δ)` family `φ′(t) = (δ + t)^{p-2} t`, its conjugate and
//! its shifts.

use serde::{Deserialize, Serialize};

use crate::error::{LdgError, Result};
use crate::quadrature::adaptive_gauss_legendre;

/// Absolute tolerance for modular values obtained by quadrature.
pub const VALUE_TOLERANCE: f64 = 1e-12;

/// Scalar convex function usable inside a modular `∫ ψ(|f|)`.
pub trait YoungFunction: Sync {
    /// `ψ(t)` for `t ≥ 0`.
    fn value(&self, t: f64) -> f64;
    /// `ψ′(t)` for `t ≥ 0`.
    fn derivative(&self, t: f64) -> f64;
}

/// A member of the `(p, δ)` family of balanced N-functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NFunction {
    p: f64,
    delta: f64,
    /// Points per panel of the adaptive Gauss–Legendre rule used where no
    /// closed form is available.
    pub quadrature_order: usize,
}

fn check_arg(t: f64, what: &str) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(LdgError::Domain(format!(
            "{what} must be a finite non-negative number, got {t}"
        )));
    }
    Ok(())
}

impl NFunction {
    pub fn new(p: f64, delta: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(LdgError::Domain(format!(
                "exponent p must lie in (1, inf), got {p}"
            )));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(LdgError::Domain(format!(
                "shift delta must be >= 0, got {delta}"
            )));
        }
        Ok(NFunction {
            p,
            delta,
            quadrature_order: 10,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Characteristics `(γ₁, γ₂)` with `γ₁ φ′ ≤ t φ″ ≤ γ₂ φ′`.
    pub fn characteristics(&self) -> (f64, f64) {
        ((self.p - 1.0).min(1.0), (self.p - 1.0).max(1.0))
    }

    /// `φ′(r) / r = (δ + r)^{p-2}`.
    #[inline]
    pub fn flux_ratio(&self, r: f64) -> f64 {
        if self.p == 2.0 {
            1.0
        } else {
            (self.delta + r).powf(self.p - 2.0)
        }
    }

    /// Derivative of [`flux_ratio`](Self::flux_ratio): `(p-2)(δ + r)^{p-3}`.
    #[inline]
    pub fn flux_ratio_derivative(&self, r: f64) -> f64 {
        if self.p == 2.0 {
            0.0
        } else {
            (self.p - 2.0) * (self.delta + r).powf(self.p - 3.0)
        }
    }

    #[inline]
    pub(crate) fn prime_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            self.flux_ratio(t) * t
        }
    }

    pub(crate) fn value_unchecked(&self, t: f64) -> f64 {
        let (p, d) = (self.p, self.delta);
        if t == 0.0 {
            0.0
        } else if p == 2.0 {
            0.5 * t * t
        } else if d == 0.0 {
            t.powf(p) / p
        } else if t >= d {
            let s = d + t;
            (s.powf(p) - d.powf(p)) / p - d * (s.powf(p - 1.0) - d.powf(p - 1.0)) / (p - 1.0)
        } else {
            // The closed form cancels for t < δ; the integrand is analytic here.
            adaptive_gauss_legendre(
                |s| self.prime_unchecked(s),
                0.0,
                t,
                self.quadrature_order,
                VALUE_TOLERANCE * 1e-3 * (t * t).min(1.0),
            )
        }
    }

    /// `φ(t) = ∫₀ᵗ φ′(s) ds`.
    pub fn phi(&self, t: f64) -> Result<f64> {
        check_arg(t, "t")?;
        Ok(self.value_unchecked(t))
    }

    /// `φ′(t) = (δ + t)^{p-2} t`.
    pub fn phi_prime(&self, t: f64) -> Result<f64> {
        check_arg(t, "t")?;
        Ok(self.prime_unchecked(t))
    }

    /// `φ″(t) = (δ + t)^{p-3} ((p-1) t + δ)`.
    pub fn phi_second(&self, t: f64) -> Result<f64> {
        check_arg(t, "t")?;
        if t == 0.0 && self.delta == 0.0 && self.p < 2.0 {
            return Err(LdgError::Singularity(format!(
                "phi'' is unbounded at t = 0 for p = {} and delta = 0",
                self.p
            )));
        }
        if self.p == 2.0 {
            return Ok(1.0);
        }
        if t == 0.0 && self.delta == 0.0 {
            // p > 2
            return Ok(0.0);
        }
        Ok((self.delta + t).powf(self.p - 3.0) * ((self.p - 1.0) * t + self.delta))
    }

    /// `(φ*)′(s) = (φ′)^{-1}(s)`.
    pub fn conjugate_prime(&self, s: f64) -> Result<f64> {
        check_arg(s, "s")?;
        Ok(self.conjugate_prime_unchecked(s))
    }

    pub(crate) fn conjugate_prime_unchecked(&self, s: f64) -> f64 {
        let (p, d) = (self.p, self.delta);
        if s == 0.0 {
            return 0.0;
        }
        if p == 2.0 {
            return s;
        }
        if d == 0.0 {
            return s.powf(1.0 / (p - 1.0));
        }
        // Newton on τ = ln t for h(τ) = (p-2) ln(δ + e^τ) + τ - ln s, whose
        // slope stays within [γ₁, γ₂].
        let ln_s = s.ln();
        let large = ln_s / (p - 1.0);
        let small = ln_s - (p - 2.0) * d.ln();
        let mut tau = if large > d.ln() { large } else { small };
        let (g1, _) = self.characteristics();
        let h = |tau: f64| (p - 2.0) * (d + tau.exp()).ln() + tau - ln_s;
        // Bracket from the slope bounds.
        let h0 = h(tau);
        let (mut lo, mut hi) = if h0 > 0.0 {
            (tau - h0 / g1 - 1e-12, tau)
        } else {
            (tau, tau - h0 / g1 + 1e-12)
        };
        for _ in 0..200 {
            let e = tau.exp();
            let val = h(tau);
            if val > 0.0 {
                hi = hi.min(tau);
            } else {
                lo = lo.max(tau);
            }
            let slope = (p - 2.0) * e / (d + e) + 1.0;
            let mut next = tau - val / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - tau).abs();
            tau = next;
            if step <= 1e-15 * tau.abs().max(1.0) {
                break;
            }
        }
        tau.exp()
    }

    /// `φ*(s)`, evaluated through the Legendre identity
    /// `φ*(s) = s t - φ(t)` with `t = (φ*)′(s)`.
    pub fn conjugate_value(&self, s: f64) -> Result<f64> {
        check_arg(s, "s")?;
        Ok(self.conjugate_value_unchecked(s))
    }

    pub(crate) fn conjugate_value_unchecked(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let t = self.conjugate_prime_unchecked(s);
        (s * t - self.value_unchecked(t)).max(0.0)
    }

    /// `φ*(s)` by adaptive quadrature of `(φ*)′`; slower, used as a cross-check.
    pub fn conjugate_value_by_quadrature(&self, s: f64) -> Result<f64> {
        check_arg(s, "s")?;
        Ok(adaptive_gauss_legendre(
            |x| self.conjugate_prime_unchecked(x),
            0.0,
            s,
            self.quadrature_order,
            VALUE_TOLERANCE * 1e-3 * (s * self.conjugate_prime_unchecked(s)).min(1.0),
        ))
    }

    /// The shifted N-function `φ_a`.
    pub fn shifted(&self, a: f64) -> Result<ShiftedNFunction> {
        check_arg(a, "shift a")?;
        Ok(ShiftedNFunction { base: *self, a })
    }

    /// The conjugate N-function `φ*`.
    pub fn conjugate(&self) -> Conjugate {
        Conjugate(*self)
    }

    /// Sampled `sup φ(2t)/φ(t)` over a logarithmic grid on `[1e-8, 1e8]`.
    pub fn delta2_estimate(&self) -> f64 {
        (0..=160)
            .map(|i| 10f64.powf(-8.0 + 0.1 * i as f64))
            .map(|t| self.value_unchecked(2.0 * t) / self.value_unchecked(t))
            .fold(0.0, f64::max)
    }
}

impl YoungFunction for NFunction {
    fn value(&self, t: f64) -> f64 {
        self.value_unchecked(t)
    }
    fn derivative(&self, t: f64) -> f64 {
        self.prime_unchecked(t)
    }
}

/// `φ_a` with `φ′_a(t) = φ′(a + t) t / (a + t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedNFunction {
    pub base: NFunction,
    pub a: f64,
}

impl ShiftedNFunction {
    /// For the `(p, δ)` family the shift acts as `δ ↦ δ + a`.
    fn as_family_member(&self) -> NFunction {
        NFunction {
            p: self.base.p,
            delta: self.base.delta + self.a,
            quadrature_order: self.base.quadrature_order,
        }
    }

    pub fn shifted_prime(&self, t: f64) -> Result<f64> {
        check_arg(t, "t")?;
        Ok(self.derivative(t))
    }

    pub fn shifted_value(&self, t: f64) -> Result<f64> {
        check_arg(t, "t")?;
        Ok(self.value(t))
    }

    /// `φ_a(t)` by adaptive quadrature of `φ′_a`.
    pub fn shifted_value_by_quadrature(&self, t: f64) -> Result<f64> {
        check_arg(t, "t")?;
        Ok(adaptive_gauss_legendre(
            |s| self.derivative(s),
            0.0,
            t,
            self.base.quadrature_order,
            VALUE_TOLERANCE,
        ))
    }

    /// `φ′_a(r) / r = φ′(a + r) / (a + r)`.
    #[inline]
    pub fn flux_ratio(&self, r: f64) -> f64 {
        self.base.flux_ratio(self.a + r)
    }
}

impl YoungFunction for ShiftedNFunction {
    fn value(&self, t: f64) -> f64 {
        self.as_family_member().value_unchecked(t)
    }
    fn derivative(&self, t: f64) -> f64 {
        let s = self.a + t;
        if s == 0.0 {
            0.0
        } else {
            self.base.prime_unchecked(s) * t / s
        }
    }
}

/// The conjugate `φ*` viewed as a function in its own right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conjugate(pub NFunction);

impl YoungFunction for Conjugate {
    fn value(&self, s: f64) -> f64 {
        self.0.conjugate_value_unchecked(s)
    }
    fn derivative(&self, s: f64) -> f64 {
        self.0.conjugate_prime_unchecked(s)
    }
}

/// Ten `(p, α)` stabilization pairs used by the manufactured-solution study.
pub const ALPHA_TABLE: [(f64, f64); 10] = [
    (1.25, 0.06),
    (4.0 / 3.0, 0.1),
    (1.5, 0.2),
    (5.0 / 3.0, 0.5),
    (1.8, 1.0),
    (2.0, 2.0),
    (2.25, 2.0),
    (2.5, 2.5),
    (3.0, 2.5),
    (4.0, 2.5),
];

/// Stabilization parameter from [`ALPHA_TABLE`] for `p` (matched to 1e-9).
pub fn default_alpha(p: f64) -> Option<f64> {
    ALPHA_TABLE
        .iter()
        .find(|(q, _)| (q - p).abs() < 1e-9)
        .map(|&(_, a)| a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nf(p: f64, d: f64) -> NFunction {
        NFunction::new(p, d).unwrap()
    }

    /// Adaptive Simpson, independent of the Gauss–Legendre code.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(
            f: &F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth > 50 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)
            }
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 0)
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(nf(2.0, 0.0).phi(3.0).unwrap(), 4.5);
        assert!((nf(4.0, 0.0).phi(2.0).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(nf(2.0, 0.0).phi_prime(5.0).unwrap(), 5.0);
        assert_eq!(nf(2.0, 0.0).phi_second(5.0).unwrap(), 1.0);
        assert!((nf(3.0, 0.0).phi_prime(2.0).unwrap() - 4.0).abs() < 1e-15);
        assert!((nf(3.0, 0.0).phi_second(2.0).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn golden_value_against_simpson() {
        let f = nf(1.5, 1e-3);
        let oracle = simpson(&|s: f64| (1e-3 + s).powf(-0.5) * s, 0.0, 1.0, 1e-13);
        // Frozen from the oracle above.
        let golden = 0.665_708_080_577_026_3;
        assert!((oracle - golden).abs() < 1e-11, "oracle {oracle:.16}");
        assert!((f.phi(1.0).unwrap() - golden).abs() < 1e-11);
    }

    #[test]
    fn small_arguments_use_accurate_quadrature() {
        let f = nf(1.25, 1e-3);
        for &t in &[1e-9, 1e-6, 5e-4, 9.99e-4] {
            let oracle = simpson(&|s: f64| f.prime_unchecked(s), 0.0, t, 1e-14 * t * t);
            let v = f.phi(t).unwrap();
            assert!(
                (v - oracle).abs() <= 1e-9 * oracle,
                "t={t}: {v} vs {oracle}"
            );
        }
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let f = nf(1.25, 1e-3);
        let t = 1.0;
        let h = 1e-5;
        let fd = (f.phi_prime(t + h).unwrap() - f.phi_prime(t - h).unwrap()) / (2.0 * h);
        assert!((fd - f.phi_second(t).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn singular_second_derivative() {
        assert!(matches!(
            nf(1.5, 0.0).phi_second(0.0),
            Err(LdgError::Singularity(_))
        ));
        assert!(nf(1.5, 1e-3).phi_second(0.0).is_ok());
    }

    #[test]
    fn negative_arguments_rejected() {
        assert!(matches!(nf(2.0, 0.0).phi(-1.0), Err(LdgError::Domain(_))));
        assert!(nf(2.0, 0.0).conjugate_prime(-1.0).is_err());
        assert!(NFunction::new(1.0, 0.0).is_err());
        assert!(NFunction::new(2.0, -1.0).is_err());
    }

    #[test]
    fn conjugate_prime_examples() {
        assert_eq!(nf(2.0, 0.0).conjugate_prime(7.0).unwrap(), 7.0);
        assert!((nf(3.0, 0.0).conjugate_prime(4.0).unwrap() - 2.0).abs() < 1e-14);
        let f = nf(1.5, 1e-3);
        let t = f.conjugate_prime(0.3).unwrap();
        assert!((f.phi_prime(t).unwrap() - 0.3).abs() <= 1e-12);
    }

    #[test]
    fn conjugate_value_agrees_with_quadrature() {
        for &(p, d) in &[(1.25, 1e-3), (1.5, 1e-3), (3.0, 1e-3), (4.0, 0.0)] {
            let f = nf(p, d);
            for &s in &[1e-4, 0.01, 0.3, 1.0, 7.5] {
                let a = f.conjugate_value(s).unwrap();
                let b = f.conjugate_value_by_quadrature(s).unwrap();
                assert!(
                    (a - b).abs() <= 1e-10 * b.max(1e-6),
                    "p={p} s={s}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn shifted_examples() {
        let f = nf(2.0, 0.0);
        assert!((f.shifted(1.0).unwrap().shifted_prime(1.0).unwrap() - 1.0).abs() < 1e-15);
        let g = nf(4.0, 0.0);
        assert!((g.shifted(2.0).unwrap().shifted_prime(3.0).unwrap() - 75.0).abs() < 1e-12);
        let h = nf(1.5, 1e-3);
        for &t in &[0.0, 0.1, 2.0] {
            assert_eq!(
                h.shifted(0.0).unwrap().shifted_prime(t).unwrap(),
                h.phi_prime(t).unwrap()
            );
        }
    }

    #[test]
    fn shifted_value_agrees_with_quadrature() {
        for &(p, d, a) in &[(1.25, 1e-3, 0.7), (4.0, 1e-3, 0.2), (2.5, 0.0, 1.5)] {
            let s = nf(p, d).shifted(a).unwrap();
            for &t in &[1e-3, 0.5, 3.0] {
                let v = s.shifted_value(t).unwrap();
                let q = s.shifted_value_by_quadrature(t).unwrap();
                assert!((v - q).abs() <= 1e-10 * q.max(1e-8), "{v} vs {q}");
            }
        }
    }

    #[test]
    fn delta2_is_finite() {
        let f = nf(4.0, 1e-3);
        let k = f.delta2_estimate();
        assert!(k > 4.0 - 1e-9 && k <= 16.0 + 1e-9, "{k}");
    }

    #[test]
    fn alpha_table_lookup() {
        assert_eq!(default_alpha(4.0 / 3.0), Some(0.1));
        assert_eq!(default_alpha(2.0), Some(2.0));
        assert_eq!(default_alpha(1.7), None);
    }
}
