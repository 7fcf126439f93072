//! Gauss rules on intervals and triangles, plus an adaptive Gauss–Legendre
//! integrator for scalar functions of one variable.

use crate::error::{LdgError, Result};

/// Highest polynomial degree for which rules are generated.
pub const MAX_ORDER: usize = 60;

/// A quadrature rule on a reference domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
}

impl<const D: usize> Rule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` with `n` points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(LdgError::Config(format!(
            "unsupported quadrature order {order} (supported: 1..={MAX_ORDER})"
        )));
    }
    Ok(())
}

/// Gauss rule on the unit interval `[0, 1]`, exact for polynomials of degree `order`.
pub fn interval_rule(order: usize) -> Result<Rule<1>> {
    check_order(order)?;
    let n = (order + 2) / 2;
    let (x, w) = gauss_legendre(n);
    Ok(Rule {
        points: x.iter().map(|&t| [0.5 * (t + 1.0)]).collect(),
        weights: w.iter().map(|&v| 0.5 * v).collect(),
    })
}

/// Collapsed (Duffy) Gauss rule on the reference triangle with vertices
/// `(0,0), (1,0), (0,1)`, exact for polynomials of total degree `order`.
/// All nodes lie strictly inside the triangle.
pub fn triangle_rule(order: usize) -> Result<Rule<2>> {
    check_order(order)?;
    // x^a y^b (1 - eta) has degree order + 1 in eta.
    let n = (order + 3) / 2;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (xe, we) in x.iter().zip(&w) {
        let eta = 0.5 * (xe + 1.0);
        for (xx, wx) in x.iter().zip(&w) {
            let xi = 0.5 * (xx + 1.0);
            points.push([xi * (1.0 - eta), eta]);
            weights.push(0.25 * we * wx * (1.0 - eta));
        }
    }
    Ok(Rule { points, weights })
}

/// Adaptive Gauss–Legendre integration of `f` over `[a, b]`.
///
/// Each panel is integrated with an `n`-point rule and compared with the
/// sum over its two halves; panels are bisected until the difference drops
/// below the (absolute) tolerance share of the panel.
pub fn adaptive_gauss_legendre<F>(f: F, a: f64, b: f64, n: usize, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return 0.0;
    }
    let (x, w) = gauss_legendre(n.max(2));
    let panel = |lo: f64, hi: f64| -> f64 {
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo);
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| wi * f(c + r * xi))
            .sum::<f64>()
            * r
    };
    let mut total = 0.0;
    // Explicit stack: (lo, hi, coarse estimate, depth)
    let mut stack = vec![(a, b, panel(a, b), 0u32)];
    let span = (b - a).abs();
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid);
        let right = panel(mid, hi);
        let fine = left + right;
        let share = tol * ((hi - lo).abs() / span).max(1e-3);
        if (fine - coarse).abs() <= share || depth >= 60 {
            total += fine;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn reference_triangle_area() {
        let r = triangle_rule(1).unwrap();
        let s: f64 = r.weights.iter().sum();
        assert!((s - 0.5).abs() < 1e-15);
    }

    fn monomial_integral(a: u32, b: u32) -> f64 {
        // int_T x^a y^b = a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn triangle_rules_are_exact_up_to_order() {
        for order in 1..=14 {
            let r = triangle_rule(order).unwrap();
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    let approx: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = monomial_integral(a, b);
                    assert!(
                        (approx - exact).abs() <= 1e-13 * exact.max(1e-3),
                        "order {order}: x^{a} y^{b}"
                    );
                }
            }
        }
    }

    #[test]
    fn degree_eight_monomial() {
        let r = triangle_rule(8).unwrap();
        let approx: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| w * p[0].powi(5) * p[1].powi(3))
            .sum();
        assert!((approx - monomial_integral(5, 3)).abs() < 1e-13);
    }

    #[test]
    fn nodes_strictly_interior() {
        for order in [1, 4, 8, 12] {
            let r = triangle_rule(order).unwrap();
            for p in &r.points {
                assert!(p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0);
            }
            let r = interval_rule(order).unwrap();
            for p in &r.points {
                assert!(p[0] > 0.0 && p[0] < 1.0);
            }
        }
    }

    #[test]
    fn unsupported_order_is_rejected() {
        assert!(matches!(triangle_rule(0), Err(LdgError::Config(_))));
        assert!(interval_rule(MAX_ORDER + 1).is_err());
    }

    #[test]
    fn adaptive_handles_kinks() {
        let v = adaptive_gauss_legendre(|s: f64| s.abs().sqrt(), -1.0, 1.0, 10, 1e-12);
        assert!((v - 4.0 / 3.0).abs() < 1e-10);
    }
}
