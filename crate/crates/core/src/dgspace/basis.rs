use nalgebra::DMatrix;

use crate::error::{LdgError, Result};

/// Number of scalar polynomials of total degree `≤ k` in two variables.
pub const fn dim_p(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// L²-orthonormal polynomial basis on the reference triangle
/// `(0,0), (1,0), (0,1)`, ordered by total degree.
///
/// The ordering makes the basis hierarchical: the first `dim_p(j)` functions
/// span `P_j`, so projecting onto a lower degree is a truncation.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub degree: usize,
    exponents: Vec<(i32, i32)>,
    /// Row `b` holds the monomial coefficients of basis function `b`.
    coeffs: Vec<f64>,
}

fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `∫_T x^a y^b = a! b! / (a + b + 2)!` on the reference triangle.
fn monomial_moment(a: i32, b: i32) -> f64 {
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

impl ReferenceBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > 8 {
            return Err(LdgError::Config(format!(
                "polynomial degree {degree} is not supported (max 8)"
            )));
        }
        let exponents: Vec<(i32, i32)> = (0..=degree as i32)
            .flat_map(|d| (0..=d).map(move |b| (d - b, b)))
            .collect();
        let n = exponents.len();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            monomial_moment(
                exponents[i].0 + exponents[j].0,
                exponents[i].1 + exponents[j].1,
            )
        });
        let chol = gram.cholesky().ok_or_else(|| {
            LdgError::Internal("monomial Gram matrix is not positive definite".into())
        })?;
        // φ = L^{-1} m gives (φ, φ^T) = L^{-1} G L^{-T} = I.
        let linv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| LdgError::Internal("singular Cholesky factor".into()))?;
        let mut coeffs = vec![0.0; n * n];
        for b in 0..n {
            for m in 0..n {
                coeffs[b * n + m] = linv[(b, m)];
            }
        }
        Ok(ReferenceBasis {
            degree,
            exponents,
            coeffs,
        })
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    fn monomials(&self, xi: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let k = self.degree as i32;
        let px: Vec<f64> = (0..=k).map(|a| xi[0].powi(a)).collect();
        let py: Vec<f64> = (0..=k).map(|b| xi[1].powi(b)).collect();
        let vals = self
            .exponents
            .iter()
            .map(|&(a, b)| px[a as usize] * py[b as usize])
            .collect();
        let grads = self
            .exponents
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 {
                    a as f64 * px[a as usize - 1] * py[b as usize]
                } else {
                    0.0
                };
                let dy = if b > 0 {
                    b as f64 * px[a as usize] * py[b as usize - 1]
                } else {
                    0.0
                };
                [dx, dy]
            })
            .collect();
        (vals, grads)
    }

    /// Basis values at a reference point.
    pub fn eval(&self, xi: [f64; 2]) -> Vec<f64> {
        let (m, _) = self.monomials(xi);
        let n = self.len();
        (0..n)
            .map(|b| (0..=b).map(|j| self.coeffs[b * n + j] * m[j]).sum())
            .collect()
    }

    /// Basis values and reference gradients at a reference point.
    pub fn eval_with_gradients(&self, xi: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let (m, dm) = self.monomials(xi);
        let n = self.len();
        let mut vals = vec![0.0; n];
        let mut grads = vec![[0.0; 2]; n];
        for b in 0..n {
            for j in 0..=b {
                let c = self.coeffs[b * n + j];
                vals[b] += c * m[j];
                grads[b][0] += c * dm[j][0];
                grads[b][1] += c * dm[j][1];
            }
        }
        (vals, grads)
    }
}
