use std::sync::Arc;

use crate::error::{LdgError, Result};
use crate::mesh::Point;
use crate::orlicz::{default_eps, op_a, op_a_jacobian, NFunction, Tensor2};
use crate::solver::{ProblemData, VectorFn};

/// Manufactured solution `u(x) = |x|^β (x₂, -x₁)` with its derivatives and
/// the matching source `f = -div A(∇u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolution {
    pub beta: f64,
    pub nf: NFunction,
}

/// `v(x) = (x₂, -x₁)` and `∂_l v_k` (row `k`, column `l`).
fn rotation(x: Point) -> ([f64; 2], [[f64; 2]; 2]) {
    ([x[1], -x[0]], [[0.0, 1.0], [-1.0, 0.0]])
}

impl ExactSolution {
    pub fn new(beta: f64, nf: NFunction) -> Self {
        ExactSolution { beta, nf }
    }

    pub fn u(&self, x: Point) -> [f64; 2] {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [0.0; 2];
        }
        let s = r.powf(self.beta);
        [s * x[1], -s * x[0]]
    }

    /// `∇u`, with `(∇u)_{kl} = ∂_l u_k`.
    pub fn grad(&self, x: Point) -> Result<Tensor2> {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 == 0.0 {
            if self.beta == 0.0 {
                return Ok(Tensor2::new(0.0, 1.0, -1.0, 0.0));
            }
            return Err(LdgError::Singularity(
                "gradient of the exact solution at the origin".into(),
            ));
        }
        let b = self.beta;
        let (v, dv) = rotation(x);
        let rb = r2.powf(0.5 * b);
        let c = b * r2.powf(0.5 * b - 1.0);
        Ok(Tensor2(std::array::from_fn(|a| {
            let (k, l) = (a / 2, a % 2);
            c * x[l] * v[k] + rb * dv[k][l]
        })))
    }

    /// `∂_j ∂_l u_k`, indexed `[k][j][l]`.
    pub fn hessian(&self, x: Point) -> Result<[[[f64; 2]; 2]; 2]> {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 == 0.0 {
            return Err(LdgError::Singularity(
                "Hessian of the exact solution at the origin".into(),
            ));
        }
        let b = self.beta;
        let (v, dv) = rotation(x);
        let c4 = b * (b - 2.0) * r2.powf(0.5 * b - 2.0);
        let c2 = b * r2.powf(0.5 * b - 1.0);
        let mut h = [[[0.0; 2]; 2]; 2];
        for (k, hk) in h.iter_mut().enumerate() {
            for (j, hkj) in hk.iter_mut().enumerate() {
                for (l, hkjl) in hkj.iter_mut().enumerate() {
                    let djl = if j == l { 1.0 } else { 0.0 };
                    *hkjl = c4 * x[j] * x[l] * v[k]
                        + c2 * (djl * v[k] + x[l] * dv[k][j] + x[j] * dv[k][l]);
                }
            }
        }
        Ok(h)
    }

    /// `A(∇u(x))`.
    pub fn flux(&self, x: Point) -> Result<Tensor2> {
        Ok(op_a(&self.nf, &self.grad(x)?))
    }

    /// `f_i = -Σ_{j,k,l} ∂A_{ij}/∂P_{kl}(∇u) ∂_j ∂_l u_k`.
    pub fn source(&self, x: Point) -> Result<[f64; 2]> {
        let g = self.grad(x)?;
        let h = self.hessian(x)?;
        let da = op_a_jacobian(&self.nf, &g, default_eps(&g))?;
        let mut f = [0.0; 2];
        for (i, fi) in f.iter_mut().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        *fi -= da.0[2 * i + j][2 * k + l] * h[k][j][l];
                    }
                }
            }
        }
        Ok(f)
    }

    /// Problem data with `f` from [`source`](Self::source) and `u_D = u`.
    pub fn problem_data(&self, alpha: f64) -> Result<ProblemData> {
        let me = *self;
        let f: VectorFn = Arc::new(move |x| me.source(x));
        let g: VectorFn = Arc::new(move |x| Ok(me.u(x)));
        Ok(ProblemData::new(self.nf, alpha)?
            .with_source(f)
            .with_dirichlet(g))
    }
}
