//! BiCGSTAB with an ILU(0) preconditioner.

use serde::{Deserialize, Serialize};

use crate::error::{LdgError, Result};

use super::sparse::{dot, norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolverOptions {
    /// Target relative residual `‖A d + r‖ / ‖r‖`.
    pub rel_tol: f64,
    /// Largest relative residual still reported as success when the
    /// target is not reached.
    pub accept_tol: f64,
    pub max_iter: usize,
}

impl Default for LinearSolverOptions {
    fn default() -> Self {
        LinearSolverOptions {
            rel_tol: 1e-10,
            accept_tol: 1e-10,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            if let Ok(k) = lu.col_idx[s..e].binary_search(&i) {
                diag[i] = s + k;
            } else {
                return Err(LdgError::Internal(format!(
                    "ILU(0): missing diagonal in row {i}"
                )));
            }
        }
        // Row-wise IKJ variant; `pos` maps column -> index within row i.
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in s..e {
                pos[lu.col_idx[k]] = k;
            }
            for kk in s..e {
                let k = lu.col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = lu.values[diag[k]];
                if pivot == 0.0 {
                    return Err(LdgError::Internal(format!("ILU(0): zero pivot in row {k}")));
                }
                let lik = lu.values[kk] / pivot;
                lu.values[kk] = lik;
                for jj in (diag[k] + 1)..lu.row_ptr[k + 1] {
                    let j = lu.col_idx[jj];
                    let p = pos[j];
                    if p != usize::MAX {
                        lu.values[p] -= lik * lu.values[jj];
                    }
                }
            }
            for k in s..e {
                pos[lu.col_idx[k]] = usize::MAX;
            }
            if lu.values[diag[i]] == 0.0 {
                return Err(LdgError::Internal(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// `y = (LU)^{-1} x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.lu.n;
        y.copy_from_slice(x);
        for i in 0..n {
            let mut s = y[i];
            for k in self.lu.row_ptr[i]..self.diag[i] {
                s -= self.lu.values[k] * y[self.lu.col_idx[k]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (self.diag[i] + 1)..self.lu.row_ptr[i + 1] {
                s -= self.lu.values[k] * y[self.lu.col_idx[k]];
            }
            y[i] = s / self.lu.values[self.diag[i]];
        }
    }
}

/// Solves `A d = -r` by right-preconditioned BiCGSTAB with ILU(0).
pub fn linear_solve(
    a: &CsrMatrix,
    r: &[f64],
    opts: &LinearSolverOptions,
) -> Result<(Vec<f64>, LinearSolveStats)> {
    let b: Vec<f64> = r.iter().map(|v| -v).collect();
    let (x, stats) = bicgstab(a, &b, opts)?;
    Ok((x, stats))
}

/// Right-preconditioned BiCGSTAB for `A x = b`, starting from zero.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    opts: &LinearSolverOptions,
) -> Result<(Vec<f64>, LinearSolveStats)> {
    let n = a.n;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            LinearSolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let m = Ilu0::new(a)?;
    let mut best = (x.clone(), f64::INFINITY);
    let mut total_iters = 0;
    // A few restarts from the current iterate guard against breakdown.
    for _restart in 0..4 {
        let ax = a.mul(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut phat = vec![0.0; n];
        let mut shat = vec![0.0; n];
        let mut t = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut breakdown = false;
        while total_iters < opts.max_iter {
            total_iters += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 {
                breakdown = true;
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            m.apply(&p, &mut phat);
            a.mul_vec(&phat, &mut v);
            let denom = dot(&r_hat, &v);
            if denom.abs() < 1e-300 {
                breakdown = true;
                break;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            let snorm = norm2(&s);
            if snorm / bnorm <= opts.rel_tol {
                for i in 0..n {
                    x[i] += alpha * phat[i];
                }
                r.copy_from_slice(&s);
                break;
            }
            m.apply(&s, &mut shat);
            a.mul_vec(&shat, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * phat[i] + omega * shat[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm2(&r) / bnorm <= opts.rel_tol {
                break;
            }
            if omega == 0.0 {
                breakdown = true;
                break;
            }
        }
        // True residual check.
        let ax = a.mul(&x);
        let res = b
            .iter()
            .zip(&ax)
            .map(|(bi, ai)| (bi - ai).powi(2))
            .sum::<f64>()
            .sqrt()
            / bnorm;
        if res < best.1 {
            best = (x.clone(), res);
        }
        if res <= opts.rel_tol {
            return Ok((
                x,
                LinearSolveStats {
                    iterations: total_iters,
                    relative_residual: res,
                },
            ));
        }
        if total_iters >= opts.max_iter {
            break;
        }
        let _ = breakdown;
    }
    if best.1 <= opts.accept_tol.max(opts.rel_tol) {
        return Ok((
            best.0,
            LinearSolveStats {
                iterations: total_iters,
                relative_residual: best.1,
            },
        ));
    }
    Err(LdgError::LinearSolver {
        iterations: total_iters,
        residual: best.1,
    })
}
