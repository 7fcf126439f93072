use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A real 2×2 matrix, stored row-major: `P[i][l] = self.0[2 * i + l]`.
///
/// Rows index the vector component, columns the spatial direction, so the
/// gradient of a vector field `u` is `P[i][l] = ∂_l u_i`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor2(pub [f64; 4]);

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2([0.0; 4]);
    pub const IDENTITY: Tensor2 = Tensor2([1.0, 0.0, 0.0, 1.0]);

    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Self {
        Tensor2([p00, p01, p10, p11])
    }

    #[inline]
    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.0[2 * i + l]
    }

    /// `u ⊗ n`.
    #[inline]
    pub fn outer(u: [f64; 2], n: [f64; 2]) -> Self {
        Tensor2([u[0] * n[0], u[0] * n[1], u[1] * n[0], u[1] * n[1]])
    }

    /// Frobenius product `P : Q`.
    #[inline]
    pub fn dot(&self, other: &Tensor2) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    /// Frobenius norm `|P|`.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        Tensor2(self.0.map(|v| v * s))
    }

    /// Matrix-vector product `P v`.
    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0] * v[0] + self.0[1] * v[1],
            self.0[2] * v[0] + self.0[3] * v[1],
        ]
    }

    pub fn transpose(&self) -> Self {
        Tensor2([self.0[0], self.0[2], self.0[1], self.0[3]])
    }

    /// Product of two 2×2 matrices.
    pub fn matmul(&self, other: &Tensor2) -> Self {
        let a = &self.0;
        let b = &other.0;
        Tensor2([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, rhs: Tensor2) -> Tensor2 {
        Tensor2(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, rhs: Tensor2) -> Tensor2 {
        Tensor2(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, s: f64) -> Tensor2 {
        self.scale(s)
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, rhs: Tensor2) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl SubAssign for Tensor2 {
    fn sub_assign(&mut self, rhs: Tensor2) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
    }
}

/// A linear map on 2×2 matrices (a fourth-order tensor), acting on the
/// flattened row-major storage of [`Tensor2`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tensor4(pub [[f64; 4]; 4]);

impl Tensor4 {
    pub fn identity() -> Self {
        Self::scaled_identity(1.0)
    }

    pub fn scaled_identity(s: f64) -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = s;
        }
        Tensor4(m)
    }

    /// `s I + c P ⊗ P`.
    #[inline]
    pub fn identity_plus_rank_one(s: f64, c: f64, p: &Tensor2) -> Self {
        let mut m = [[0.0; 4]; 4];
        for (a, row) in m.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = c * p.0[a] * p.0[b];
            }
            row[a] += s;
        }
        Tensor4(m)
    }

    /// `DA[Q]`.
    #[inline]
    pub fn apply(&self, q: &Tensor2) -> Tensor2 {
        Tensor2(std::array::from_fn(|a| {
            (0..4).map(|b| self.0[a][b] * q.0[b]).sum()
        }))
    }

    /// The bilinear form `DA[Q] : R`.
    pub fn form(&self, q: &Tensor2, r: &Tensor2) -> f64 {
        self.apply(q).dot(r)
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                d = d.max((self.0[a][b] - self.0[b][a]).abs());
            }
        }
        d
    }
}
