//! Reference assembly of the LDG residual on a monomial basis, written
//! without the production lifting, projection or flux code.

#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use orlicz_ldg::dgspace::{BrokenField, DgSpace, Rank};
use orlicz_ldg::experiments::ExactSolution;
use orlicz_ldg::mesh::{Point, Rectangle, Triangulation};
use orlicz_ldg::orlicz::NFunction;
use orlicz_ldg::solver::LdgSystem;

type Mat2 = [[f64; 2]; 2];

const ORDER: usize = 8;

pub fn level_space(level: usize, k: usize) -> Arc<DgSpace> {
    let mesh = Triangulation::build_cartesian(Rectangle::square(-2.0, 2.0), 1.0, |_| true)
        .unwrap()
        .refined(level);
    Arc::new(DgSpace::new(Arc::new(mesh), k).unwrap())
}

/// Monomials `(x - x_c)^a (y - y_c)^b`, `a + b ≤ k`, and their gradients.
struct Monomials {
    center: Point,
    exps: Vec<(i32, i32)>,
}

impl Monomials {
    fn new(center: Point, k: usize) -> Self {
        let mut exps = Vec::new();
        for total in 0..=k as i32 {
            for a in (0..=total).rev() {
                exps.push((a, total - a));
            }
        }
        Monomials { center, exps }
    }

    fn len(&self) -> usize {
        self.exps.len()
    }

    fn eval(&self, x: Point) -> Vec<f64> {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        self.exps
            .iter()
            .map(|&(a, b)| dx.powi(a) * dy.powi(b))
            .collect()
    }

    fn grad(&self, x: Point) -> Vec<[f64; 2]> {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        self.exps
            .iter()
            .map(|&(a, b)| {
                let gx = if a > 0 {
                    a as f64 * dx.powi(a - 1) * dy.powi(b)
                } else {
                    0.0
                };
                let gy = if b > 0 {
                    b as f64 * dx.powi(a) * dy.powi(b - 1)
                } else {
                    0.0
                };
                [gx, gy]
            })
            .collect()
    }
}

/// Gaussian elimination with partial pivoting, several right-hand sides.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for j in col..n {
                m[row][j] -= f * m[col][j];
            }
            for r in 0..rhs[row].len() {
                rhs[row][r] -= f * rhs[col][r];
            }
        }
    }
    for col in (0..n).rev() {
        for r in 0..rhs[col].len() {
            let mut s = rhs[col][r];
            for j in col + 1..n {
                s -= m[col][j] * rhs[j][r];
            }
            rhs[col][r] = s / m[col][col];
        }
    }
    rhs
}

/// A vector field as monomial coefficients per cell: `coef[c][i][j]` for
/// component `i` and monomial `j`.
#[derive(Clone)]
pub struct MonoField {
    coef: Vec<[Vec<f64>; 2]>,
}

pub struct Oracle {
    space: Arc<DgSpace>,
    basis: Vec<Monomials>,
    /// Inverse-free: local mass matrices are solved on demand.
    mass: Vec<Vec<Vec<f64>>>,
    cell_q: Vec<(Vec<Point>, Vec<f64>)>,
    face_q: Vec<(Vec<Point>, Vec<f64>)>,
}

impl Oracle {
    pub fn new(space: Arc<DgSpace>) -> Self {
        let mesh = &space.mesh;
        let k = space.degree;
        let basis: Vec<Monomials> = (0..mesh.n_cells())
            .map(|c| Monomials::new(mesh.cell_centroid(c), k))
            .collect();
        let cell_q: Vec<_> = (0..mesh.n_cells())
            .map(|c| mesh.cell_quadrature(c, ORDER).unwrap())
            .collect();
        let face_q: Vec<_> = (0..mesh.n_faces())
            .map(|f| mesh.face_quadrature(f, ORDER).unwrap())
            .collect();
        let mass = (0..mesh.n_cells())
            .map(|c| {
                let n = basis[c].len();
                let mut m = vec![vec![0.0; n]; n];
                for (x, w) in cell_q[c].0.iter().zip(&cell_q[c].1) {
                    let v = basis[c].eval(*x);
                    for i in 0..n {
                        for j in 0..n {
                            m[i][j] += w * v[i] * v[j];
                        }
                    }
                }
                m
            })
            .collect();
        Oracle {
            space,
            basis,
            mass,
            cell_q,
            face_q,
        }
    }

    pub fn random_field(&self, amplitude: f64, seed: u64) -> MonoField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef = self
            .basis
            .iter()
            .map(|b| {
                std::array::from_fn(|_| {
                    (0..b.len())
                        .map(|_| amplitude * rng.gen_range(-1.0..1.0))
                        .collect()
                })
            })
            .collect();
        MonoField { coef }
    }

    fn value(&self, u: &MonoField, c: usize, x: Point) -> [f64; 2] {
        let v = self.basis[c].eval(x);
        std::array::from_fn(|i| u.coef[c][i].iter().zip(&v).map(|(a, b)| a * b).sum())
    }

    fn gradient(&self, u: &MonoField, c: usize, x: Point) -> Mat2 {
        let g = self.basis[c].grad(x);
        std::array::from_fn(|i| {
            std::array::from_fn(|l| u.coef[c][i].iter().zip(&g).map(|(a, b)| a * b[l]).sum())
        })
    }

    /// The same field in the production basis (exact for polynomials).
    pub fn to_production(&self, u: &MonoField) -> BrokenField {
        BrokenField::project(&self.space, self.space.degree, Rank::Vector, |c, x, out| {
            out.copy_from_slice(&self.value(u, c, x));
        })
        .unwrap()
    }

    /// Lifting of the jumps of `u` (minus `g` on the boundary): per cell,
    /// monomial coefficients `[i][l][j]`.
    fn lifting(
        &self,
        u: &MonoField,
        g: Option<&dyn Fn(Point) -> [f64; 2]>,
    ) -> Vec<[[Vec<f64>; 2]; 2]> {
        let mesh = &self.space.mesh;
        let mut rhs: Vec<Vec<Vec<f64>>> = (0..mesh.n_cells())
            .map(|c| vec![vec![0.0; 4]; self.basis[c].len()])
            .collect();
        for (f, face) in mesh.faces.iter().enumerate() {
            let right = face.right_cell();
            let theta = if right.is_some() { 0.5 } else { 1.0 };
            let n = face.normal;
            let (pts, wts) = &self.face_q[f];
            for (x, w) in pts.iter().zip(wts) {
                let ul = self.value(u, face.left, *x);
                let ur = match right {
                    Some(r) => self.value(u, r, *x),
                    None => g.map(|g| g(*x)).unwrap_or([0.0, 0.0]),
                };
                let jump = [
                    [(ul[0] - ur[0]) * n[0], (ul[0] - ur[0]) * n[1]],
                    [(ul[1] - ur[1]) * n[0], (ul[1] - ur[1]) * n[1]],
                ];
                for c in std::iter::once(face.left).chain(right) {
                    let phi = self.basis[c].eval(*x);
                    for (j, ph) in phi.iter().enumerate() {
                        for comp in 0..4 {
                            rhs[c][j][comp] += theta * w * ph * jump[comp / 2][comp % 2];
                        }
                    }
                }
            }
        }
        rhs.into_iter()
            .enumerate()
            .map(|(c, r)| {
                let sol = solve_dense(self.mass[c].clone(), r);
                std::array::from_fn(|i| {
                    std::array::from_fn(|l| sol.iter().map(|row| row[2 * i + l]).collect())
                })
            })
            .collect()
    }

    fn lift_value(lift: &[[Vec<f64>; 2]; 2], phi: &[f64]) -> Mat2 {
        std::array::from_fn(|i| {
            std::array::from_fn(|l| lift[i][l].iter().zip(phi).map(|(a, b)| a * b).sum())
        })
    }

    /// `b(u)(z) - ℓ(z)` for the manufactured problem with exponent `p`.
    pub fn residual_pairing(
        &self,
        ex: &ExactSolution,
        alpha: f64,
        u: &MonoField,
        z: &MonoField,
    ) -> (f64, f64) {
        let mesh = &self.space.mesh;
        let (p, delta) = (ex.nf.p(), ex.nf.delta());
        let h = self.space.h();
        let ud = |x: Point| ex.u(x);
        let lu = self.lifting(u, Some(&ud));
        let lz = self.lifting(z, None);
        let a_map = |m: Mat2, shift: f64| -> Mat2 {
            let r = (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1])
                .sqrt();
            let s = (delta + shift + r).powf(p - 2.0);
            [[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]]
        };
        let frob = |a: Mat2, b: Mat2| {
            a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
        };

        let mut volume = 0.0;
        let mut load = 0.0;
        let mut means = vec![[[0.0; 2]; 2]; mesh.n_cells()];
        for c in 0..mesh.n_cells() {
            let (pts, wts) = &self.cell_q[c];
            let area: f64 = wts.iter().sum();
            for (x, w) in pts.iter().zip(wts) {
                let phi = self.basis[c].eval(*x);
                let ru = Self::lift_value(&lu[c], &phi);
                let rz = Self::lift_value(&lz[c], &phi);
                let gu = self.gradient(u, c, *x);
                let gz = self.gradient(z, c, *x);
                let l: Mat2 = std::array::from_fn(|i| std::array::from_fn(|j| gu[i][j] - ru[i][j]));
                let g: Mat2 = std::array::from_fn(|i| std::array::from_fn(|j| gz[i][j] - rz[i][j]));
                volume += w * frob(a_map(l, 0.0), g);
                let f = ex.source(*x).unwrap();
                let zv = self.value(z, c, *x);
                load += w * (f[0] * zv[0] + f[1] * zv[1]);
                for i in 0..2 {
                    for j in 0..2 {
                        means[c][i][j] += w * l[i][j] / area;
                    }
                }
            }
        }

        let mut faces = 0.0;
        for (f, face) in mesh.faces.iter().enumerate() {
            let right = face.right_cell();
            let mean = match right {
                Some(r) => std::array::from_fn(|i| {
                    std::array::from_fn(|j| 0.5 * (means[face.left][i][j] + means[r][i][j]))
                }),
                None => means[face.left],
            };
            let shift = frob(mean, mean).sqrt();
            let n = face.normal;
            let (pts, wts) = &self.face_q[f];
            for (x, w) in pts.iter().zip(wts) {
                let (ul, zl) = (self.value(u, face.left, *x), self.value(z, face.left, *x));
                let (ur, zr) = match right {
                    Some(r) => (self.value(u, r, *x), self.value(z, r, *x)),
                    None => (ud(*x), [0.0, 0.0]),
                };
                let ju: Mat2 =
                    std::array::from_fn(|i| std::array::from_fn(|j| (ul[i] - ur[i]) * n[j] / h));
                let jz: Mat2 =
                    std::array::from_fn(|i| std::array::from_fn(|j| (zl[i] - zr[i]) * n[j]));
                faces += w * frob(a_map(ju, shift), jz);
            }
        }
        let total = volume + alpha * faces - load;
        (total, volume.abs() + alpha * faces.abs() + load.abs())
    }
}

/// Largest relative deviation of `⟨r(u), z⟩` between the production
/// residual and the oracle over `fields` random pairs.
pub fn residual_oracle_error(p: f64, fields: usize, seed: u64) -> f64 {
    let space = level_space(1, 1);
    let ex = ExactSolution::new(0.01, NFunction::new(p, 1e-3).unwrap());
    let alpha = orlicz_ldg::orlicz::default_alpha(p).unwrap();
    let system = LdgSystem::new(space.clone(), ex.problem_data(alpha).unwrap()).unwrap();
    let oracle = Oracle::new(space);
    let mut worst: f64 = 0.0;
    for i in 0..fields as u64 {
        let u = oracle.random_field(1.0, seed + 2 * i);
        let z = oracle.random_field(1.0, seed + 2 * i + 1);
        let r = system.residual(&oracle.to_production(&u).coeffs).unwrap();
        let zp = oracle.to_production(&z);
        let production: f64 = r.iter().zip(&zp.coeffs).map(|(a, b)| a * b).sum();
        let (reference, scale) = oracle.residual_pairing(&ex, alpha, &u, &z);
        worst = worst.max((production - reference).abs() / scale);
    }
    worst
}
