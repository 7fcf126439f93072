//! Residual and Jacobian of the primal LDG formulation.
//!
//! With `L_h = G_h^k u_h + R_h^k u_D*` the residual tested with `z_h` reads
//!
//! ```text
//! (A(L_h), G_h^k z_h) + α ⟨A_a(h⁻¹⟦(u_h - u_D*)⊗n⟧), ⟦z_h⊗n⟧⟩ - (f, z_h) - (F, G_h^k z_h) - ⟨a_N, z_h⟩_{Γ_N}
//! ```
//!
//! Since `G_h^k z_h ∈ X_h^k`, the first term equals `(Π_h^k A(L_h), G_h^k z_h)`,
//! so the volume part is `Gᵀ A_h` with the cell-local matrices of `G_h^k`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgspace::{BrokenField, DgSpace, Rank};
use crate::error::{LdgError, Result};
use crate::mesh::{BoundaryTag, Neighbor, Point};
use crate::operators::{average_weight, lift_jump_data, LiftingAssembly};
use crate::orlicz::{
    default_eps, op_a, op_a_jacobian, op_a_shifted, op_a_shifted_jacobian,
    op_a_shifted_shift_derivative, NFunction, Tensor2,
};

use super::sparse::CsrMatrix;

/// Vector-valued data callback.
pub type VectorFn = Arc<dyn Fn(Point) -> Result<[f64; 2]> + Send + Sync>;
/// Tensor-valued data callback.
pub type TensorFn = Arc<dyn Fn(Point) -> Result<Tensor2> + Send + Sync>;

/// Treatment of the face shift `a_γ = |{Π⁰ L_h}|` in the Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftMode {
    /// The shift is frozen at the current iterate.
    #[default]
    Lagged,
    /// The derivative of the shift is included.
    Full,
}

impl std::str::FromStr for ShiftMode {
    type Err = LdgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lagged" => Ok(ShiftMode::Lagged),
            "full" => Ok(ShiftMode::Full),
            _ => Err(LdgError::Usage(format!(
                "unknown shift mode '{s}' (expected lagged or full)"
            ))),
        }
    }
}

/// Coefficients of the boundary value problem.
#[derive(Clone)]
pub struct ProblemData {
    pub nf: NFunction,
    /// Stabilization parameter `α > 0`.
    pub alpha: f64,
    /// Volume source `f`; `None` means zero.
    pub source: Option<VectorFn>,
    /// Tensor source `F`; `None` means zero.
    pub tensor_source: Option<TensorFn>,
    /// Dirichlet datum `u_D`; `None` means zero.
    pub dirichlet: Option<VectorFn>,
    /// Neumann datum `a_N`; `None` means zero.
    pub neumann: Option<VectorFn>,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("nf", &self.nf)
            .field("alpha", &self.alpha)
            .field("source", &self.source.is_some())
            .field("tensor_source", &self.tensor_source.is_some())
            .field("dirichlet", &self.dirichlet.is_some())
            .field("neumann", &self.neumann.is_some())
            .finish()
    }
}

impl ProblemData {
    pub fn new(nf: NFunction, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(LdgError::Config(format!(
                "stabilization alpha must be positive, got {alpha}"
            )));
        }
        Ok(ProblemData {
            nf,
            alpha,
            source: None,
            tensor_source: None,
            dirichlet: None,
            neumann: None,
        })
    }

    pub fn with_source(mut self, f: VectorFn) -> Self {
        self.source = Some(f);
        self
    }

    pub fn with_tensor_source(mut self, f: TensorFn) -> Self {
        self.tensor_source = Some(f);
        self
    }

    pub fn with_dirichlet(mut self, g: VectorFn) -> Self {
        self.dirichlet = Some(g);
        self
    }

    pub fn with_neumann(mut self, g: VectorFn) -> Self {
        self.neumann = Some(g);
        self
    }
}

/// Cell-local matrix of `G_h^k`: maps the coefficients of `u_h` on `cells`
/// (each `2 × nb`) to the `4 × nb` coefficients of `G_h^k u_h` on `cells[0]`.
#[derive(Debug, Clone)]
pub struct GradientStencil {
    pub cells: Vec<usize>,
    /// Row-major, `4 nb` rows and `2 nb · cells.len()` columns.
    pub matrix: Vec<f64>,
    n_cols: usize,
}

impl GradientStencil {
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
}

/// Nonlinear operator of the discrete problem with all precomputed data.
pub struct LdgSystem {
    pub space: Arc<DgSpace>,
    pub data: ProblemData,
    pub stencils: Vec<GradientStencil>,
    /// `R_h^k u_D*`.
    pub boundary_lift: BrokenField,
    /// `u_D` at the quadrature points of Dirichlet faces.
    pub dirichlet_values: Vec<Option<Vec<[f64; 2]>>>,
    /// Coefficient vector of `b_h`.
    pub load: Vec<f64>,
    /// Mesh parameter entering `h⁻¹⟦·⟧`.
    pub h: f64,
}

/// Per-iterate quantities shared by residual and Jacobian.
#[derive(Debug, Clone)]
pub struct State {
    /// `L_h` coefficients, `4 nb` per cell.
    pub l: Vec<f64>,
    /// `a_γ` per face (zero on Neumann faces).
    pub shifts: Vec<f64>,
    /// `{Π⁰ L_h}_γ` per face.
    pub face_means: Vec<Tensor2>,
}

fn eval_all(f: &VectorFn, points: &[Point]) -> Result<Vec<[f64; 2]>> {
    points.iter().map(|x| f(*x)).collect()
}

impl LdgSystem {
    pub fn new(space: Arc<DgSpace>, data: ProblemData) -> Result<Self> {
        let lifting = LiftingAssembly::new(&space);
        let mesh = &space.mesh;

        let stencils: Vec<GradientStencil> = (0..space.n_cells())
            .into_par_iter()
            .map(|c| build_stencil(&space, &lifting, c))
            .collect();

        let dirichlet_values: Vec<Option<Vec<[f64; 2]>>> = (0..space.n_faces())
            .into_par_iter()
            .map(|f| -> Result<Option<Vec<[f64; 2]>>> {
                if mesh.faces[f].tag() != Some(BoundaryTag::Dirichlet) {
                    return Ok(None);
                }
                let pts = &space.faces[f].points;
                match &data.dirichlet {
                    Some(g) => eval_all(g, pts).map(Some),
                    None => Ok(Some(vec![[0.0; 2]; pts.len()])),
                }
            })
            .collect::<Result<_>>()?;

        let boundary_lift = lift_jump_data(&space, space.degree, |f| {
            let fd = &space.faces[f];
            Ok(dirichlet_values[f]
                .as_ref()
                .map(|vals| vals.iter().map(|g| Tensor2::outer(*g, fd.normal)).collect()))
        })?;

        let mut sys = LdgSystem {
            h: space.h(),
            space,
            data,
            stencils,
            boundary_lift,
            dirichlet_values,
            load: Vec::new(),
        };
        sys.load = sys.assemble_load()?;
        debug_assert_eq!(sys.load.len(), sys.n_dofs());
        Ok(sys)
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_cells() * 2 * self.space.nb()
    }

    fn block(&self) -> usize {
        2 * self.space.nb()
    }

    /// `(f, z) + (F, G z) + ⟨a_N, z⟩_{Γ_N}` for every basis function `z`.
    fn assemble_load(&self) -> Result<Vec<f64>> {
        let space = &self.space;
        let nb = space.nb();
        let bs = self.block();
        let mut load = vec![0.0; self.n_dofs()];

        if let Some(f) = &self.data.source {
            let blocks: Vec<Vec<f64>> = (0..space.n_cells())
                .into_par_iter()
                .map(|c| -> Result<Vec<f64>> {
                    let cd = &space.cells[c];
                    let mut block = vec![0.0; bs];
                    for (q, (x, w)) in cd.points.iter().zip(&cd.weights).enumerate() {
                        let v = f(*x)?;
                        for i in 0..2 {
                            for b in 0..nb {
                                block[i * nb + b] += w * v[i] * cd.phi[q * nb + b];
                            }
                        }
                    }
                    Ok(block)
                })
                .collect::<Result<_>>()?;
            for (c, block) in blocks.iter().enumerate() {
                for (d, v) in load[c * bs..(c + 1) * bs].iter_mut().zip(block) {
                    *d += v;
                }
            }
        }

        if let Some(ft) = &self.data.tensor_source {
            // Π_h^k F per cell, then Gᵀ.
            let projected: Vec<Vec<f64>> = (0..space.n_cells())
                .into_par_iter()
                .map(|c| -> Result<Vec<f64>> {
                    let cd = &space.cells[c];
                    let mut block = vec![0.0; 4 * nb];
                    for (q, (x, w)) in cd.points.iter().zip(&cd.weights).enumerate() {
                        let v = ft(*x)?;
                        for comp in 0..4 {
                            for b in 0..nb {
                                block[comp * nb + b] += w * v.0[comp] * cd.phi[q * nb + b];
                            }
                        }
                    }
                    Ok(block)
                })
                .collect::<Result<_>>()?;
            self.scatter_transpose(&projected, &mut load);
        }

        if let Some(an) = &self.data.neumann {
            for (f, face) in space.mesh.faces.iter().enumerate() {
                if face.tag() != Some(BoundaryTag::Neumann) {
                    continue;
                }
                let fd = &space.faces[f];
                let c = fd.left;
                for (q, (x, w)) in fd.points.iter().zip(&fd.weights).enumerate() {
                    let v = an(*x)?;
                    for i in 0..2 {
                        for b in 0..nb {
                            load[c * bs + i * nb + b] += w * v[i] * fd.phi_left[q * nb + b];
                        }
                    }
                }
            }
        }
        Ok(load)
    }

    /// `out += Σ_K S_Kᵀ x_K` for per-cell tensor coefficient blocks `x_K`.
    fn scatter_transpose(&self, x: &[Vec<f64>], out: &mut [f64]) {
        let bs = self.block();
        let contributions: Vec<Vec<f64>> = self
            .stencils
            .par_iter()
            .zip(x)
            .map(|(st, xk)| {
                let ncols = st.n_cols();
                let mut y = vec![0.0; ncols];
                for (row, xv) in xk.iter().enumerate() {
                    if *xv == 0.0 {
                        continue;
                    }
                    let r = &st.matrix[row * ncols..(row + 1) * ncols];
                    for (yj, a) in y.iter_mut().zip(r) {
                        *yj += a * xv;
                    }
                }
                y
            })
            .collect();
        for (st, y) in self.stencils.iter().zip(&contributions) {
            for (s, &cell) in st.cells.iter().enumerate() {
                for (d, v) in out[cell * bs..(cell + 1) * bs]
                    .iter_mut()
                    .zip(&y[s * bs..(s + 1) * bs])
                {
                    *d += v;
                }
            }
        }
    }

    /// `L_h = G_h^k u_h + R_h^k u_D*` and the face shifts.
    pub fn state(&self, u: &[f64]) -> Result<State> {
        if u.len() != self.n_dofs() {
            return Err(LdgError::Config(format!(
                "state vector has length {}, expected {}",
                u.len(),
                self.n_dofs()
            )));
        }
        let space = &self.space;
        let nb = space.nb();
        let bs = self.block();
        let l: Vec<f64> = self
            .stencils
            .par_iter()
            .enumerate()
            .flat_map_iter(|(c, st)| {
                let ncols = st.n_cols();
                let rd = self.boundary_lift.cell(c);
                (0..4 * nb).map(move |row| {
                    let r = &st.matrix[row * ncols..(row + 1) * ncols];
                    let mut s = rd[row];
                    for (k, &cell) in st.cells.iter().enumerate() {
                        let uc = &u[cell * bs..(cell + 1) * bs];
                        s += r[k * bs..(k + 1) * bs]
                            .iter()
                            .zip(uc)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    }
                    s
                })
            })
            .collect();
        let means: Vec<Tensor2> = (0..space.n_cells())
            .map(|c| {
                let s = space.cells[c].constant_mode();
                Tensor2(std::array::from_fn(|comp| l[c * 4 * nb + comp * nb] * s))
            })
            .collect();
        let face_means: Vec<Tensor2> = (0..space.n_faces())
            .map(|f| {
                let fd = &space.faces[f];
                match (average_weight(space, f), fd.right) {
                    (None, _) => Tensor2::ZERO,
                    (Some(_), Some(r)) => (means[fd.left] + means[r]).scale(0.5),
                    (Some(_), None) => means[fd.left],
                }
            })
            .collect();
        let shifts = face_means.iter().map(Tensor2::norm).collect();
        Ok(State {
            l,
            shifts,
            face_means,
        })
    }

    /// `h⁻¹⟦(u_h - u_D*)⊗n⟧` at the quadrature points of face `f`.
    fn scaled_jump(&self, u: &[f64], f: usize) -> Vec<Tensor2> {
        let space = &self.space;
        let nb = space.nb();
        let bs = self.block();
        let fd = &space.faces[f];
        let inv_h = 1.0 / self.h;
        let trace = |c: usize, phi: &[f64], q: usize| -> [f64; 2] {
            let uc = &u[c * bs..(c + 1) * bs];
            let row = &phi[q * nb..(q + 1) * nb];
            std::array::from_fn(|i| {
                uc[i * nb..(i + 1) * nb]
                    .iter()
                    .zip(row)
                    .map(|(a, b)| a * b)
                    .sum()
            })
        };
        (0..fd.n_points())
            .map(|q| {
                let ul = trace(fd.left, &fd.phi_left, q);
                let ur = match fd.right {
                    Some(r) => trace(r, &fd.phi_right, q),
                    None => self.dirichlet_values[f]
                        .as_ref()
                        .map(|v| v[q])
                        .unwrap_or([0.0; 2]),
                };
                Tensor2::outer([ul[0] - ur[0], ul[1] - ur[1]], fd.normal).scale(inv_h)
            })
            .collect()
    }

    /// `L_h` at quadrature point `q` of cell `c`.
    fn l_at_qp(&self, state: &State, c: usize, q: usize) -> Tensor2 {
        let nb = self.space.nb();
        let lc = &state.l[c * 4 * nb..(c + 1) * 4 * nb];
        let phi = &self.space.cells[c].phi[q * nb..(q + 1) * nb];
        Tensor2(std::array::from_fn(|comp| {
            lc[comp * nb..(comp + 1) * nb]
                .iter()
                .zip(phi)
                .map(|(a, b)| a * b)
                .sum()
        }))
    }

    /// `A_h = Π_h^k A(L_h)`, `4 nb` coefficients per cell.
    pub fn flux_coefficients(&self, state: &State) -> Vec<Vec<f64>> {
        let space = &self.space;
        let nb = space.nb();
        (0..space.n_cells())
            .into_par_iter()
            .map(|c| {
                let cd = &space.cells[c];
                let mut block = vec![0.0; 4 * nb];
                for (q, w) in cd.weights.iter().enumerate() {
                    let a = op_a(&self.data.nf, &self.l_at_qp(state, c, q));
                    let phi = &cd.phi[q * nb..(q + 1) * nb];
                    for comp in 0..4 {
                        let wa = w * a.0[comp];
                        for b in 0..nb {
                            block[comp * nb + b] += wa * phi[b];
                        }
                    }
                }
                block
            })
            .collect()
    }

    /// Residual `B_h u_h - b_h`.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let state = self.state(u)?;
        self.residual_with_shifts(u, &state, &state.shifts)
    }

    /// Residual with the face shifts taken from `shifts` instead of `u`.
    pub fn residual_with_shifts(
        &self,
        u: &[f64],
        state: &State,
        shifts: &[f64],
    ) -> Result<Vec<f64>> {
        let space = &self.space;
        let nb = space.nb();
        let bs = self.block();
        let mut r = vec![0.0; self.n_dofs()];
        let a_h = self.flux_coefficients(state);
        self.scatter_transpose(&a_h, &mut r);

        let alpha = self.data.alpha;
        let faces: Vec<Option<(Vec<f64>, Vec<f64>)>> = (0..space.n_faces())
            .into_par_iter()
            .map(|f| {
                average_weight(space, f)?;
                let fd = &space.faces[f];
                let jumps = self.scaled_jump(u, f);
                let mut left = vec![0.0; bs];
                let mut right = vec![0.0; if fd.right.is_some() { bs } else { 0 }];
                for (q, j) in jumps.iter().enumerate() {
                    let an = op_a_shifted(&self.data.nf, shifts[f], j).apply(fd.normal);
                    let w = alpha * fd.weights[q];
                    for i in 0..2 {
                        for b in 0..nb {
                            left[i * nb + b] += w * an[i] * fd.phi_left[q * nb + b];
                        }
                    }
                    if fd.right.is_some() {
                        for i in 0..2 {
                            for b in 0..nb {
                                right[i * nb + b] -= w * an[i] * fd.phi_right[q * nb + b];
                            }
                        }
                    }
                }
                Some((left, right))
            })
            .collect();
        for (f, entry) in faces.into_iter().enumerate() {
            let Some((left, right)) = entry else { continue };
            let fd = &space.faces[f];
            for (d, v) in r[fd.left * bs..(fd.left + 1) * bs].iter_mut().zip(&left) {
                *d += v;
            }
            if let Some(c) = fd.right {
                for (d, v) in r[c * bs..(c + 1) * bs].iter_mut().zip(&right) {
                    *d += v;
                }
            }
        }
        for (ri, li) in r.iter_mut().zip(&self.load) {
            *ri -= li;
        }
        Ok(r)
    }

    /// Jacobian of [`residual`](Self::residual) at `u`.
    pub fn jacobian(&self, u: &[f64], mode: ShiftMode) -> Result<CsrMatrix> {
        let state = self.state(u)?;
        let space = &self.space;
        let nb = space.nb();
        let bs = self.block();
        let nf = &self.data.nf;

        // Volume: S_Kᵀ M_K S_K with M_K = Σ_q w φ_b φ_b' DA(L_h(x_q)).
        let volume: Vec<Vec<(usize, usize, f64)>> = (0..space.n_cells())
            .into_par_iter()
            .map(|c| -> Result<Vec<(usize, usize, f64)>> {
                let cd = &space.cells[c];
                let n4 = 4 * nb;
                let mut m = vec![0.0; n4 * n4];
                for (q, w) in cd.weights.iter().enumerate() {
                    let l = self.l_at_qp(&state, c, q);
                    let da = op_a_jacobian(nf, &l, default_eps(&l))?;
                    let phi = &cd.phi[q * nb..(q + 1) * nb];
                    for a in 0..4 {
                        for a2 in 0..4 {
                            let d = w * da.0[a][a2];
                            if d == 0.0 {
                                continue;
                            }
                            for b in 0..nb {
                                let db = d * phi[b];
                                let row = &mut m
                                    [(a * nb + b) * n4 + a2 * nb..(a * nb + b) * n4 + a2 * nb + nb];
                                for (mv, pb) in row.iter_mut().zip(phi) {
                                    *mv += db * pb;
                                }
                            }
                        }
                    }
                }
                let st = &self.stencils[c];
                let ncols = st.n_cols();
                // t = M S
                let mut t = vec![0.0; n4 * ncols];
                for row in 0..n4 {
                    for k in 0..n4 {
                        let mv = m[row * n4 + k];
                        if mv == 0.0 {
                            continue;
                        }
                        let srow = &st.matrix[k * ncols..(k + 1) * ncols];
                        for (tv, sv) in t[row * ncols..(row + 1) * ncols].iter_mut().zip(srow) {
                            *tv += mv * sv;
                        }
                    }
                }
                // Sᵀ t
                let mut k_local = vec![0.0; ncols * ncols];
                for row in 0..n4 {
                    let srow = &st.matrix[row * ncols..(row + 1) * ncols];
                    let trow = &t[row * ncols..(row + 1) * ncols];
                    for (i, si) in srow.iter().enumerate() {
                        if *si == 0.0 {
                            continue;
                        }
                        for (kv, tv) in k_local[i * ncols..(i + 1) * ncols].iter_mut().zip(trow) {
                            *kv += si * tv;
                        }
                    }
                }
                let global = |i: usize| st.cells[i / bs] * bs + i % bs;
                let mut trip = Vec::with_capacity(ncols * ncols);
                for i in 0..ncols {
                    for j in 0..ncols {
                        let v = k_local[i * ncols + j];
                        if v != 0.0 {
                            trip.push((global(i), global(j), v));
                        }
                    }
                }
                Ok(trip)
            })
            .collect::<Result<_>>()?;

        // Faces: α/h ∫ DA_a(J)[⟦δu⊗n⟧] : ⟦z⊗n⟧, plus the shift derivative in full mode.
        let alpha = self.data.alpha;
        let inv_h = 1.0 / self.h;
        let faces: Vec<Vec<(usize, usize, f64)>> = (0..space.n_faces())
            .into_par_iter()
            .map(|f| -> Result<Vec<(usize, usize, f64)>> {
                if average_weight(space, f).is_none() {
                    return Ok(Vec::new());
                }
                let fd = &space.faces[f];
                let cells: Vec<usize> = std::iter::once(fd.left).chain(fd.right).collect();
                let n = cells.len() * bs;
                let a = state.shifts[f];
                let jumps = self.scaled_jump(u, f);
                let nrm = fd.normal;
                let mut k_local = vec![0.0; n * n];
                let mut v_z = vec![0.0; n];
                let side = |s: usize| {
                    if s == 0 {
                        (&fd.phi_left, 1.0)
                    } else {
                        (&fd.phi_right, -1.0)
                    }
                };
                for (q, j) in jumps.iter().enumerate() {
                    let da = op_a_shifted_jacobian(nf, a, j, default_eps(j))?;
                    // B[i][i'] = Σ_{l,l'} DA[(i,l)][(i',l')] n_l n_l'
                    let mut bm = [[0.0; 2]; 2];
                    for (i, brow) in bm.iter_mut().enumerate() {
                        for (i2, bv) in brow.iter_mut().enumerate() {
                            for l in 0..2 {
                                for l2 in 0..2 {
                                    *bv += da.0[2 * i + l][2 * i2 + l2] * nrm[l] * nrm[l2];
                                }
                            }
                        }
                    }
                    let w = alpha * inv_h * fd.weights[q];
                    for s in 0..cells.len() {
                        let (phi_s, sig_s) = side(s);
                        for s2 in 0..cells.len() {
                            let (phi_s2, sig_s2) = side(s2);
                            let ws = w * sig_s * sig_s2;
                            for i in 0..2 {
                                for i2 in 0..2 {
                                    let c = ws * bm[i][i2];
                                    for b in 0..nb {
                                        let cb = c * phi_s[q * nb + b];
                                        let row = s * bs + i * nb + b;
                                        for b2 in 0..nb {
                                            k_local[row * n + s2 * bs + i2 * nb + b2] +=
                                                cb * phi_s2[q * nb + b2];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if mode == ShiftMode::Full {
                        let dn = op_a_shifted_shift_derivative(nf, a, j).apply(nrm);
                        let w = alpha * fd.weights[q];
                        for s in 0..cells.len() {
                            let (phi_s, sig_s) = side(s);
                            for i in 0..2 {
                                for b in 0..nb {
                                    v_z[s * bs + i * nb + b] +=
                                        w * sig_s * dn[i] * phi_s[q * nb + b];
                                }
                            }
                        }
                    }
                }
                let global = |i: usize| cells[i / bs] * bs + i % bs;
                let mut trip = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let v = k_local[i * n + j];
                        if v != 0.0 {
                            trip.push((global(i), global(j), v));
                        }
                    }
                }
                if mode == ShiftMode::Full && a > 0.0 {
                    // a = |S|, S = Σ_c θ_c Π⁰ L_c, ∂a = (S/a) : ∂S
                    let dir = state.face_means[f].scale(1.0 / a);
                    let theta = 1.0 / cells.len() as f64;
                    let mut grad_a: Vec<(usize, f64)> = Vec::new();
                    for &c in &cells {
                        let st = &self.stencils[c];
                        let ncols = st.n_cols();
                        let cm = space.cells[c].constant_mode();
                        for comp in 0..4 {
                            let coef = theta * cm * dir.0[comp];
                            if coef == 0.0 {
                                continue;
                            }
                            let srow = &st.matrix[(comp * nb) * ncols..(comp * nb + 1) * ncols];
                            for (k, sv) in srow.iter().enumerate() {
                                if *sv != 0.0 {
                                    grad_a.push((st.cells[k / bs] * bs + k % bs, coef * sv));
                                }
                            }
                        }
                    }
                    for (i, vz) in v_z.iter().enumerate() {
                        if *vz == 0.0 {
                            continue;
                        }
                        for &(col, g) in &grad_a {
                            trip.push((global(i), col, vz * g));
                        }
                    }
                }
                Ok(trip)
            })
            .collect::<Result<_>>()?;

        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(
            volume.iter().map(Vec::len).sum::<usize>() + faces.iter().map(Vec::len).sum::<usize>(),
        );
        for t in volume.into_iter().chain(faces) {
            triplets.extend(t);
        }
        // Keep every diagonal entry present so ILU(0) never misses a pivot slot.
        triplets.extend((0..self.n_dofs()).map(|i| (i, i, 0.0)));
        Ok(CsrMatrix::from_triplets(self.n_dofs(), triplets))
    }

    /// Wraps coefficients as a vector field of the space.
    pub fn field(&self, u: Vec<f64>) -> Result<BrokenField> {
        BrokenField::from_coeffs(&self.space, self.space.degree, Rank::Vector, u)
    }

    /// `(L_h, A_h)` as tensor fields.
    pub fn reconstruct(&self, u: &[f64]) -> Result<(BrokenField, BrokenField)> {
        let state = self.state(u)?;
        let a_h: Vec<f64> = self.flux_coefficients(&state).concat();
        let deg = self.space.degree;
        Ok((
            BrokenField::from_coeffs(&self.space, deg, Rank::Tensor, state.l)?,
            BrokenField::from_coeffs(&self.space, deg, Rank::Tensor, a_h)?,
        ))
    }
}

fn build_stencil(space: &DgSpace, lifting: &LiftingAssembly, c: usize) -> GradientStencil {
    let nb = space.nb();
    let bs = 2 * nb;
    let mesh = &space.mesh;
    let mut cells = vec![c];
    for &f in &mesh.cell_faces[c] {
        let face = &mesh.faces[f];
        if let Neighbor::Cell(r) = face.right {
            let other = if face.left == c { r } else { face.left };
            if !cells.contains(&other) {
                cells.push(other);
            }
        }
    }
    let ncols = bs * cells.len();
    let mut matrix = vec![0.0; 4 * nb * ncols];
    let cd = &space.cells[c];
    for i in 0..2 {
        for l in 0..2 {
            for b in 0..nb {
                let row = (2 * i + l) * nb + b;
                for b2 in 0..nb {
                    matrix[row * ncols + i * nb + b2] += cd.grad_matrix[l][b * nb + b2];
                }
            }
        }
    }
    for &f in &mesh.cell_faces[c] {
        let Some(fl) = &lifting.faces[f] else {
            continue;
        };
        let t = fl
            .cells
            .iter()
            .position(|&x| x == c)
            .expect("cell belongs to its face patch");
        let fcols = bs * fl.cells.len();
        let block = &fl.blocks[t];
        for (s, cell) in fl.cells.iter().enumerate() {
            let k = cells
                .iter()
                .position(|x| x == cell)
                .expect("face neighbour in stencil");
            for row in 0..4 * nb {
                for j in 0..bs {
                    matrix[row * ncols + k * bs + j] -= block[row * fcols + s * bs + j];
                }
            }
        }
    }
    GradientStencil {
        cells,
        matrix,
        n_cols: ncols,
    }
}
