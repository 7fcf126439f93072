//! Lifting (jump) operator `R_h^k`, discrete gradient `G_h^k = ∇_h - R_h^k`
//! and the Orlicz modulars `ρ`, `m_{ψ,h}`, `M_{ψ,h}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgspace::{dim_p, BrokenField, DgSpace, Rank};
use crate::error::{LdgError, Result};
use crate::mesh::{BoundaryTag, Neighbor, Point};
use crate::orlicz::{NFunction, Tensor2, YoungFunction};

/// Boundary datum `x ↦ u_D(x)`.
pub type BoundaryFn<'a> = &'a (dyn Fn(Point) -> [f64; 2] + Sync);

/// Weight of `{X}` on a face: ½ on interior faces, 1 on Dirichlet faces,
/// `None` on Neumann faces (no jumps there).
pub fn average_weight(space: &DgSpace, f: usize) -> Option<f64> {
    match space.mesh.faces[f].right {
        Neighbor::Cell(_) => Some(0.5),
        Neighbor::Boundary(BoundaryTag::Dirichlet) => Some(1.0),
        Neighbor::Boundary(BoundaryTag::Neumann) => None,
    }
}

/// Local lifting matrices of one face `γ`.
///
/// `blocks[s]` maps the vector coefficients on the patch `S_γ` (cells in
/// `cells` order, each `2 × nb`) to the `4 × nb` tensor coefficients of
/// `R_γ^k(w)` on `cells[s]`; the matrix is stored row-major.
#[derive(Debug, Clone)]
pub struct FaceLift {
    pub face: usize,
    pub cells: Vec<usize>,
    pub blocks: Vec<Vec<f64>>,
}

/// Per-face lifting matrices for the whole mesh.
#[derive(Debug, Clone)]
pub struct LiftingAssembly {
    pub degree: usize,
    pub faces: Vec<Option<FaceLift>>,
}

impl LiftingAssembly {
    pub fn new(space: &DgSpace) -> Self {
        let nb = space.nb();
        let faces = (0..space.n_faces())
            .into_par_iter()
            .map(|f| {
                let theta = average_weight(space, f)?;
                let fd = &space.faces[f];
                let cells: Vec<usize> = std::iter::once(fd.left).chain(fd.right).collect();
                let ncols = 2 * nb * cells.len();
                let rows_of = |s: usize| if s == 0 { &fd.phi_left } else { &fd.phi_right };
                let blocks = (0..cells.len())
                    .map(|t| {
                        let mut m = vec![0.0; 4 * nb * ncols];
                        let target = rows_of(t);
                        for s in 0..cells.len() {
                            let sign = if s == 0 { 1.0 } else { -1.0 };
                            let source = rows_of(s);
                            for q in 0..fd.n_points() {
                                let w = theta * sign * fd.weights[q];
                                for b in 0..nb {
                                    let pb = w * target[q * nb + b];
                                    for bp in 0..nb {
                                        let v = pb * source[q * nb + bp];
                                        for i in 0..2 {
                                            for l in 0..2 {
                                                let row = (2 * i + l) * nb + b;
                                                let col = s * 2 * nb + i * nb + bp;
                                                m[row * ncols + col] += v * fd.normal[l];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        m
                    })
                    .collect();
                Some(FaceLift {
                    face: f,
                    cells,
                    blocks,
                })
            })
            .collect();
        LiftingAssembly {
            degree: space.degree,
            faces,
        }
    }

    /// `R_h^k(w)` through the stored local matrices (no boundary datum).
    pub fn apply(&self, space: &DgSpace, w: &BrokenField) -> BrokenField {
        let nb = space.nb();
        let mut out = BrokenField::zeros(space, space.degree, Rank::Tensor);
        let w = w.embed_in_degree(space.degree);
        for fl in self.faces.iter().flatten() {
            let patch: Vec<f64> = fl
                .cells
                .iter()
                .flat_map(|&c| w.cell(c).iter().copied())
                .collect();
            let ncols = patch.len();
            for (t, &c) in fl.cells.iter().enumerate() {
                let dst = out.cell_mut(c);
                for row in 0..4 * nb {
                    let r = &fl.blocks[t][row * ncols..(row + 1) * ncols];
                    dst[row] += r.iter().zip(&patch).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        out
    }
}

/// Lifts arbitrary jump data: `jumps(f)` returns `⟦·⊗n⟧` at the quadrature
/// points of face `f` (or `None` to skip the face). Neumann faces are skipped.
pub fn lift_jump_data<J>(space: &DgSpace, degree: usize, jumps: J) -> Result<BrokenField>
where
    J: Fn(usize) -> Result<Option<Vec<Tensor2>>> + Sync,
{
    if degree > space.degree {
        return Err(LdgError::Config(format!(
            "lifting degree {degree} exceeds space degree"
        )));
    }
    let nb = dim_p(degree);
    let nbs = space.nb();
    let per_face: Vec<Option<(usize, Option<usize>, Vec<f64>, Vec<f64>)>> = (0..space.n_faces())
        .into_par_iter()
        .map(|f| -> Result<_> {
            let Some(theta) = average_weight(space, f) else {
                return Ok(None);
            };
            let Some(j) = jumps(f)? else { return Ok(None) };
            let fd = &space.faces[f];
            let integrate = |rows: &[f64]| -> Vec<f64> {
                let mut block = vec![0.0; 4 * nb];
                for (q, jq) in j.iter().enumerate() {
                    let w = theta * fd.weights[q];
                    for b in 0..nb {
                        let v = w * rows[q * nbs + b];
                        for comp in 0..4 {
                            block[comp * nb + b] += v * jq.0[comp];
                        }
                    }
                }
                block
            };
            let left = integrate(&fd.phi_left);
            let right = fd
                .right
                .map(|_| integrate(&fd.phi_right))
                .unwrap_or_default();
            Ok(Some((fd.left, fd.right, left, right)))
        })
        .collect::<Result<_>>()?;
    let mut out = BrokenField::zeros(space, degree, Rank::Tensor);
    for (l, r, bl, br) in per_face.into_iter().flatten() {
        for (d, v) in out.cell_mut(l).iter_mut().zip(&bl) {
            *d += v;
        }
        if let Some(r) = r {
            for (d, v) in out.cell_mut(r).iter_mut().zip(&br) {
                *d += v;
            }
        }
    }
    Ok(out)
}

/// `R_h^k(w)`: lifting of the jumps of `w` on `Γ_I ∪ Γ_D`.
///
/// With `boundary = Some(g)`, Dirichlet jumps use `(w - g) ⊗ n`, i.e. the
/// result is `R_h^k(w) - R_h^k(u_D*)` for any continuous extension `u_D*`.
pub fn lift(
    space: &DgSpace,
    w: &BrokenField,
    boundary: Option<BoundaryFn<'_>>,
) -> Result<BrokenField> {
    lift_jump_data(space, space.degree, |f| {
        w.jump(space, f, boundary).map(Some)
    })
}

/// `R_h^k(u_D*)` for a continuous extension of `u_D`: only Dirichlet faces
/// contribute, with jump `u_D ⊗ n`.
pub fn lift_boundary_data(space: &DgSpace, u_d: BoundaryFn<'_>) -> Result<BrokenField> {
    lift_jump_data(space, space.degree, |f| {
        let fd = &space.faces[f];
        if space.mesh.faces[f].tag() != Some(BoundaryTag::Dirichlet) {
            return Ok(None);
        }
        Ok(Some(
            fd.points
                .iter()
                .map(|x| Tensor2::outer(u_d(*x), fd.normal))
                .collect(),
        ))
    })
}

/// `G_h^k u = ∇_h u - R_h^k u`, or with a Dirichlet datum
/// `L_h = ∇_h u - R_h^k u + R_h^k u_D* = ∇_h u - R_h^k(u - u_D*)`.
pub fn discrete_gradient(
    space: &DgSpace,
    u: &BrokenField,
    boundary: Option<BoundaryFn<'_>>,
) -> Result<BrokenField> {
    let mut g = u.embed_in_degree(space.degree).local_gradient(space)?;
    let r = lift(space, u, boundary)?;
    g.axpy(-1.0, &r);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModularKind {
    RhoVolume,
    MFace,
    MTotal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularValue {
    pub kind: ModularKind,
    pub value: f64,
}

/// `∫_Ω ψ(g(c, q)) dx` for pointwise magnitudes `g` at cell quadrature points.
pub fn modular_volume_with<G>(space: &DgSpace, psi: &dyn YoungFunction, magnitude: G) -> f64
where
    G: Fn(usize, usize) -> f64 + Sync,
{
    (0..space.n_cells())
        .into_par_iter()
        .map(|c| {
            let cd = &space.cells[c];
            cd.weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * psi.value(magnitude(c, q)))
                .sum::<f64>()
        })
        .sum()
}

fn pointwise_norm(space: &DgSpace, field: &BrokenField, c: usize, q: usize) -> f64 {
    match field.rank {
        Rank::Vector => {
            let v = field.vector_at_qp(space, c, q);
            v[0].hypot(v[1])
        }
        Rank::Tensor => field.tensor_at_qp(space, c, q).norm(),
    }
}

/// `ρ_{ψ,Ω}(f) = ∫_Ω ψ(|f|) dx`.
pub fn modular_volume(
    space: &DgSpace,
    psi: &dyn YoungFunction,
    field: &BrokenField,
) -> ModularValue {
    ModularValue {
        kind: ModularKind::RhoVolume,
        value: modular_volume_with(space, psi, |c, q| pointwise_norm(space, field, c, q)),
    }
}

/// `ρ_{φ_{|a|},Ω}(f)` with a pointwise shift `a(c, x)`.
pub fn modular_volume_shifted<S>(
    space: &DgSpace,
    nf: &NFunction,
    field: &BrokenField,
    shift: S,
) -> Result<ModularValue>
where
    S: Fn(usize, Point) -> f64 + Sync,
{
    let value = (0..space.n_cells())
        .into_par_iter()
        .map(|c| -> Result<f64> {
            let cd = &space.cells[c];
            let mut s = 0.0;
            for (q, (x, w)) in cd.points.iter().zip(&cd.weights).enumerate() {
                let psi = nf.shifted(shift(c, *x).abs())?;
                s += w * psi.value(pointwise_norm(space, field, c, q));
            }
            Ok(s)
        })
        .sum::<Result<f64>>()?;
    Ok(ModularValue {
        kind: ModularKind::RhoVolume,
        value,
    })
}

/// `m_{ψ,h}(w) = h Σ_γ ∫_γ ψ(h^{-1} |⟦w⊗n⟧|) ds` over `Γ_I ∪ Γ_D`, with
/// per-face functions `psi(f)` (plain or shifted).
pub fn modular_jump_with<'p, P>(
    space: &DgSpace,
    psi: P,
    w: &BrokenField,
    boundary: Option<BoundaryFn<'_>>,
    h: f64,
) -> Result<ModularValue>
where
    P: Fn(usize) -> Result<Box<dyn YoungFunction + 'p>> + Sync,
{
    let value = (0..space.n_faces())
        .into_par_iter()
        .map(|f| -> Result<f64> {
            if average_weight(space, f).is_none() {
                return Ok(0.0);
            }
            let psi_f = psi(f)?;
            let j = w.jump(space, f, boundary)?;
            let fd = &space.faces[f];
            Ok(j.iter()
                .zip(&fd.weights)
                .map(|(jq, wq)| wq * psi_f.value(jq.norm() / h))
                .sum())
        })
        .sum::<Result<f64>>()?;
    Ok(ModularValue {
        kind: ModularKind::MFace,
        value: h * value,
    })
}

/// `m_{ψ,h}(w)` for a single function `ψ`.
pub fn modular_jump<Y>(
    space: &DgSpace,
    psi: &Y,
    w: &BrokenField,
    boundary: Option<BoundaryFn<'_>>,
    h: f64,
) -> Result<ModularValue>
where
    Y: YoungFunction + Clone + 'static,
{
    modular_jump_with(
        space,
        |_| Ok(Box::new(psi.clone()) as Box<dyn YoungFunction>),
        w,
        boundary,
        h,
    )
}

/// `m_{φ_{a_γ},h}(w)` with per-face shifts `a_γ`.
pub fn modular_jump_shifted(
    space: &DgSpace,
    nf: &NFunction,
    shifts: &[f64],
    w: &BrokenField,
    boundary: Option<BoundaryFn<'_>>,
    h: f64,
) -> Result<ModularValue> {
    modular_jump_with(
        space,
        |f| Ok(Box::new(nf.shifted(shifts[f])?) as Box<dyn YoungFunction>),
        w,
        boundary,
        h,
    )
}

/// `M_{ψ,h}(w) = ρ_{ψ,Ω}(∇_h w) + m_{ψ,h}(w)`.
pub fn modular_total<Y>(
    space: &DgSpace,
    psi: &Y,
    w: &BrokenField,
    boundary: Option<BoundaryFn<'_>>,
    h: f64,
) -> Result<ModularValue>
where
    Y: YoungFunction + Clone + 'static,
{
    let grad = w.local_gradient(space)?;
    let rho = modular_volume(space, psi, &grad).value;
    let m = modular_jump(space, psi, w, boundary, h)?.value;
    Ok(ModularValue {
        kind: ModularKind::MTotal,
        value: rho + m,
    })
}

/// Per-face shifts `a_γ = |{Π⁰ L}_γ|` of a tensor field `L`.
pub fn face_shifts(space: &DgSpace, l: &BrokenField) -> Vec<f64> {
    let means = cell_means(space, l);
    space
        .faces
        .iter()
        .map(|fd| match fd.right {
            Some(r) => (means[fd.left] + means[r]).scale(0.5).norm(),
            None => means[fd.left].norm(),
        })
        .collect()
}

/// `Π⁰ L` on every cell.
pub fn cell_means(space: &DgSpace, l: &BrokenField) -> Vec<Tensor2> {
    let nb = l.nb();
    (0..space.n_cells())
        .map(|c| {
            let s = space.cells[c].constant_mode();
            let block = l.cell(c);
            Tensor2(std::array::from_fn(|comp| block[comp * nb] * s))
        })
        .collect()
}
