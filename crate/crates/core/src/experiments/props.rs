//! Sampling reports for the structural invariants of the N-functions, the
//! operator maps and the lifting.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dgspace::{BrokenField, DgSpace, Rank};
use crate::error::Result;
use crate::mesh::{Point, Rectangle, Triangulation};
use crate::operators::{discrete_gradient, lift, modular_jump, modular_volume};
use crate::orlicz::{
    op_a, op_a_jacobian, op_a_shifted, op_a_shifted_jacobian, NFunction, Tensor2, ALPHA_TABLE,
};

/// Number of `(t, s)` pairs with `s t > φ(t) + φ*(s)`.
pub fn young_violations(nf: &NFunction, pairs: usize, seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(f64, f64)> = (0..pairs)
        .map(|_| {
            (
                10f64.powf(rng.gen_range(-6.0..6.0)),
                10f64.powf(rng.gen_range(-6.0..6.0)),
            )
        })
        .collect();
    let count = samples
        .par_iter()
        .map(|&(t, s)| -> Result<usize> {
            let rhs = nf.phi(t)? + nf.conjugate_value(s)?;
            Ok(usize::from(s * t > rhs * (1.0 + 1e-12)))
        })
        .sum::<Result<usize>>()?;
    Ok(count)
}

/// Largest `|(φ*)′(φ′(t)) - t| / t` over a log grid of `n` points in `[lo, hi]`.
pub fn conjugate_round_trip(nf: &NFunction, lo: f64, hi: f64, n: usize) -> Result<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| {
            let t = 10f64.powf(a + (b - a) * i as f64 / (n - 1).max(1) as f64);
            let back = nf.conjugate_prime(nf.phi_prime(t)?)?;
            Ok((back - t).abs() / t)
        })
        .try_fold(0.0_f64, |m, e: Result<f64>| Ok(m.max(e?)))
}

/// Largest entrywise deviation of `DA` and `DA_a` from central differences,
/// relative to the largest Jacobian entry, over `n` random tensors.
pub fn jacobian_fd_error(nf: &NFunction, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let p = Tensor2(std::array::from_fn(|_| rng.gen_range(-2.0..2.0)));
        let shift: f64 = rng.gen_range(0.0..2.0);
        let eps = 1e-6 * (1.0 + p.norm());
        let exact = op_a_jacobian(nf, &p, 0.0)?;
        let exact_shifted = op_a_shifted_jacobian(nf, shift, &p, 0.0)?;
        for b in 0..4 {
            let mut pp = p;
            let mut pm = p;
            pp.0[b] += eps;
            pm.0[b] -= eps;
            let d = (op_a(nf, &pp) - op_a(nf, &pm)).scale(0.5 / eps);
            let ds = (op_a_shifted(nf, shift, &pp) - op_a_shifted(nf, shift, &pm)).scale(0.5 / eps);
            for a in 0..4 {
                worst = worst.max((d.0[a] - exact.0[a][b]).abs() / exact.max_abs());
                worst =
                    worst.max((ds.0[a] - exact_shifted.0[a][b]).abs() / exact_shifted.max_abs());
            }
        }
    }
    Ok(worst)
}

/// Mesh of the unit square with two triangles, all faces Dirichlet.
pub fn two_cell_space(k: usize) -> Result<DgSpace> {
    let mesh = Triangulation::build_cartesian(Rectangle::square(0.0, 1.0), 1.0, |_| true)?;
    DgSpace::new(Arc::new(mesh), k)
}

fn random_field(space: &DgSpace, rank: Rank, amplitude: f64, rng: &mut ChaCha8Rng) -> BrokenField {
    let mut f = BrokenField::zeros(space, space.degree, rank);
    for c in f.coeffs.iter_mut() {
        *c = amplitude * rng.gen_range(-1.0..1.0);
    }
    f
}

/// Largest deviation of `(R_h^k w, X)` from `⟨⟦w⊗n⟧, {X}⟩` over every tensor
/// basis function `X` of the two-cell mesh and `samples` random fields `w`.
///
/// The face side is computed from fresh basis evaluations at face
/// quadrature points, independently of the precomputed face tables.
pub fn lifting_relation_error(k: usize, samples: usize, seed: u64) -> Result<f64> {
    let space = two_cell_space(k)?;
    let mesh = &space.mesh;
    let nb = space.nb();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let w = random_field(&space, Rank::Vector, 1.0, &mut rng);
        let rw = lift(&space, &w, None)?;
        for c in 0..space.n_cells() {
            for comp in 0..4 {
                let (i, l) = (comp / 2, comp % 2);
                for b in 0..nb {
                    // X = φ_b e_i ⊗ e_l on cell c; (R w, X) is a coefficient.
                    let lhs = rw.cell(c)[comp * nb + b];
                    let mut rhs = 0.0;
                    for (f, face) in mesh.faces.iter().enumerate() {
                        let (pts, wts) = mesh.face_quadrature(f, 2 * k + 4)?;
                        let right = face.right_cell();
                        if face.left != c && right != Some(c) {
                            continue;
                        }
                        let theta = if right.is_some() { 0.5 } else { 1.0 };
                        for (x, wq) in pts.iter().zip(&wts) {
                            let wl = w.value_at(&space, face.left, *x);
                            let wr = right
                                .map(|r| w.value_at(&space, r, *x))
                                .unwrap_or(vec![0.0, 0.0]);
                            let jump = (wl[i] - wr[i]) * face.normal[l];
                            let (phi, _) = space.eval_basis(c, *x);
                            rhs += wq * jump * theta * phi[b];
                        }
                    }
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Continuous piecewise-linear field with random values at interior
/// vertices and zero on the boundary, as an element of the DG space.
pub fn conforming_field(space: &DgSpace, seed: u64) -> Result<BrokenField> {
    let mesh = &space.mesh;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on_boundary = |v: Point| {
        let d = mesh.domain;
        (v[0] - d.min[0]).abs() < 1e-12
            || (v[0] - d.max[0]).abs() < 1e-12
            || (v[1] - d.min[1]).abs() < 1e-12
            || (v[1] - d.max[1]).abs() < 1e-12
    };
    let values: Vec<[f64; 2]> = mesh
        .vertices
        .iter()
        .map(|v| {
            if on_boundary(*v) {
                [0.0, 0.0]
            } else {
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
            }
        })
        .collect();
    BrokenField::project(space, space.degree, Rank::Vector, |c, x, out| {
        let xi = space.cells[c].to_reference(x);
        let lam = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        let cell = mesh.cells[c];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| lam[j] * values[cell[j]][i]).sum();
        }
    })
}

/// `max |G_h^k u - ∇_h u|` (coefficients) for a conforming `u` vanishing on `Γ_D`.
pub fn discrete_gradient_defect(space: &DgSpace, seed: u64) -> Result<f64> {
    let u = conforming_field(space, seed)?;
    let g = discrete_gradient(space, &u, None)?;
    let grad = u.local_gradient(space)?;
    Ok(g.coeffs
        .iter()
        .zip(&grad.coeffs)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Largest `ρ_{φ,Ω}(R_h^k w) / m_{φ,h}(w)` over `samples` random fields whose
/// coefficients scale with `h`.
pub fn stability_envelope(
    space: &DgSpace,
    nf: &NFunction,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = space.h();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let amp = h * 10f64.powf(rng.gen_range(-1.0..1.0));
        let w = random_field(space, Rank::Vector, amp, &mut rng);
        let rw = lift(space, &w, None)?;
        let rho = modular_volume(space, nf, &rw).value;
        let m = modular_jump(space, nf, &w, None, h)?.value;
        if m > 0.0 {
            worst = worst.max(rho / m);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyRow {
    pub p: f64,
    pub young_pairs: usize,
    pub young_violations: usize,
    pub conjugate_round_trip: f64,
    pub jacobian_fd: f64,
    pub stability_coarse: f64,
    pub stability_fine: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub delta: f64,
    pub rows: Vec<PropertyRow>,
    pub lifting_relation: f64,
    pub discrete_gradient: f64,
}

/// Runs every sampler for the given exponents (all tabulated ones if empty).
pub fn property_report(ps: &[f64], delta: f64, young_pairs: usize) -> Result<PropertyReport> {
    let ps: Vec<f64> = if ps.is_empty() {
        ALPHA_TABLE.iter().map(|e| e.0).collect()
    } else {
        ps.to_vec()
    };
    let coarse_mesh =
        Triangulation::build_cartesian(Rectangle::square(-2.0, 2.0), 1.0, |_| true)?.refined(1);
    let fine_mesh = coarse_mesh.refine_regular();
    let coarse = DgSpace::new(Arc::new(coarse_mesh), 1)?;
    let fine = DgSpace::new(Arc::new(fine_mesh), 1)?;
    let rows = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| -> Result<PropertyRow> {
            let nf = NFunction::new(p, delta)?;
            Ok(PropertyRow {
                p,
                young_pairs,
                young_violations: young_violations(&nf, young_pairs, 100 + i as u64)?,
                conjugate_round_trip: conjugate_round_trip(&nf, 1e-8, 1e8, 161)?,
                jacobian_fd: jacobian_fd_error(&nf, 1000, 200 + i as u64)?,
                stability_coarse: stability_envelope(&coarse, &nf, 100, 300 + i as u64)?,
                stability_fine: stability_envelope(&fine, &nf, 100, 300 + i as u64)?,
            })
        })
        .collect::<Result<_>>()?;
    let level2 = DgSpace::new(
        Arc::new(
            Triangulation::build_cartesian(Rectangle::square(-2.0, 2.0), 1.0, |_| true)?.refined(2),
        ),
        1,
    )?;
    Ok(PropertyReport {
        delta,
        rows,
        lifting_relation: lifting_relation_error(1, 3, 7)?,
        discrete_gradient: discrete_gradient_defect(&level2, 11)?,
    })
}
