use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LdgError, Result};
use crate::mesh::Point;
use crate::orlicz::Tensor2;

use super::basis::dim_p;
use super::space::DgSpace;

/// Value shape of a broken field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rank {
    /// `d = 2` components.
    Vector,
    /// `d × n = 2 × 2` components, row-major.
    Tensor,
}

impl Rank {
    pub fn components(self) -> usize {
        match self {
            Rank::Vector => 2,
            Rank::Tensor => 4,
        }
    }
}

/// Coefficients of a piecewise polynomial field of degree `degree`, stored
/// cell by cell, then component by component, in the orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokenField {
    pub degree: usize,
    pub rank: Rank,
    pub n_cells: usize,
    pub coeffs: Vec<f64>,
}

/// Trace values of a field on one face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTraces<T> {
    pub face: usize,
    /// From the left cell `K⁺`.
    pub left: Vec<T>,
    /// From the right cell `K⁻`; `None` on boundary faces.
    pub right: Option<Vec<T>>,
}

impl BrokenField {
    pub fn zeros(space: &DgSpace, degree: usize, rank: Rank) -> Self {
        let n = space.n_cells() * rank.components() * dim_p(degree);
        BrokenField {
            degree,
            rank,
            n_cells: space.n_cells(),
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(
        space: &DgSpace,
        degree: usize,
        rank: Rank,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let expect = space.n_cells() * rank.components() * dim_p(degree);
        if coeffs.len() != expect {
            return Err(LdgError::Config(format!(
                "coefficient vector has length {}, expected {expect}",
                coeffs.len()
            )));
        }
        if degree > space.degree {
            return Err(LdgError::Config(format!(
                "field degree {degree} exceeds space degree {}",
                space.degree
            )));
        }
        Ok(BrokenField {
            degree,
            rank,
            n_cells: space.n_cells(),
            coeffs,
        })
    }

    /// Scalar basis functions per cell.
    pub fn nb(&self) -> usize {
        dim_p(self.degree)
    }

    /// Coefficients per cell (`components × nb`).
    pub fn block(&self) -> usize {
        self.rank.components() * self.nb()
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let b = self.block();
        &self.coeffs[c * b..(c + 1) * b]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        let b = self.block();
        &mut self.coeffs[c * b..(c + 1) * b]
    }

    fn check_space(&self, space: &DgSpace) -> Result<()> {
        if self.n_cells != space.n_cells() || self.degree > space.degree {
            return Err(LdgError::Config(
                "field does not belong to this space".into(),
            ));
        }
        Ok(())
    }

    /// Component values from a row of basis values (length ≥ nb).
    #[inline]
    fn combine(&self, c: usize, phi: &[f64], out: &mut [f64]) {
        let nb = self.nb();
        let coeffs = self.cell(c);
        for (comp, o) in out.iter_mut().enumerate().take(self.rank.components()) {
            *o = coeffs[comp * nb..(comp + 1) * nb]
                .iter()
                .zip(phi)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    /// Vector value at quadrature point `q` of cell `c`.
    pub fn vector_at_qp(&self, space: &DgSpace, c: usize, q: usize) -> [f64; 2] {
        debug_assert_eq!(self.rank, Rank::Vector);
        let nbs = space.nb();
        let mut out = [0.0; 2];
        self.combine(c, &space.cells[c].phi[q * nbs..(q + 1) * nbs], &mut out);
        out
    }

    /// Tensor value at quadrature point `q` of cell `c`.
    pub fn tensor_at_qp(&self, space: &DgSpace, c: usize, q: usize) -> Tensor2 {
        debug_assert_eq!(self.rank, Rank::Tensor);
        let nbs = space.nb();
        let mut out = [0.0; 4];
        self.combine(c, &space.cells[c].phi[q * nbs..(q + 1) * nbs], &mut out);
        Tensor2(out)
    }

    /// Component values at an arbitrary point of cell `c`.
    pub fn value_at(&self, space: &DgSpace, c: usize, x: Point) -> Vec<f64> {
        let (phi, _) = space.eval_basis(c, x);
        let mut out = vec![0.0; self.rank.components()];
        self.combine(c, &phi, &mut out);
        out
    }

    /// Gradient of a vector field at quadrature point `q` of cell `c`.
    pub fn gradient_at_qp(&self, space: &DgSpace, c: usize, q: usize) -> Tensor2 {
        debug_assert_eq!(self.rank, Rank::Vector);
        let nbs = space.nb();
        let nb = self.nb();
        let g = &space.cells[c].grad[q * nbs..q * nbs + nb];
        let coeffs = self.cell(c);
        let mut t = [0.0; 4];
        for i in 0..2 {
            for (b, gb) in g.iter().enumerate() {
                let u = coeffs[i * nb + b];
                t[2 * i] += u * gb[0];
                t[2 * i + 1] += u * gb[1];
            }
        }
        Tensor2(t)
    }

    /// Local L²-projection of `f` (evaluated per cell and point, writing
    /// `rank.components()` values) onto degree `degree`.
    pub fn project<F>(space: &DgSpace, degree: usize, rank: Rank, f: F) -> Result<Self>
    where
        F: Fn(usize, Point, &mut [f64]) + Sync,
    {
        if degree > space.degree {
            return Err(LdgError::Config(format!(
                "projection degree {degree} exceeds space degree {}",
                space.degree
            )));
        }
        let nc = rank.components();
        let nb = dim_p(degree);
        let nbs = space.nb();
        let blocks: Vec<Vec<f64>> = (0..space.n_cells())
            .into_par_iter()
            .map(|c| {
                let cd = &space.cells[c];
                let mut block = vec![0.0; nc * nb];
                let mut val = vec![0.0; nc];
                for (q, (x, w)) in cd.points.iter().zip(&cd.weights).enumerate() {
                    f(c, *x, &mut val);
                    let phi = &cd.phi[q * nbs..q * nbs + nb];
                    for comp in 0..nc {
                        let wv = w * val[comp];
                        for b in 0..nb {
                            block[comp * nb + b] += wv * phi[b];
                        }
                    }
                }
                block
            })
            .collect();
        Ok(BrokenField {
            degree,
            rank,
            n_cells: space.n_cells(),
            coeffs: blocks.concat(),
        })
    }

    pub fn project_vector<F>(space: &DgSpace, degree: usize, f: F) -> Result<Self>
    where
        F: Fn(Point) -> [f64; 2] + Sync,
    {
        Self::project(space, degree, Rank::Vector, |_, x, out| {
            out.copy_from_slice(&f(x))
        })
    }

    pub fn project_tensor<F>(space: &DgSpace, degree: usize, f: F) -> Result<Self>
    where
        F: Fn(Point) -> Tensor2 + Sync,
    {
        Self::project(space, degree, Rank::Tensor, |_, x, out| {
            out.copy_from_slice(&f(x).0)
        })
    }

    /// Projection onto a lower degree; exact truncation in the hierarchical basis.
    pub fn project_to_degree(&self, degree: usize) -> Result<Self> {
        if degree > self.degree {
            return Err(LdgError::Config(format!(
                "cannot project degree {} field onto higher degree {degree}",
                self.degree
            )));
        }
        let (nb_old, nb_new) = (self.nb(), dim_p(degree));
        let nc = self.rank.components();
        let mut coeffs = Vec::with_capacity(self.n_cells * nc * nb_new);
        for c in 0..self.n_cells {
            let block = self.cell(c);
            for comp in 0..nc {
                coeffs.extend_from_slice(&block[comp * nb_old..comp * nb_old + nb_new]);
            }
        }
        Ok(BrokenField {
            degree,
            rank: self.rank,
            n_cells: self.n_cells,
            coeffs,
        })
    }

    /// Re-embeds a lower-degree field into degree `degree` (zero padding).
    pub fn embed_in_degree(&self, degree: usize) -> Self {
        let (nb_old, nb_new) = (self.nb(), dim_p(degree));
        assert!(nb_new >= nb_old);
        let nc = self.rank.components();
        let mut coeffs = vec![0.0; self.n_cells * nc * nb_new];
        for c in 0..self.n_cells {
            let block = self.cell(c);
            for comp in 0..nc {
                let dst = (c * nc + comp) * nb_new;
                coeffs[dst..dst + nb_old]
                    .copy_from_slice(&block[comp * nb_old..(comp + 1) * nb_old]);
            }
        }
        BrokenField {
            degree,
            rank: self.rank,
            n_cells: self.n_cells,
            coeffs,
        }
    }

    /// Elementwise gradient `∇_h u`, stored as a tensor field of the same degree.
    pub fn local_gradient(&self, space: &DgSpace) -> Result<BrokenField> {
        self.check_space(space)?;
        if self.rank != Rank::Vector {
            return Err(LdgError::Usage(
                "local gradient is defined for vector fields".into(),
            ));
        }
        let nb = self.nb();
        let nbs = space.nb();
        let mut out = BrokenField::zeros(space, self.degree, Rank::Tensor);
        for c in 0..self.n_cells {
            let gm = &space.cells[c].grad_matrix;
            let u = self.cell(c).to_vec();
            let dst = out.cell_mut(c);
            for i in 0..2 {
                for l in 0..2 {
                    for b in 0..nb {
                        let mut s = 0.0;
                        for bp in 0..nb {
                            s += gm[l][b * nbs + bp] * u[i * nb + bp];
                        }
                        dst[(2 * i + l) * nb + b] = s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `(self, other)_Ω` by coefficient product (orthonormal basis).
    pub fn inner(&self, other: &BrokenField) -> f64 {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn axpy(&mut self, a: f64, x: &BrokenField) {
        for (y, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += a * xv;
        }
    }

    fn trace_rows<'a>(&self, space: &'a DgSpace, f: usize) -> (&'a [f64], Option<&'a [f64]>) {
        let fd = &space.faces[f];
        (&fd.phi_left, fd.right.map(|_| fd.phi_right.as_slice()))
    }

    /// Inner traces of a vector field on face `f`.
    pub fn vector_traces(&self, space: &DgSpace, f: usize) -> FaceTraces<[f64; 2]> {
        let fd = &space.faces[f];
        let nbs = space.nb();
        let (pl, pr) = self.trace_rows(space, f);
        let eval = |c: usize, rows: &[f64]| -> Vec<[f64; 2]> {
            (0..fd.n_points())
                .map(|q| {
                    let mut o = [0.0; 2];
                    self.combine(c, &rows[q * nbs..(q + 1) * nbs], &mut o);
                    o
                })
                .collect()
        };
        FaceTraces {
            face: f,
            left: eval(fd.left, pl),
            right: fd.right.map(|r| eval(r, pr.unwrap())),
        }
    }

    /// Inner traces of a tensor field on face `f`.
    pub fn tensor_traces(&self, space: &DgSpace, f: usize) -> FaceTraces<Tensor2> {
        let fd = &space.faces[f];
        let nbs = space.nb();
        let (pl, pr) = self.trace_rows(space, f);
        let eval = |c: usize, rows: &[f64]| -> Vec<Tensor2> {
            (0..fd.n_points())
                .map(|q| {
                    let mut o = [0.0; 4];
                    self.combine(c, &rows[q * nbs..(q + 1) * nbs], &mut o);
                    Tensor2(o)
                })
                .collect()
        };
        FaceTraces {
            face: f,
            left: eval(fd.left, pl),
            right: fd.right.map(|r| eval(r, pr.unwrap())),
        }
    }

    /// `⟦w ⊗ n⟧` at the quadrature points of face `f`.
    ///
    /// Interior faces: `(w⁺ - w⁻) ⊗ n⁺`. Dirichlet faces: `(w - g) ⊗ n` with
    /// `g` the boundary datum, or `w ⊗ n` when `boundary` is `None`.
    pub fn jump(
        &self,
        space: &DgSpace,
        f: usize,
        boundary: Option<&(dyn Fn(Point) -> [f64; 2] + Sync)>,
    ) -> Result<Vec<Tensor2>> {
        self.check_space(space)?;
        if self.rank != Rank::Vector {
            return Err(LdgError::Usage(
                "jumps w ⊗ n are formed for vector fields".into(),
            ));
        }
        space.check_face_usage(f)?;
        let fd = &space.faces[f];
        let tr = self.vector_traces(space, f);
        Ok(match tr.right {
            Some(right) => tr
                .left
                .iter()
                .zip(&right)
                .map(|(a, b)| Tensor2::outer([a[0] - b[0], a[1] - b[1]], fd.normal))
                .collect(),
            None => tr
                .left
                .iter()
                .zip(&fd.points)
                .map(|(a, x)| {
                    let g = boundary.map(|g| g(*x)).unwrap_or([0.0; 2]);
                    Tensor2::outer([a[0] - g[0], a[1] - g[1]], fd.normal)
                })
                .collect(),
        })
    }

    /// `{w}` of a vector field on face `f`.
    pub fn average_vector(&self, space: &DgSpace, f: usize) -> Result<Vec<[f64; 2]>> {
        self.check_space(space)?;
        space.check_face_usage(f)?;
        let tr = self.vector_traces(space, f);
        Ok(match tr.right {
            Some(right) => tr
                .left
                .iter()
                .zip(&right)
                .map(|(a, b)| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])])
                .collect(),
            None => tr.left,
        })
    }

    /// `{X}` of a tensor field on face `f`.
    pub fn average_tensor(&self, space: &DgSpace, f: usize) -> Result<Vec<Tensor2>> {
        self.check_space(space)?;
        space.check_face_usage(f)?;
        let tr = self.tensor_traces(space, f);
        Ok(match tr.right {
            Some(right) => tr
                .left
                .iter()
                .zip(&right)
                .map(|(a, b)| (*a + *b).scale(0.5))
                .collect(),
            None => tr.left,
        })
    }
}

/// Writes `x,y,value` rows, one per cell quadrature point.
pub fn export_samples<F>(space: &DgSpace, path: &Path, value: F) -> Result<()>
where
    F: Fn(usize, usize) -> f64,
{
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,y,value")?;
    for (c, cd) in space.cells.iter().enumerate() {
        for (q, x) in cd.points.iter().enumerate() {
            writeln!(w, "{:.12e},{:.12e},{:.12e}", x[0], x[1], value(c, q))?;
        }
    }
    w.flush()?;
    Ok(())
}
