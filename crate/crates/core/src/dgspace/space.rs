use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{LdgError, Result};
use crate::mesh::{Neighbor, Point, Triangulation};

use super::basis::{dim_p, ReferenceBasis};

/// Quadrature orders used when precomputing cell and face data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    /// Volume order; `None` means `2k + 6`.
    pub volume_order: Option<usize>,
    /// Face order; `None` means `2k + 6`.
    pub face_order: Option<usize>,
    /// Cells having this point as a vertex get `extra` additional orders.
    pub elevated: Option<(Point, usize)>,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            volume_order: None,
            face_order: None,
            elevated: None,
        }
    }
}

/// Geometry, quadrature and basis tabulation of one cell.
#[derive(Debug, Clone)]
pub struct CellData {
    pub area: f64,
    pub origin: Point,
    pub jacobian: [[f64; 2]; 2],
    pub inverse_jacobian: [[f64; 2]; 2],
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// `phi[q * nb + b]`: physical basis values.
    pub phi: Vec<f64>,
    /// `grad[q * nb + b]`: physical basis gradients.
    pub grad: Vec<[f64; 2]>,
    /// `grad_matrix[l][b * nb + b'] = ∫_K ∂_l φ_{b'} φ_b`.
    pub grad_matrix: [Vec<f64>; 2],
}

impl CellData {
    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    /// Value of the constant basis function (`1 / sqrt|K|`).
    pub fn constant_mode(&self) -> f64 {
        1.0 / self.area.sqrt()
    }

    /// Factor mapping reference basis values to physical ones, `1/sqrt(det J)`.
    pub fn basis_scale(&self) -> f64 {
        1.0 / (2.0 * self.area).sqrt()
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let m = &self.inverse_jacobian;
        [
            m[0][0] * d[0] + m[0][1] * d[1],
            m[1][0] * d[0] + m[1][1] * d[1],
        ]
    }
}

/// Face quadrature with basis values of the adjacent cells.
#[derive(Debug, Clone)]
pub struct FaceData {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub left: usize,
    pub right: Option<usize>,
    pub normal: Point,
    pub length: f64,
    /// `phi_left[q * nb + b]`.
    pub phi_left: Vec<f64>,
    /// Empty on boundary faces.
    pub phi_right: Vec<f64>,
}

impl FaceData {
    pub fn n_points(&self) -> usize {
        self.weights.len()
    }
}

/// Broken polynomial space of degree `k` on a triangulation, with all
/// tabulations needed by projections, traces and assembly.
#[derive(Debug, Clone)]
pub struct DgSpace {
    pub mesh: Arc<Triangulation>,
    pub degree: usize,
    pub basis: ReferenceBasis,
    pub cells: Vec<CellData>,
    pub faces: Vec<FaceData>,
    pub settings: QuadratureSettings,
}

impl DgSpace {
    pub fn new(mesh: Arc<Triangulation>, degree: usize) -> Result<Self> {
        Self::with_settings(mesh, degree, QuadratureSettings::default())
    }

    pub fn with_settings(
        mesh: Arc<Triangulation>,
        degree: usize,
        settings: QuadratureSettings,
    ) -> Result<Self> {
        let basis = ReferenceBasis::new(degree)?;
        let nb = basis.len();
        let vol_order = settings.volume_order.unwrap_or(2 * degree + 6);
        let face_order = settings.face_order.unwrap_or(2 * degree + 6);

        let cells: Vec<CellData> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let mut order = vol_order;
                if let Some((pt, extra)) = settings.elevated {
                    let touches = mesh
                        .cell_points(c)
                        .iter()
                        .any(|v| (v[0] - pt[0]).hypot(v[1] - pt[1]) < 1e-12);
                    if touches {
                        order += extra;
                    }
                }
                build_cell(&mesh, &basis, c, order)
            })
            .collect::<Result<_>>()?;

        let faces: Vec<FaceData> = (0..mesh.n_faces())
            .into_par_iter()
            .map(|f| {
                let (points, weights) = mesh.face_quadrature(f, face_order)?;
                let face = &mesh.faces[f];
                let tab = |c: usize| -> Vec<f64> {
                    let cd = &cells[c];
                    let s = cd.basis_scale();
                    points
                        .iter()
                        .flat_map(|x| {
                            basis
                                .eval(cd.to_reference(*x))
                                .into_iter()
                                .map(move |v| v * s)
                        })
                        .collect()
                };
                let right = match face.right {
                    Neighbor::Cell(r) => Some(r),
                    Neighbor::Boundary(_) => None,
                };
                Ok(FaceData {
                    phi_left: tab(face.left),
                    phi_right: right.map(tab).unwrap_or_default(),
                    points,
                    weights,
                    left: face.left,
                    right,
                    normal: face.normal,
                    length: face.length,
                })
            })
            .collect::<Result<_>>()?;

        debug_assert!(cells.iter().all(|c| c.phi.len() == c.n_points() * nb));
        Ok(DgSpace {
            mesh,
            degree,
            basis,
            cells,
            faces,
            settings,
        })
    }

    /// Scalar basis functions per cell for degree `k` of this space.
    pub fn nb(&self) -> usize {
        self.basis.len()
    }

    /// Scalar basis functions per cell for a (lower) degree `j`.
    pub fn nb_of(&self, j: usize) -> usize {
        dim_p(j)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Mesh parameter `h` (the cartesian spacing).
    pub fn h(&self) -> f64 {
        self.mesh.grid_h
    }

    /// Physical basis values (and gradients) at an arbitrary point of cell `c`.
    pub fn eval_basis(&self, c: usize, x: Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        let cd = &self.cells[c];
        let s = cd.basis_scale();
        let (v, g) = self.basis.eval_with_gradients(cd.to_reference(x));
        let m = &cd.inverse_jacobian;
        let grads = g
            .iter()
            .map(|gr| {
                [
                    s * (m[0][0] * gr[0] + m[1][0] * gr[1]),
                    s * (m[0][1] * gr[0] + m[1][1] * gr[1]),
                ]
            })
            .collect();
        (v.into_iter().map(|x| x * s).collect(), grads)
    }

    /// Locates the cell containing `x` (linear scan; for diagnostics only).
    pub fn locate(&self, x: Point) -> Option<usize> {
        (0..self.n_cells()).find(|&c| {
            let xi = self.cells[c].to_reference(x);
            xi[0] >= -1e-12 && xi[1] >= -1e-12 && xi[0] + xi[1] <= 1.0 + 1e-12
        })
    }

    pub(crate) fn check_face_usage(&self, f: usize) -> Result<()> {
        if let Neighbor::Boundary(crate::mesh::BoundaryTag::Neumann) = self.mesh.faces[f].right {
            return Err(LdgError::Usage(format!(
                "face {f} is a Neumann face; jumps and averages are not formed there"
            )));
        }
        Ok(())
    }
}

fn build_cell(
    mesh: &Triangulation,
    basis: &ReferenceBasis,
    c: usize,
    order: usize,
) -> Result<CellData> {
    let (origin, jac) = mesh.cell_map(c);
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let inv = [
        [jac[1][1] / det, -jac[0][1] / det],
        [-jac[1][0] / det, jac[0][0] / det],
    ];
    let area = 0.5 * det;
    let (points, weights) = mesh.cell_quadrature(c, order)?;
    let nb = basis.len();
    // Orthonormal on K: φ_b(x) = φ̂_b(ξ) / sqrt(det J).
    let s = 1.0 / det.sqrt();
    let mut phi = Vec::with_capacity(points.len() * nb);
    let mut grad = Vec::with_capacity(points.len() * nb);
    for x in &points {
        let d = [x[0] - origin[0], x[1] - origin[1]];
        let xi = [
            inv[0][0] * d[0] + inv[0][1] * d[1],
            inv[1][0] * d[0] + inv[1][1] * d[1],
        ];
        let (v, g) = basis.eval_with_gradients(xi);
        phi.extend(v.iter().map(|v| v * s));
        // ∇φ = J^{-T} ∇̂φ̂
        grad.extend(g.iter().map(|gr| {
            [
                s * (inv[0][0] * gr[0] + inv[1][0] * gr[1]),
                s * (inv[0][1] * gr[0] + inv[1][1] * gr[1]),
            ]
        }));
    }
    let mut grad_matrix = [vec![0.0; nb * nb], vec![0.0; nb * nb]];
    for (q, w) in weights.iter().enumerate() {
        for b in 0..nb {
            let pb = phi[q * nb + b];
            for bp in 0..nb {
                let g = grad[q * nb + bp];
                grad_matrix[0][b * nb + bp] += w * g[0] * pb;
                grad_matrix[1][b * nb + bp] += w * g[1] * pb;
            }
        }
    }
    Ok(CellData {
        area,
        origin,
        jacobian: jac,
        inverse_jacobian: inv,
        points,
        weights,
        phi,
        grad,
        grad_matrix,
    })
}
