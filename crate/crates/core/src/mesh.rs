//! Conforming triangulations of axis-aligned rectangles with face topology,
//! boundary tags and regular (red) refinement.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LdgError, Result};
use crate::quadrature::{interval_rule, triangle_rule};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub min: Point,
    pub max: Point,
}

impl Rectangle {
    pub fn new(min: Point, max: Point) -> Self {
        Rectangle { min, max }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Rectangle::new([lo, lo], [hi, hi])
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// What lies on the far side of a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Cell(usize),
    Boundary(BoundaryTag),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Neighbor,
    /// Unit normal pointing out of `left`.
    pub normal: Point,
    pub length: f64,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        matches!(self.right, Neighbor::Cell(_))
    }

    pub fn tag(&self) -> Option<BoundaryTag> {
        match self.right {
            Neighbor::Boundary(t) => Some(t),
            Neighbor::Cell(_) => None,
        }
    }

    pub fn right_cell(&self) -> Option<usize> {
        match self.right {
            Neighbor::Cell(c) => Some(c),
            Neighbor::Boundary(_) => None,
        }
    }
}

/// The cells adjacent to a face.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacePatch {
    pub face: usize,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub faces: Vec<Face>,
    /// `cell_faces[c][j]` is the face on the edge `(v_j, v_{j+1})` of cell `c`.
    pub cell_faces: Vec<[usize; 3]>,
    /// Cartesian spacing used as the mesh parameter `h`.
    pub grid_h: f64,
    pub level: usize,
    pub domain: Rectangle,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Triangulation {
    /// Structured mesh of `domain` with spacing `h`: each `h × h` square is
    /// split along a diagonal whose direction alternates in a checkerboard
    /// pattern. Boundary faces whose midpoint satisfies `dirichlet` are tagged
    /// Dirichlet, the rest Neumann.
    pub fn build_cartesian<P>(domain: Rectangle, h: f64, dirichlet: P) -> Result<Self>
    where
        P: Fn(Point) -> bool,
    {
        if !(h > 0.0) {
            return Err(LdgError::Config(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        let count = |len: f64| -> Result<usize> {
            let n = (len / h).round();
            if n < 1.0 || (n * h - len).abs() > 1e-9 * len.abs().max(1.0) {
                return Err(LdgError::Config(format!(
                    "side length {len} is not an integer multiple of h = {h}"
                )));
            }
            Ok(n as usize)
        };
        let nx = count(domain.max[0] - domain.min[0])?;
        let ny = count(domain.max[1] - domain.min[1])?;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([domain.min[0] + i as f64 * h, domain.min[1] + j as f64 * h]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v11, v01) =
                    (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                if (i + j) % 2 == 0 {
                    cells.push([v00, v10, v11]);
                    cells.push([v00, v11, v01]);
                } else {
                    cells.push([v00, v10, v01]);
                    cells.push([v10, v11, v01]);
                }
            }
        }
        let tagger = |_: (usize, usize), mid: Point| {
            if dirichlet(mid) {
                BoundaryTag::Dirichlet
            } else {
                BoundaryTag::Neumann
            }
        };
        Ok(Self::from_cells(vertices, cells, h, 0, domain, tagger))
    }

    fn from_cells<T>(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        grid_h: f64,
        level: usize,
        domain: Rectangle,
        tagger: T,
    ) -> Self
    where
        T: Fn((usize, usize), Point) -> BoundaryTag,
    {
        let mut faces: Vec<Face> = Vec::with_capacity(cells.len() * 3 / 2 + 4);
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        let mut cell_faces = vec![[0usize; 3]; cells.len()];
        for (c, cell) in cells.iter().enumerate() {
            for j in 0..3 {
                let (a, b) = (cell[j], cell[(j + 1) % 3]);
                let key = edge_key(a, b);
                if let Some(&f) = lookup.get(&key) {
                    faces[f].right = Neighbor::Cell(c);
                    cell_faces[c][j] = f;
                } else {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                    let length = dx.hypot(dy);
                    faces.push(Face {
                        vertices: [a, b],
                        left: c,
                        right: Neighbor::Boundary(BoundaryTag::Dirichlet),
                        normal: [dy / length, -dx / length],
                        length,
                    });
                    lookup.insert(key, faces.len() - 1);
                    cell_faces[c][j] = faces.len() - 1;
                }
            }
        }
        for f in faces.iter_mut() {
            if let Neighbor::Boundary(_) = f.right {
                let (pa, pb) = (vertices[f.vertices[0]], vertices[f.vertices[1]]);
                let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                f.right = Neighbor::Boundary(tagger(edge_key(f.vertices[0], f.vertices[1]), mid));
            }
        }
        Triangulation {
            vertices,
            cells,
            faces,
            cell_faces,
            grid_h,
            level,
            domain,
        }
    }

    /// Red refinement: every triangle is split into four similar children by
    /// connecting edge midpoints. Boundary tags are inherited.
    pub fn refine_regular(&self) -> Triangulation {
        let mut vertices = self.vertices.clone();
        let mut midpoint = vec![0usize; self.faces.len()];
        for (f, face) in self.faces.iter().enumerate() {
            let (pa, pb) = (
                self.vertices[face.vertices[0]],
                self.vertices[face.vertices[1]],
            );
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            midpoint[f] = vertices.len() - 1;
        }
        let mut inherited: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for (f, face) in self.faces.iter().enumerate() {
            if let Some(tag) = face.tag() {
                inherited.insert(edge_key(face.vertices[0], midpoint[f]), tag);
                inherited.insert(edge_key(midpoint[f], face.vertices[1]), tag);
            }
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (c, cell) in self.cells.iter().enumerate() {
            let [v0, v1, v2] = *cell;
            let m01 = midpoint[self.cell_faces[c][0]];
            let m12 = midpoint[self.cell_faces[c][1]];
            let m20 = midpoint[self.cell_faces[c][2]];
            cells.push([v0, m01, m20]);
            cells.push([m01, v1, m12]);
            cells.push([m20, m12, v2]);
            cells.push([m01, m12, m20]);
        }
        let tagger = |key: (usize, usize), _: Point| {
            *inherited
                .get(&key)
                .expect("boundary child edge without a parent tag")
        };
        Self::from_cells(
            vertices,
            cells,
            0.5 * self.grid_h,
            self.level + 1,
            self.domain,
            tagger,
        )
    }

    /// Applies [`refine_regular`](Self::refine_regular) `times` times.
    pub fn refined(&self, times: usize) -> Triangulation {
        let mut t = self.clone();
        for _ in 0..times {
            t = t.refine_regular();
        }
        t
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        self.cells[c].map(|v| self.vertices[v])
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, p] = self.cell_points(c);
        0.5 * ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]))
    }

    fn edge_lengths(&self, c: usize) -> [f64; 3] {
        let pts = self.cell_points(c);
        std::array::from_fn(|j| {
            let (a, b) = (pts[j], pts[(j + 1) % 3]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        self.edge_lengths(c).into_iter().fold(0.0, f64::max)
    }

    /// Diameter of the inscribed circle.
    pub fn cell_inball_diameter(&self, c: usize) -> f64 {
        let perimeter: f64 = self.edge_lengths(c).iter().sum();
        4.0 * self.cell_area(c) / perimeter
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let [a, b, p] = self.cell_points(c);
        [(a[0] + b[0] + p[0]) / 3.0, (a[1] + b[1] + p[1]) / 3.0]
    }

    /// `max_K diam(K) / ρ_K`.
    pub fn chunkiness(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.cell_diameter(c) / self.cell_inball_diameter(c))
            .fold(0.0, f64::max)
    }

    /// Largest triangle diameter.
    pub fn max_diameter(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.cell_diameter(c))
            .fold(0.0, f64::max)
    }

    pub fn face_midpoint(&self, f: usize) -> Point {
        let [a, b] = self.faces[f].vertices.map(|v| self.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Outward unit normal of face `f` seen from cell `c`.
    pub fn outward_normal(&self, f: usize, c: usize) -> Point {
        let face = &self.faces[f];
        if face.left == c {
            face.normal
        } else {
            [-face.normal[0], -face.normal[1]]
        }
    }

    /// Cells sharing a face with `c` (interior faces only).
    pub fn neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_faces[c].iter().filter_map(move |&f| {
            let face = &self.faces[f];
            match face.right {
                Neighbor::Cell(r) => Some(if face.left == c { r } else { face.left }),
                Neighbor::Boundary(_) => None,
            }
        })
    }

    pub fn face_patch(&self, f: usize) -> FacePatch {
        let face = &self.faces[f];
        let cells = match face.right {
            Neighbor::Cell(c) => vec![face.left, c],
            Neighbor::Boundary(_) => vec![face.left],
        };
        FacePatch { face: f, cells }
    }

    /// Counts of (interior, Dirichlet, Neumann) faces.
    pub fn face_counts(&self) -> (usize, usize, usize) {
        self.faces
            .iter()
            .fold((0, 0, 0), |(i, d, n), f| match f.right {
                Neighbor::Cell(_) => (i + 1, d, n),
                Neighbor::Boundary(BoundaryTag::Dirichlet) => (i, d + 1, n),
                Neighbor::Boundary(BoundaryTag::Neumann) => (i, d, n + 1),
            })
    }

    /// Affine map from the reference triangle: `x = x0 + J ξ`.
    pub fn cell_map(&self, c: usize) -> (Point, [[f64; 2]; 2]) {
        let [a, b, p] = self.cell_points(c);
        (a, [[b[0] - a[0], p[0] - a[0]], [b[1] - a[1], p[1] - a[1]]])
    }

    /// Gauss points and weights on cell `c`, exact for degree `order`.
    pub fn cell_quadrature(&self, c: usize, order: usize) -> Result<(Vec<Point>, Vec<f64>)> {
        let rule = triangle_rule(order)?;
        let (x0, j) = self.cell_map(c);
        let det = 2.0 * self.cell_area(c);
        let pts = rule
            .points
            .iter()
            .map(|q| {
                [
                    x0[0] + j[0][0] * q[0] + j[0][1] * q[1],
                    x0[1] + j[1][0] * q[0] + j[1][1] * q[1],
                ]
            })
            .collect();
        Ok((pts, rule.weights.iter().map(|w| w * det).collect()))
    }

    /// Gauss points and weights on face `f`, exact for degree `order`,
    /// ordered from `vertices[0]` to `vertices[1]`.
    pub fn face_quadrature(&self, f: usize, order: usize) -> Result<(Vec<Point>, Vec<f64>)> {
        let rule = interval_rule(order)?;
        let face = &self.faces[f];
        let [a, b] = face.vertices.map(|v| self.vertices[v]);
        let pts = rule
            .points
            .iter()
            .map(|s| [a[0] + s[0] * (b[0] - a[0]), a[1] + s[0] * (b[1] - a[1])])
            .collect();
        Ok((pts, rule.weights.iter().map(|w| w * face.length).collect()))
    }

    /// Writes `vertices.csv` (`id,x,y`) and `cells.csv` (`id,v0,v1,v2`).
    pub fn export_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("vertices.csv"))?);
        writeln!(w, "id,x,y")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(w, "{i},{:.17e},{:.17e}", v[0], v[1])?;
        }
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join("cells.csv"))?);
        writeln!(w, "id,v0,v1,v2")?;
        for (i, c) in self.cells.iter().enumerate() {
            writeln!(w, "{i},{},{},{}", c[0], c[1], c[2])?;
        }
        w.flush()?;
        Ok(())
    }
}
