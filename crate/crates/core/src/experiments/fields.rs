use std::path::Path;

use serde::Serialize;

use crate::dgspace::{export_samples, BrokenField, DgSpace, Rank};
use crate::error::Result;
use crate::mesh::Point;
use crate::operators::lift;
use crate::orlicz::op_a;

use super::config::RunConfig;
use super::errors::error_concentration;
use super::exact::ExactSolution;
use super::study::{solve_on, LevelOutcome};

/// File names of the exported quantities.
pub const FIELD_FILES: [&str; 8] = [
    "u_abs.csv",
    "u_err.csv",
    "l_abs.csv",
    "l_err.csv",
    "a_abs.csv",
    "a_err.csv",
    "lift_u.csv",
    "lift_err.csv",
];

#[derive(Debug, Clone, Serialize)]
pub struct FieldSummary {
    pub level: usize,
    pub n_cells: usize,
    /// Share of `∫|F(∇_h u_h) - F(∇u)|²` inside `|x| ≤ 0.5`.
    pub concentration_radius: f64,
    pub concentration: f64,
    pub files: Vec<String>,
}

/// `Π¹_h` of a pointwise scalar.
fn project_scalar_p1<G>(space: &DgSpace, g: G) -> Result<BrokenField>
where
    G: Fn(usize, Point) -> f64 + Sync,
{
    // Stored as the first component of a vector field.
    BrokenField::project(space, space.degree.min(1), Rank::Vector, |c, x, out| {
        out[0] = g(c, x);
        out[1] = 0.0;
    })
}

fn first_component(space: &DgSpace, f: &BrokenField, c: usize, q: usize) -> f64 {
    f.vector_at_qp(space, c, q)[0]
}

/// Solves on the finest configured level and writes the eight field CSVs
/// plus `fields.json` into `config.out`.
pub fn export_fields(config: &RunConfig) -> Result<(FieldSummary, LevelOutcome)> {
    config.validate()?;
    let level = config.levels()?.pop().expect("at least one level");
    let space = level.space;
    let outcome = solve_on(config, &space, None)?;
    let exact: ExactSolution = config.exact()?;
    let (u, l, a) = (&outcome.report.u, &outcome.report.l, &outcome.report.a);
    let out: &Path = &config.out;
    std::fs::create_dir_all(out)?;

    let abs_u = project_scalar_p1(&space, |c, x| {
        let v = u.value_at(&space, c, x);
        v[0].hypot(v[1])
    })?;
    let err_u = project_scalar_p1(&space, |c, x| {
        let v = u.value_at(&space, c, x);
        let e = exact.u(x);
        (v[0] - e[0]).hypot(v[1] - e[1])
    })?;
    let ex = exact;
    let boundary = move |x: Point| ex.u(x);
    let lift_u = lift(&space, u, None)?;
    let lift_err = lift(&space, u, Some(&boundary))?;

    let point = |c: usize, q: usize| space.cells[c].points[q];
    let grad = |c: usize, q: usize| {
        exact
            .grad(point(c, q))
            .expect("quadrature points avoid the origin")
    };
    export_samples(&space, &out.join(FIELD_FILES[0]), |c, q| {
        first_component(&space, &abs_u, c, q)
    })?;
    export_samples(&space, &out.join(FIELD_FILES[1]), |c, q| {
        first_component(&space, &err_u, c, q)
    })?;
    export_samples(&space, &out.join(FIELD_FILES[2]), |c, q| {
        l.tensor_at_qp(&space, c, q).norm()
    })?;
    export_samples(&space, &out.join(FIELD_FILES[3]), |c, q| {
        (l.tensor_at_qp(&space, c, q) - grad(c, q)).norm()
    })?;
    export_samples(&space, &out.join(FIELD_FILES[4]), |c, q| {
        a.tensor_at_qp(&space, c, q).norm()
    })?;
    export_samples(&space, &out.join(FIELD_FILES[5]), |c, q| {
        (a.tensor_at_qp(&space, c, q) - op_a(&exact.nf, &grad(c, q))).norm()
    })?;
    export_samples(&space, &out.join(FIELD_FILES[6]), |c, q| {
        lift_u.tensor_at_qp(&space, c, q).norm()
    })?;
    export_samples(&space, &out.join(FIELD_FILES[7]), |c, q| {
        lift_err.tensor_at_qp(&space, c, q).norm()
    })?;

    let radius = 0.5;
    let summary = FieldSummary {
        level: level.level,
        n_cells: space.n_cells(),
        concentration_radius: radius,
        concentration: error_concentration(&space, &exact, u, radius)?,
        files: FIELD_FILES.iter().map(|s| s.to_string()).collect(),
    };
    std::fs::write(
        out.join("fields.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok((summary, outcome))
}
