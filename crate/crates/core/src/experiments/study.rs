use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dgspace::{BrokenField, DgSpace, QuadratureSettings, Rank};
use crate::error::{LdgError, Result};
use crate::mesh::Triangulation;
use crate::orlicz::NFunction;
use crate::solver::{newton_solve, prolongate, LdgSystem, SolveReport};

use super::config::{InitialGuess, RunConfig};
use super::errors::{error_quantities, ErrorQuantities};
use super::exact::ExactSolution;

/// One line of the convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EocRow {
    pub level: usize,
    pub h: f64,
    pub errors: ErrorQuantities,
    /// `None` on the first level.
    pub eoc: Option<ErrorQuantities>,
}

/// `log(e_i / e_{i-1}) / log(h_i / h_{i-1})`.
pub fn eoc(e_prev: f64, e: f64, h_prev: f64, h: f64) -> f64 {
    (e / e_prev).ln() / (h / h_prev).ln()
}

/// Rounds to the 12 significant digits stored in `eoc.csv`.
fn stored(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Builds the table from per-level `(level, h, errors)`. Errors and `h` are
/// first rounded to their stored precision so that the rates can be
/// recomputed exactly from `eoc.csv`.
pub fn eoc_rows(levels: &[(usize, f64, ErrorQuantities)]) -> Vec<EocRow> {
    let levels: Vec<(usize, f64, ErrorQuantities)> = levels
        .iter()
        .map(|&(l, h, e)| {
            let e = ErrorQuantities {
                grad: stored(e.grad),
                l: stored(e.l),
                a: stored(e.a),
                jump: stored(e.jump),
            };
            (l, stored(h), e)
        })
        .collect();
    levels
        .iter()
        .enumerate()
        .map(|(i, &(level, h, e))| {
            let rate = (i > 0).then(|| {
                let (_, hp, ep) = levels[i - 1];
                ErrorQuantities {
                    grad: eoc(ep.grad, e.grad, hp, h),
                    l: eoc(ep.l, e.l, hp, h),
                    a: eoc(ep.a, e.a, hp, h),
                    jump: eoc(ep.jump, e.jump, hp, h),
                }
            });
            EocRow {
                level,
                h,
                errors: e,
                eoc: rate,
            }
        })
        .collect()
}

pub const EOC_HEADER: &str = "level,h,e_grad,eoc_grad,e_L,eoc_L,e_A,eoc_A,e_jump,eoc_jump";

/// Writes `eoc.csv` (12 significant digits; empty EOC cells on the first row).
pub fn write_eoc_csv(path: &Path, rows: &[EocRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = std::io::BufWriter::new(File::create(path)?);
    writeln!(w, "{EOC_HEADER}")?;
    let fmt = |v: f64| format!("{v:.11e}");
    for r in rows {
        let rate =
            |f: fn(&ErrorQuantities) -> f64| r.eoc.as_ref().map(|e| fmt(f(e))).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.level,
            fmt(r.h),
            fmt(r.errors.grad),
            rate(|e| e.grad),
            fmt(r.errors.l),
            rate(|e| e.l),
            fmt(r.errors.a),
            rate(|e| e.a),
            fmt(r.errors.jump),
            rate(|e| e.jump),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Discretization of one mesh level.
pub struct Level {
    pub level: usize,
    pub space: Arc<DgSpace>,
}

impl RunConfig {
    pub fn nfunction(&self) -> Result<NFunction> {
        NFunction::new(self.p, self.delta)
    }

    pub fn exact(&self) -> Result<ExactSolution> {
        Ok(ExactSolution::new(self.beta, self.nfunction()?))
    }

    pub fn base_mesh(&self) -> Result<Triangulation> {
        Triangulation::build_cartesian(self.domain, self.h0, |_| true)
    }

    pub fn space_on(&self, mesh: Triangulation) -> Result<DgSpace> {
        let settings = QuadratureSettings {
            elevated: (self.origin_extra_order > 0)
                .then_some(([0.0, 0.0], self.origin_extra_order)),
            ..QuadratureSettings::default()
        };
        DgSpace::with_settings(Arc::new(mesh), self.k, settings)
    }

    /// Spaces on levels `0..levels`.
    pub fn levels(&self) -> Result<Vec<Level>> {
        let mut mesh = self.base_mesh()?;
        let mut out = Vec::with_capacity(self.levels);
        for level in 0..self.levels {
            if level > 0 {
                mesh = mesh.refine_regular();
            }
            out.push(Level {
                level,
                space: Arc::new(self.space_on(mesh.clone())?),
            });
        }
        Ok(out)
    }
}

/// Result of solving and measuring one level.
#[derive(Debug, Clone, Serialize)]
pub struct LevelOutcome {
    pub level: usize,
    pub h: f64,
    pub n_cells: usize,
    pub errors: ErrorQuantities,
    pub seconds: f64,
    pub report: SolveReport,
}

/// Solves the experiment on `space` starting from `initial` (zero if `None`).
/// Solution of the `p = 2` problem with the same data.
fn linear_start(config: &RunConfig, space: &Arc<DgSpace>) -> Result<BrokenField> {
    let mut data = config.exact()?.problem_data(config.alpha)?;
    data.nf = NFunction::new(2.0, 0.0)?;
    let system = LdgSystem::new(space.clone(), data)?;
    let zero = BrokenField::zeros(space, space.degree, Rank::Vector);
    Ok(newton_solve(&system, &zero, &config.newton_options())?.u)
}

pub fn solve_on(
    config: &RunConfig,
    space: &Arc<DgSpace>,
    initial: Option<&BrokenField>,
) -> Result<LevelOutcome> {
    let start = Instant::now();
    let exact = config.exact()?;
    let system = LdgSystem::new(space.clone(), exact.problem_data(config.alpha)?)?;
    let start_field;
    let init = match initial {
        Some(f) => f,
        None => {
            start_field = match config.initial_guess {
                InitialGuess::Zero => BrokenField::zeros(space, space.degree, Rank::Vector),
                InitialGuess::Continuation => linear_start(config, space)?,
            };
            &start_field
        }
    };
    let report = newton_solve(&system, init, &config.newton_options())?;
    let errors = error_quantities(space, &exact, &report.u, &report.l, &report.a)?;
    Ok(LevelOutcome {
        level: space.mesh.level,
        h: space.h(),
        n_cells: space.n_cells(),
        errors,
        seconds: start.elapsed().as_secs_f64(),
        report,
    })
}

/// Per-run summary written to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct StudyReport<'a> {
    pub config: &'a RunConfig,
    pub levels: Vec<&'a LevelOutcome>,
    pub failure: Option<String>,
}

/// Outcome of [`run_convergence_study`].
#[derive(Debug, Clone)]
pub struct Study {
    pub rows: Vec<EocRow>,
    pub outcomes: Vec<LevelOutcome>,
}

fn persist(
    config: &RunConfig,
    outcomes: &[LevelOutcome],
    failure: Option<String>,
) -> Result<Vec<EocRow>> {
    std::fs::create_dir_all(&config.out)?;
    let data: Vec<_> = outcomes.iter().map(|o| (o.level, o.h, o.errors)).collect();
    let rows = eoc_rows(&data);
    write_eoc_csv(&config.out.join("eoc.csv"), &rows)?;
    let report = StudyReport {
        config,
        levels: outcomes.iter().collect(),
        failure,
    };
    std::fs::write(
        config.out.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(rows)
}

/// Solves all levels, writes `eoc.csv` and `report.json` to `config.out`.
/// On failure the completed levels are still written.
pub fn run_convergence_study(config: &RunConfig) -> Result<Study> {
    config.validate()?;
    let levels = config.levels()?;
    let mut outcomes: Vec<LevelOutcome> = Vec::new();
    for lv in &levels {
        let initial = match (config.initial_guess, outcomes.last()) {
            (InitialGuess::Continuation, Some(prev)) => {
                let coarse = &levels[lv.level - 1].space;
                Some(prolongate(coarse, &prev.report.u, &lv.space)?)
            }
            _ => None,
        };
        match solve_on(config, &lv.space, initial.as_ref()) {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                persist(config, &outcomes, Some(format!("level {}: {e}", lv.level)))?;
                return Err(e);
            }
        }
    }
    let rows = persist(config, &outcomes, None)?;
    Ok(Study { rows, outcomes })
}

/// Reads back an `eoc.csv` file as `(level, h, errors)` triples.
pub fn read_eoc_csv(path: &Path) -> Result<Vec<(usize, f64, ErrorQuantities)>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != EOC_HEADER {
        return Err(LdgError::Data(format!(
            "unexpected eoc.csv header '{header}'"
        )));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| LdgError::Data(format!("column {i}: {e}")))
        };
        let level = rec[0]
            .parse::<usize>()
            .map_err(|e| LdgError::Data(e.to_string()))?;
        out.push((
            level,
            num(1)?,
            ErrorQuantities {
                grad: num(2)?,
                l: num(4)?,
                a: num(6)?,
                jump: num(8)?,
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_error_with_halved_h_gives_rate_one() {
        assert_eq!(eoc(0.4, 0.2, 0.5, 0.25), 1.0);
        assert!((eoc(1.0, 0.25, 1.0, 0.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rows_and_csv_round_trip() {
        let e = |v: f64| ErrorQuantities {
            grad: v,
            l: 2.0 * v,
            a: 3.0 * v,
            jump: v * v,
        };
        let data = vec![(0, 1.0, e(0.8)), (1, 0.5, e(0.4)), (2, 0.25, e(0.2))];
        let rows = eoc_rows(&data);
        assert!(rows[0].eoc.is_none());
        assert!((rows[2].eoc.unwrap().grad - 1.0).abs() < 1e-14);
        assert!((rows[2].eoc.unwrap().jump - 2.0).abs() < 1e-14);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eoc.csv");
        write_eoc_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(EOC_HEADER));
        assert!(text.lines().nth(1).unwrap().contains("8.00000000000e-1,,"));
        let back = read_eoc_csv(&path).unwrap();
        assert_eq!(back.len(), 3);
        let again = eoc_rows(&back);
        for (a, b) in again.iter().zip(&rows) {
            assert_eq!(a.eoc.map(|e| e.grad), b.eoc.map(|e| e.grad));
        }
    }
}
