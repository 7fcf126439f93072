use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dgspace::{BrokenField, DgSpace, Rank};
use crate::experiments::ExactSolution;
use crate::mesh::{Point, Rectangle, Triangulation};
use crate::orlicz::{op_a, NFunction, Tensor2};

fn space(level: usize, k: usize) -> Arc<DgSpace> {
    let mesh = Triangulation::build_cartesian(Rectangle::square(-2.0, 2.0), 1.0, |_| true)
        .unwrap()
        .refined(level);
    Arc::new(DgSpace::new(Arc::new(mesh), k).unwrap())
}

fn random_vec(n: usize, amp: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    d / norm2(a).max(1e-300)
}

fn paper_system(sp: &Arc<DgSpace>, p: f64, alpha: f64) -> LdgSystem {
    let ex = ExactSolution::new(0.01, NFunction::new(p, 1e-3).unwrap());
    LdgSystem::new(sp.clone(), ex.problem_data(alpha).unwrap()).unwrap()
}

#[test]
fn zero_data_gives_zero_residual_at_zero() {
    let sp = space(1, 1);
    let sys = LdgSystem::new(
        sp,
        ProblemData::new(NFunction::new(3.0, 1e-3).unwrap(), 1.0).unwrap(),
    )
    .unwrap();
    let r = sys.residual(&vec![0.0; sys.n_dofs()]).unwrap();
    assert!(r.iter().all(|v| *v == 0.0));
}

#[test]
fn invalid_alpha_is_rejected() {
    let nf = NFunction::new(2.0, 0.0).unwrap();
    assert!(ProblemData::new(nf, 0.0).is_err());
    assert!(ProblemData::new(nf, f64::NAN).is_err());
}

#[test]
fn data_callback_errors_propagate() {
    let sp = space(0, 1);
    let nf = NFunction::new(2.0, 0.0).unwrap();
    let bad: VectorFn = Arc::new(|_| Err(crate::LdgError::Data("no value".into())));
    let res = LdgSystem::new(sp, ProblemData::new(nf, 1.0).unwrap().with_source(bad));
    assert!(matches!(res, Err(crate::LdgError::Data(_))));
}

fn jacobian_fd_check(p: f64, mode: ShiftMode, seed: u64) -> f64 {
    let sp = space(0, 1);
    let sys = paper_system(&sp, p, 0.7);
    let n = sys.n_dofs();
    let u = random_vec(n, 1.0, seed);
    let v = random_vec(n, 1.0, seed + 1);
    let jv = sys.jacobian(&u, mode).unwrap().mul(&v);
    let eps = 1e-6;
    let up: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
    let um: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
    let (rp, rm) = match mode {
        ShiftMode::Full => (sys.residual(&up).unwrap(), sys.residual(&um).unwrap()),
        ShiftMode::Lagged => {
            let frozen = sys.state(&u).unwrap().shifts;
            let sp_ = sys.state(&up).unwrap();
            let sm_ = sys.state(&um).unwrap();
            (
                sys.residual_with_shifts(&up, &sp_, &frozen).unwrap(),
                sys.residual_with_shifts(&um, &sm_, &frozen).unwrap(),
            )
        }
    };
    let fd: Vec<f64> = rp
        .iter()
        .zip(&rm)
        .map(|(a, b)| (a - b) / (2.0 * eps))
        .collect();
    rel_diff(&jv, &fd)
}

#[test]
fn lagged_jacobian_matches_frozen_shift_differences() {
    for (i, p) in [1.5, 2.0, 3.0, 4.0].into_iter().enumerate() {
        let e = jacobian_fd_check(p, ShiftMode::Lagged, 10 + i as u64);
        assert!(e <= 1e-5, "p = {p}: {e:e}");
    }
}

#[test]
fn full_jacobian_matches_plain_differences() {
    for (i, p) in [1.5, 2.5, 3.0, 4.0].into_iter().enumerate() {
        let e = jacobian_fd_check(p, ShiftMode::Full, 20 + i as u64);
        assert!(e <= 1e-5, "p = {p}: {e:e}");
    }
}

#[test]
fn lagged_jacobian_is_symmetric_with_symmetric_pattern() {
    let sp = space(1, 1);
    for p in [1.25, 3.0] {
        let sys = paper_system(&sp, p, 1.0);
        let u = random_vec(sys.n_dofs(), 1.0, 3);
        let j = sys.jacobian(&u, ShiftMode::Lagged).unwrap();
        assert!(j.max_asymmetry() / j.max_abs() <= 1e-10, "p = {p}");
        assert!(j.pattern_is_symmetric());
        let jf = sys.jacobian(&u, ShiftMode::Full).unwrap();
        assert!(
            jf.max_asymmetry() / jf.max_abs() > 1e-8,
            "full mode couples through the shift"
        );
    }
}

#[test]
fn stencil_reaches_face_neighbours() {
    let sp = space(1, 1);
    let sys = paper_system(&sp, 2.0, 1.0);
    for (c, st) in sys.stencils.iter().enumerate() {
        assert_eq!(st.cells[0], c);
        let neighbours: Vec<usize> = sp.mesh.neighbors(c).collect();
        assert_eq!(st.cells.len(), 1 + neighbours.len());
        assert_eq!(st.n_cols(), 2 * sp.nb() * st.cells.len());
    }
}

/// Data for a polynomial exact solution of degree ≤ k with `u_D = u`.
fn polynomial_problem(
    sp: &Arc<DgSpace>,
    nf: NFunction,
    u: impl Fn(Point) -> [f64; 2] + Send + Sync + Copy + 'static,
    f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
) -> (LdgSystem, Vec<f64>) {
    let data = ProblemData::new(nf, 1.3)
        .unwrap()
        .with_source(Arc::new(move |x| Ok(f(x))))
        .with_dirichlet(Arc::new(move |x| Ok(u(x))));
    let sys = LdgSystem::new(sp.clone(), data).unwrap();
    let proj = BrokenField::project_vector(sp, sp.degree, u).unwrap();
    (sys, proj.coeffs)
}

#[test]
fn affine_solutions_are_reproduced() {
    let sp = space(1, 1);
    let u = |x: Point| {
        [
            0.3 + 1.1 * x[0] - 0.4 * x[1],
            -0.2 + 0.5 * x[0] + 0.9 * x[1],
        ]
    };
    for (p, delta) in [(2.0, 0.0), (1.5, 1e-3), (3.0, 0.5), (4.0, 1e-3)] {
        let (sys, uh) =
            polynomial_problem(&sp, NFunction::new(p, delta).unwrap(), u, |_| [0.0, 0.0]);
        let r = sys.residual(&uh).unwrap();
        assert!(norm2(&r) <= 1e-9, "p = {p}: {:e}", norm2(&r));
        for mode in [ShiftMode::Lagged, ShiftMode::Full] {
            let j = sys.jacobian(&uh, mode).unwrap();
            assert!(j.values.iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn quadratic_solution_is_reproduced_for_k2() {
    // u = (x² - y², 2xy) is harmonic; with p = 2 the source vanishes.
    let sp = space(0, 2);
    let u = |x: Point| [x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]];
    let (sys, uh) = polynomial_problem(&sp, NFunction::new(2.0, 0.0).unwrap(), u, |_| [0.0, 0.0]);
    assert!(norm2(&sys.residual(&uh).unwrap()) <= 1e-9);
    // u = (x², 0): -Δu = (-2, 0).
    let u2 = |x: Point| [x[0] * x[0], 0.0];
    let (sys2, uh2) =
        polynomial_problem(&sp, NFunction::new(2.0, 0.0).unwrap(), u2, |_| [-2.0, 0.0]);
    assert!(norm2(&sys2.residual(&uh2).unwrap()) <= 1e-9);
}

#[test]
fn tensor_source_and_neumann_terms_are_consistent() {
    // p = 2, u quadratic, F = ∇u - C, f = 0, Neumann data (∇u - F) n = C n on x = 2.
    let mesh =
        Triangulation::build_cartesian(Rectangle::square(-2.0, 2.0), 1.0, |x| x[0] < 2.0 - 1e-9)
            .unwrap();
    let sp = Arc::new(DgSpace::new(Arc::new(mesh), 2).unwrap());
    let u = |x: Point| [x[0] * x[1], x[0] * x[0] - 0.5 * x[1]];
    let grad = |x: Point| Tensor2::new(x[1], x[0], 2.0 * x[0], -0.5);
    let c = Tensor2::new(0.7, -0.2, 0.1, 0.4);
    let data = ProblemData::new(NFunction::new(2.0, 0.0).unwrap(), 2.0)
        .unwrap()
        .with_tensor_source(Arc::new(move |x| Ok(grad(x) - c)))
        .with_dirichlet(Arc::new(move |x| Ok(u(x))))
        .with_neumann(Arc::new(move |_| Ok(c.apply([1.0, 0.0]))));
    let sys = LdgSystem::new(sp.clone(), data).unwrap();
    let uh = BrokenField::project_vector(&sp, 2, u).unwrap();
    let r = sys.residual(&uh.coeffs).unwrap();
    assert!(norm2(&r) <= 1e-9, "{:e}", norm2(&r));
}

#[test]
fn linear_problem_converges_in_one_step() {
    let sp = space(2, 1);
    let nf = NFunction::new(2.0, 0.0).unwrap();
    let data = ProblemData::new(nf, 2.0)
        .unwrap()
        .with_source(Arc::new(|x: Point| Ok([x[0].sin(), x[1] * x[0]])))
        .with_dirichlet(Arc::new(|x: Point| Ok([x[1], 1.0])));
    let sys = LdgSystem::new(sp.clone(), data).unwrap();
    let report = newton_solve(
        &sys,
        &BrokenField::zeros(&sp, 1, Rank::Vector),
        &NewtonOptions::default(),
    )
    .unwrap();
    assert!(report.converged);
    assert_eq!(report.iterations, 1);
    assert_eq!(report.step_sizes, vec![1.0]);
    assert!(report.linear[0].relative_residual <= 1e-10);
}

#[test]
fn level3_linear_jacobian_meets_linear_contract() {
    let sp = space(3, 1);
    let sys = paper_system(&sp, 2.0, 2.0);
    let u = vec![0.0; sys.n_dofs()];
    let r = sys.residual(&u).unwrap();
    let j = sys.jacobian(&u, ShiftMode::Lagged).unwrap();
    let (d, stats) = linear_solve(&j, &r, &LinearSolverOptions::default()).unwrap();
    let jd = j.mul(&d);
    let res: f64 = jd
        .iter()
        .zip(&r)
        .map(|(a, b)| (a + b).powi(2))
        .sum::<f64>()
        .sqrt()
        / norm2(&r);
    assert!(res <= 1e-10, "{res:e}");
    assert!((res - stats.relative_residual).abs() <= 1e-12);
}

#[test]
fn p4_problem_converges_monotonically_and_is_a_fixed_point() {
    let sp = space(2, 1);
    let sys = paper_system(&sp, 4.0, 2.5);
    let opts = NewtonOptions::default();
    let report = newton_solve(&sys, &BrokenField::zeros(&sp, 1, Rank::Vector), &opts).unwrap();
    assert!(report.converged);
    assert!(report.residual_norms.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(report.iterations, 13);
    // Plugging the solution back in.
    let r = sys.residual(&report.u.coeffs).unwrap();
    assert_eq!(norm2(&r), report.final_residual());
    assert!(report.final_residual() <= opts.atol.max(opts.rtol * report.residual_norms[0]));
    let again = newton_solve(&sys, &report.u, &opts).unwrap();
    assert!(again.iterations <= 1);
    // A_h is the projection of A(L_h).
    let c = 5;
    let l = report.l.tensor_at_qp(&sp, c, 0);
    assert!(l.norm() > 0.0);
    let a_direct = BrokenField::project(&sp, 1, Rank::Tensor, |cell, x, out| {
        let lx = report.l.value_at(&sp, cell, x);
        out.copy_from_slice(&op_a(&sys.data.nf, &Tensor2([lx[0], lx[1], lx[2], lx[3]])).0);
    })
    .unwrap();
    assert!(rel_diff(&a_direct.coeffs, &report.a.coeffs) <= 1e-12);
}

#[test]
fn full_shift_mode_also_converges() {
    let sp = space(1, 1);
    let sys = paper_system(&sp, 3.0, 2.5);
    let opts = NewtonOptions {
        shift_mode: ShiftMode::Full,
        ..NewtonOptions::default()
    };
    let full = newton_solve(&sys, &BrokenField::zeros(&sp, 1, Rank::Vector), &opts).unwrap();
    let lagged = newton_solve(
        &sys,
        &BrokenField::zeros(&sp, 1, Rank::Vector),
        &NewtonOptions::default(),
    )
    .unwrap();
    assert!(rel_diff(&full.u.coeffs, &lagged.u.coeffs) <= 1e-8);
}

#[test]
fn too_few_iterations_report_nonconvergence_with_trace() {
    let sp = space(1, 1);
    let sys = paper_system(&sp, 4.0, 2.5);
    let opts = NewtonOptions {
        max_iter: 2,
        ..NewtonOptions::default()
    };
    match newton_solve(&sys, &BrokenField::zeros(&sp, 1, Rank::Vector), &opts) {
        Err(crate::LdgError::NonConvergence {
            iterations, trace, ..
        }) => {
            assert_eq!(iterations, 2);
            assert_eq!(trace.len(), 3);
        }
        other => panic!("expected nonconvergence, got {other:?}"),
    }
    let bad = NewtonOptions {
        atol: 0.0,
        ..NewtonOptions::default()
    };
    assert!(newton_solve(&sys, &BrokenField::zeros(&sp, 1, Rank::Vector), &bad).is_err());
}

#[test]
fn residual_pairing_is_coercive_along_rays() {
    // ⟨B_h u - b_h, u - Π u_D*⟩ > 0 once ‖u‖ is large.
    let sp = space(1, 1);
    for p in [1.5, 2.0, 4.0] {
        let sys = paper_system(&sp, p, 1.0);
        let ex = ExactSolution::new(0.01, NFunction::new(p, 1e-3).unwrap());
        let pud = BrokenField::project_vector(&sp, 1, |x| ex.u(x)).unwrap();
        for dir in 0..10 {
            let d = random_vec(sys.n_dofs(), 1.0, 100 + dir);
            let mut last = f64::NEG_INFINITY;
            for s in [10.0, 100.0, 1000.0] {
                let u: Vec<f64> = pud.coeffs.iter().zip(&d).map(|(a, b)| a + s * b).collect();
                let r = sys.residual(&u).unwrap();
                let pairing: f64 = r.iter().zip(&d).map(|(a, b)| a * s * b).sum();
                assert!(pairing > 0.0, "p = {p}, s = {s}");
                assert!(pairing > last);
                last = pairing;
            }
        }
    }
}

#[test]
fn prolongation_is_exact_for_piecewise_polynomials() {
    let coarse = space(1, 1);
    let fine = space(2, 1);
    let u = BrokenField::from_coeffs(
        &coarse,
        1,
        Rank::Vector,
        random_vec(coarse.n_cells() * 6, 1.0, 9),
    )
    .unwrap();
    let uf = prolongate(&coarse, &u, &fine).unwrap();
    for c in 0..fine.n_cells() {
        let x = fine.cells[c].points[2];
        let a = uf.value_at(&fine, c, x);
        let b = u.value_at(&coarse, c / 4, x);
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
    assert!(prolongate(&coarse, &u, &coarse).is_err());
}

#[test]
fn shift_mode_parses() {
    assert_eq!("lagged".parse::<ShiftMode>().unwrap(), ShiftMode::Lagged);
    assert_eq!("full".parse::<ShiftMode>().unwrap(), ShiftMode::Full);
    assert!("frozen".parse::<ShiftMode>().is_err());
}
