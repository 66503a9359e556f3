use heisenberg_pucci::solver::{operator_residual, BarrierStrategy, Hamiltonian};
use heisenberg_pucci::*;
use std::sync::Arc;

fn annulus() -> DomainSpec {
    DomainSpec::gauge_annulus(GroupPoint::origin(1), 0.5, 1.0).unwrap()
}

fn rho_m2(p: [f64; 3]) -> f64 {
    gauge_norm(&GroupPoint::h1(p[0], p[1], p[2])).powi(-2)
}

fn coarse() -> SolveConfig {
    let mut cfg = SolveConfig::new(1.0 / 16.0);
    cfg.levels = 1;
    cfg.bounding_box = Some(([-1.1; 3], [1.1; 3]));
    cfg
}

#[test]
fn constant_data_is_a_fixed_point() {
    let op = OperatorSpec::pucci_minus(Ellipticity::new(1.0, 2.0).unwrap());
    let out = perron_solve_detailed(&annulus(), &|_| 0.75, &op, &coarse()).unwrap();
    assert!(out.report.converged);
    let interior: Vec<f64> = out
        .solution
        .values
        .iter()
        .zip(&out.solution.mask)
        .filter(|(_, m)| **m == NodeKind::Interior)
        .map(|(v, _)| *v)
        .collect();
    assert!(!interior.is_empty());
    assert!(interior.iter().all(|&v| v == 0.75));
}

#[test]
fn sandwich_and_accuracy_on_annulus() {
    let op = OperatorSpec::pucci_plus(Ellipticity::new(1.0, 1.0).unwrap());
    let out = perron_solve_detailed(&annulus(), &rho_m2, &op, &coarse()).unwrap();
    let r = &out.report;
    assert!(r.converged);
    assert_eq!(r.barrier_violations, 0);
    assert_eq!(r.max_sandwich_violation, 0.0);
    for idx in 0..out.solution.grid.len() {
        if out.solution.mask[idx] == NodeKind::Interior {
            let v = out.solution.values[idx];
            assert!(out.lower.values[idx] <= v && v <= out.upper.values[idx]);
        }
    }
    // sup of the exact solution on the annulus is 4
    assert!(out.solution.sup_error(rho_m2) <= 0.05 * 4.0 * 4.0);
}

#[test]
fn equal_constants_make_both_operators_agree() {
    let e = Ellipticity::new(1.0, 1.0).unwrap();
    let cfg = coarse();
    let (a, ra) = perron_solve(&annulus(), &rho_m2, &OperatorSpec::pucci_plus(e), &cfg).unwrap();
    let (b, rb) = perron_solve(&annulus(), &rho_m2, &OperatorSpec::pucci_minus(e), &cfg).unwrap();
    assert_eq!(ra.iterations, rb.iterations);
    assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn sequential_and_parallel_solves_agree() {
    let op = OperatorSpec::pucci_minus(Ellipticity::new(1.0, 2.0).unwrap());
    let mut cfg = coarse();
    cfg.execution = Execution::Sequential;
    let (a, _) = perron_solve(&annulus(), &rho_m2, &op, &cfg).unwrap();
    cfg.execution = Execution::Parallel;
    let (b, _) = perron_solve(&annulus(), &rho_m2, &op, &cfg).unwrap();
    assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn unclamped_nodes_have_small_residual() {
    let op = OperatorSpec::pucci_plus(Ellipticity::new(1.0, 1.0).unwrap());
    let out = perron_solve_detailed(&annulus(), &rho_m2, &op, &coarse()).unwrap();
    assert!(out.report.projected_residual <= 1e-5);
    let res = operator_residual(&out.solution, &op, None, Execution::Parallel).unwrap();
    let mut clamped = 0;
    for i in 0..res.values.len() {
        if out.solution.mask[i] != NodeKind::Interior {
            continue;
        }
        let u = out.solution.values[i];
        if u == out.lower.values[i] || u == out.upper.values[i] {
            clamped += 1;
        } else {
            assert!(res.values[i].abs() <= 1e-5, "residual {} at node {i}", res.values[i]);
        }
    }
    assert_eq!(clamped, out.report.clamped_nodes);
}

/// u = 1 + x + t/2 has a vanishing horizontal Hessian; the solve reproduces it up to the
/// band extrapolation error.
fn affine_solution() -> (GridFunction, OperatorSpec) {
    let op = OperatorSpec::pucci_plus(Ellipticity::new(1.0, 2.0).unwrap());
    let (u, _) = perron_solve(&annulus(), &|p| 1.0 + p[0] + 0.5 * p[2], &op, &coarse()).unwrap();
    (u, op)
}

#[test]
fn comparison_of_exact_solution_with_itself() {
    let (u, op) = affine_solution();
    let rep = comparison_check(&u, &u, &op, None, 1e-4, 1e-12, Execution::Parallel).unwrap();
    assert!(rep.passed);
    assert_eq!(rep.max_difference, 0.0);
}

#[test]
fn shifted_supersolution_stays_above() {
    let (u, op) = affine_solution();
    let mut v = u.clone();
    for (x, m) in v.values.iter_mut().zip(&u.mask) {
        if *m != NodeKind::Exterior {
            *x += 0.01;
        }
    }
    let rep = comparison_check(&u, &v, &op, None, 1e-4, 1e-12, Execution::Parallel).unwrap();
    assert!(rep.passed);
    assert!((rep.max_difference + 0.01).abs() < 1e-12);
}

#[test]
fn comparison_rejects_non_subsolution() {
    let (u, op) = affine_solution();
    let g = u.grid;
    // a strict concave bump: M̃⁺ > 0 at its top
    let bump = GridFunction {
        values: (0..g.len()).map(|i| u.values[i] - 3.0 * (g.point(i)[0].powi(2) + g.point(i)[1].powi(2))).collect(),
        grid: g,
        mask: u.mask.clone(),
    };
    assert!(matches!(
        comparison_check(&bump, &u, &op, None, 1e-4, 1e-12, Execution::Parallel),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn grid_dump_roundtrip() {
    let op = OperatorSpec::pucci_plus(Ellipticity::new(1.0, 1.0).unwrap());
    let mut cfg = SolveConfig::new(1.0 / 8.0);
    cfg.levels = 1;
    let (u, _) = perron_solve(&annulus(), &rho_m2, &op, &cfg).unwrap();
    let mut buf = Vec::new();
    u.write_dump(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# n=1 axes=x,y,t"));
    let back = GridFunction::read_dump(&text).unwrap();
    assert_eq!(back.grid, u.grid);
    assert_eq!(back.mask, u.mask);
    for i in 0..u.grid.len() {
        if u.mask[i] == NodeKind::Exterior {
            assert!(back.values[i].is_nan());
        } else {
            assert!((back.values[i] - u.values[i]).abs() <= 1e-11 * u.values[i].abs());
        }
    }
}

#[test]
fn error_decreases_under_refinement() {
    let op = OperatorSpec::pucci_plus(Ellipticity::new(1.0, 1.0).unwrap());
    let mut errs = Vec::new();
    for (h, levels) in [(1.0 / 8.0, 1), (1.0 / 16.0, 1)] {
        let mut cfg = SolveConfig::new(h);
        cfg.levels = levels;
        cfg.bounding_box = Some(([-1.1; 3], [1.1; 3]));
        let (u, _) = perron_solve(&annulus(), &rho_m2, &op, &cfg).unwrap();
        errs.push(u.sup_error(rho_m2));
    }
    assert!(errs[1] < 0.6 * errs[0], "{errs:?}");
}

#[test]
fn annulus_strategy_with_first_order_term() {
    let e = Ellipticity::new(1.0, 2.0).unwrap();
    let fb = FirstOrderBound::new(1.0, 1.0, Weight::GaugeGradientAt(GroupPoint::origin(1))).unwrap();
    let ham = Hamiltonian {
        f: Arc::new(|xi: [f64; 3], p: [f64; 2]| {
            let g = gauge_gradient(&GroupPoint::h1(xi[0], xi[1], xi[2])).map(|g| g[0].hypot(g[1])).unwrap_or(0.0);
            0.5 * g * p[0].hypot(p[1]) - 0.5 * g * g
        }),
        bound: fb,
    };
    let mut cfg = coarse();
    cfg.hamiltonian = Some(ham);
    let out = perron_solve_detailed(&annulus(), &|_| 0.0, &OperatorSpec::pucci_minus(e), &cfg).unwrap();
    assert_eq!(out.report.strategy, BarrierStrategy::Annulus);
    assert!(out.report.converged);
    assert_eq!(out.report.barrier_violations, 0);
}

#[test]
fn glued_strategy_with_nonzero_data() {
    let e = Ellipticity::new(1.0, 2.0).unwrap();
    let fb = FirstOrderBound::new(0.5, 0.2, Weight::None).unwrap();
    let ham = Hamiltonian { f: Arc::new(|_, p: [f64; 2]| 0.5 * p[0].hypot(p[1]) - 0.2), bound: fb };
    let mut cfg = coarse();
    cfg.hamiltonian = Some(ham);
    let ball = DomainSpec::gauge_ball(GroupPoint::origin(1), 1.0).unwrap();
    let out = perron_solve_detailed(&ball, &|p| p[0] + 0.5 * p[2], &OperatorSpec::pucci_minus(e), &cfg).unwrap();
    assert_eq!(out.report.strategy, BarrierStrategy::Glued);
    assert!(out.report.converged);
    assert_eq!(out.report.max_sandwich_violation, 0.0);
}

#[test]
fn exterior_balls_on_a_characteristic_cap() {
    let e = Ellipticity::new(1.0, 2.0).unwrap();
    let cap = DomainSpec::characteristic_cap(1, -1.0).unwrap();
    let out = perron_solve_detailed(&cap, &|p| p[0] * p[1] + p[2], &OperatorSpec::pucci_minus(e), &coarse()).unwrap();
    assert_eq!(out.report.strategy, BarrierStrategy::ExteriorBalls);
    assert!(out.report.converged);
}

#[test]
fn box_faces_carry_the_data() {
    let e = Ellipticity::new(1.0, 2.0).unwrap();
    let cap = DomainSpec::characteristic_cap(1, -1.0).unwrap();
    let mut cfg = SolveConfig::new(1.0 / 16.0);
    cfg.levels = 1;
    let affine = |p: [f64; 3]| p[0] + 0.5 * p[2];
    let out = perron_solve_detailed(&cap, &affine, &OperatorSpec::pucci_minus(e), &cfg).unwrap();
    assert!(out.report.converged);
    assert_eq!(out.report.barrier_violations, 0);
    let err = out.solution.sup_error(affine);
    assert!(err < 0.06, "{err}");

    cfg.barriers = BarrierStrategy::Glued;
    cfg.hamiltonian = Some(Hamiltonian {
        f: Arc::new(|_, p: [f64; 2]| p[0].hypot(p[1])),
        bound: FirstOrderBound::new(1.0, 0.0, Weight::None).unwrap(),
    });
    assert!(matches!(perron_solve(&cap, &affine, &OperatorSpec::pucci_minus(e), &cfg), Err(Error::Barrier(_))));
}

#[test]
fn exterior_balls_reject_first_order_terms() {
    let e = Ellipticity::new(1.0, 1.0).unwrap();
    let fb = FirstOrderBound::new(1.0, 0.0, Weight::None).unwrap();
    let mut cfg = coarse();
    cfg.barriers = BarrierStrategy::ExteriorBalls;
    cfg.hamiltonian = Some(Hamiltonian { f: Arc::new(|_, p: [f64; 2]| p[0].hypot(p[1])), bound: fb });
    assert!(perron_solve(&annulus(), &rho_m2, &OperatorSpec::pucci_plus(e), &cfg).is_err());
}

#[test]
fn invalid_config_rejected() {
    let e = Ellipticity::new(1.0, 1.0).unwrap();
    let cfg = SolveConfig::new(-0.1);
    assert!(perron_solve(&annulus(), &rho_m2, &OperatorSpec::pucci_plus(e), &cfg).is_err());
}
