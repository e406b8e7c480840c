use super::*;
use crate::oracles::Exact1DObstacle;

fn oracle(n: usize) -> (OperatorSpec, ScalarField, ScalarField, ScalarField) {
    let o = Exact1DObstacle::new(2.0, 1.0, 0.02, 0.02).unwrap();
    let grid = Exact1DObstacle::grid(n).unwrap();
    let (spec, f, g) = o.problem(grid).unwrap();
    let exact = o.sample(grid).unwrap();
    (spec, f, g, exact)
}

#[test]
fn zero_data_gives_zero() {
    let grid = Grid::unit(2, 16).unwrap();
    let spec = OperatorSpec::p_laplacian(grid, 1.7, 0.0).unwrap();
    let z = ScalarField::zeros(grid);
    let sol = solve_vi(&spec, &z, &z, &SolveConfig::default()).unwrap();
    assert!(sol.u.values().iter().all(|&v| v == 0.0));
    let pen = solve(&spec, &z, &z, &SolveConfig::penalized()).unwrap();
    assert!(pen.u.values().iter().all(|&v| v == 0.0));
    assert_eq!(pen.eps_final, Some(1e-5));
}

#[test]
fn oracle_error_is_bounded_by_h() {
    for n in [32, 64, 128] {
        let (spec, f, g, exact) = oracle(n);
        let sol = solve_vi(&spec, &f, &g, &SolveConfig::default()).unwrap();
        assert!(sol.final_residual() <= 1e-8);
        let err = sol.u.max_abs_diff(&exact).unwrap();
        assert!(err <= 0.1 / n as f64, "n = {n}: {err}");
    }
    let mut errs = Vec::new();
    for n in [32, 64, 128] {
        let o = Exact1DObstacle::new(1.5, 1.0, 0.02, 0.02).unwrap();
        let grid = Exact1DObstacle::grid(n).unwrap();
        let (spec, f, g) = o.problem(grid).unwrap();
        let sol = solve_vi(&spec, &f, &g, &SolveConfig::default()).unwrap();
        errs.push(sol.u.max_abs_diff(&o.sample(grid).unwrap()).unwrap());
    }
    assert!(errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8, "{errs:?}");
}

#[test]
fn relaxation_alone_converges() {
    let (spec, f, g, _) = oracle(32);
    let cfg = SolveConfig {
        accelerate: false,
        cascade: false,
        ..Default::default()
    };
    let a = solve_vi(&spec, &f, &g, &cfg).unwrap();
    let b = solve_vi(&spec, &f, &g, &SolveConfig::default()).unwrap();
    assert!(a.newton_steps == 0 && a.sweeps > 0);
    assert!(a.u.max_abs_diff(&b.u).unwrap() < 1e-6);
}

#[test]
fn maximum_principle_and_complementarity() {
    let grid = Grid::unit(2, 24).unwrap();
    let spec = OperatorSpec::p_laplacian(grid, 2.5, 0.0).unwrap();
    let f = ScalarField::from_fn(grid, |x| 1.0 + x[0]).unwrap();
    let g = ScalarField::from_fn(grid, |x| 0.05 * (1.0 + x[1])).unwrap();
    let cfg = SolveConfig::default();
    let sol = solve_vi(&spec, &f, &g, &cfg).unwrap();
    let gmax = g.max();
    assert!(sol.u.values().iter().all(|&v| (0.0..=gmax + 1e-8).contains(&v)));
    let rep = complementarity_report(&spec, &sol, &f).unwrap();
    assert!(rep.r1 * rep.f_scale <= 10.0 * cfg.tol_residual, "{rep:?}");
    assert!(sol.active_mask.iter().any(|&a| a));
}

#[test]
fn comparison_in_boundary_data() {
    let grid = Grid::unit(2, 20).unwrap();
    let spec = OperatorSpec::p_laplacian(grid, 1.6, 0.0).unwrap();
    let f = ScalarField::constant(grid, 1.0);
    let g1 = ScalarField::from_fn(grid, |x| 0.03 * x[0]).unwrap();
    let g2 = ScalarField::from_fn(grid, |x| 0.03 * x[0] + 0.01 * x[1]).unwrap();
    let cfg = SolveConfig::default();
    let a = solve_vi(&spec, &f, &g1, &cfg).unwrap();
    let b = solve_vi(&spec, &f, &g2, &cfg).unwrap();
    for (x, y) in a.u.values().iter().zip(b.u.values()) {
        assert!(*y >= x - 10.0 * cfg.tol_residual);
    }
}

#[test]
fn initial_guess_does_not_matter() {
    let grid = Grid::unit(2, 16).unwrap();
    let spec = OperatorSpec::p_laplacian(grid, 3.0, 0.0).unwrap();
    let f = ScalarField::constant(grid, 2.0);
    let g = ScalarField::constant(grid, 0.04);
    let cfg = SolveConfig::default();
    let a = solve_vi_from(&spec, &f, &g, &cfg, &ScalarField::zeros(grid)).unwrap();
    let b = solve_vi_from(&spec, &f, &g, &cfg, &ScalarField::constant(grid, 0.5)).unwrap();
    assert!(a.u.max_abs_diff(&b.u).unwrap() <= 10.0 * cfg.tol_residual);
}

#[test]
fn negative_boundary_data_rejected() {
    let grid = Grid::unit(1, 8).unwrap();
    let spec = OperatorSpec::laplacian(grid).unwrap();
    let f = ScalarField::constant(grid, 1.0);
    let g = ScalarField::constant(grid, -1.0);
    assert!(matches!(
        solve_vi(&spec, &f, &g, &SolveConfig::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn budget_exhaustion_reports_history() {
    let (spec, f, g, _) = oracle(64);
    let cfg = SolveConfig {
        max_iters: 3,
        accelerate: false,
        cascade: false,
        ..Default::default()
    };
    match solve_vi(&spec, &f, &g, &cfg) {
        Err(Error::NonConvergence {
            residual_history, ..
        }) => assert_eq!(residual_history.len(), 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn penalized_approaches_vi_monotonically() {
    let (spec, f, g, _) = oracle(64);
    let vi = solve_vi(&spec, &f, &g, &SolveConfig::default()).unwrap();
    let c = StructuralConstants::for_model(&spec);
    let path = solve_penalized_path(&spec, &c, &f, &g, &SolveConfig::penalized()).unwrap();
    let d: Vec<f64> = path.iter().map(|s| s.u.max_abs_diff(&vi.u).unwrap()).collect();
    for w in d.windows(2) {
        assert!(w[1] < w[0], "{d:?}");
    }
}

#[test]
fn config_validation() {
    let bad = SolveConfig {
        eps_schedule: vec![0.1, 0.2],
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let bad = SolveConfig {
        relaxation_omega: 2.0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let parsed: SolveConfig = serde_json::from_str(r#"{"method":"penalized"}"#).unwrap();
    assert_eq!(parsed, SolveConfig::penalized());
    assert!(serde_json::from_str::<SolveConfig>(r#"{"bogus":1}"#).is_err());
}
