mod common;

use std::f64::consts::PI;

use common::{config, default_context, example};
use hvi_core::multiplicity::{local_linking_check, minimize_psi, path_maximum, OuterOptions};
use hvi_core::{
    solve_hvi, DomainSpec, HviError, InnerOptions, Pipeline, PotentialSpec, QuadratureChoice, SolverConfig, SpectralVector,
    Stage,
};

#[test]
fn default_configuration_links_locally() {
    let ctx = default_context();
    let r = local_linking_check(&ctx, 1.0, 16, &InnerOptions::default()).unwrap();
    assert!(r.delta > 0.0);
    assert!(!r.y_vacuous);
    assert!(r.y_min >= -1e-10, "{}", r.y_min);
    assert!(r.v_max <= 1e-10, "{}", r.v_max);
}

#[test]
fn zero_potential_links_with_the_exact_quadratic_on_y() {
    // j = 0: ϑ = 0 and ψ(u) = −½Σ(λₙ − 4)cₙ², so on Y = span{sin z} the value
    // at H¹ radius δ is 3δ²/2, and ψ vanishes on V.
    let mut cfg = config(PotentialSpec::Zero, 16);
    cfg.override_hypotheses = true;
    let ctx = Pipeline::new(cfg).unwrap().context().unwrap();
    for delta in [0.25, 1.0, 3.0] {
        let r = local_linking_check(&ctx, delta, 8, &InnerOptions::default()).unwrap();
        assert_eq!(r.delta, delta);
        assert!((r.y_min - 1.5 * delta * delta).abs() < 1e-12 * delta * delta, "{}", r.y_min);
        assert!(r.v_max.abs() < 1e-12);
    }
}

#[test]
fn default_run_is_regression_pinned() {
    let set = solve_hvi(SolverConfig::default()).unwrap();
    assert_eq!(set.solutions.len(), 2);
    let best = &set.solutions[0];
    assert!((best.point.psi_value + 8.360_701_260_409_387).abs() < 1e-9, "{}", best.point.psi_value);
    assert!((best.h1_norm - 9.351_740_304_558_842).abs() < 1e-7, "{}", best.h1_norm);
    for s in &set.solutions {
        assert!(s.point.reduced_residual <= 1e-6);
        assert!(s.full_subgradient <= 1e-5);
        assert!(s.residual.max_violation <= 1e-6);
        assert!(s.h1_norm >= 1e-4);
    }
    let (_, _, d) = set.distances[0];
    assert!(d >= 1e-3);
    assert!(set.linking.delta > 0.0);
    assert!(set.diagnostics.audited_margin >= set.diagnostics.required_margin - 1e-8);
}

#[test]
fn reflected_solution_certifies_for_the_even_potential() {
    let set = solve_hvi(SolverConfig::default()).unwrap();
    let ctx = default_context();
    for s in &set.solutions {
        let r = ctx.residual_certificate(&s.x.negated(), 1e-6);
        assert!(r.passes());
        assert!((r.max_violation - s.residual.max_violation).abs() < 1e-12);
    }
}

#[test]
fn floor_guard_stops_an_unbounded_descent() {
    let ctx = default_context();
    let cfg = SolverConfig {
        psi_floor: -1.0,
        ..SolverConfig::default()
    };
    let opts = OuterOptions::from_config(&cfg);
    let err = minimize_psi(&ctx, &opts, &InnerOptions::default()).unwrap_err();
    assert!(matches!(err, HviError::UnboundedDescent { .. }), "{err}");
}

#[test]
fn minimum_settles_as_the_truncation_grows() {
    let psi: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| solve_hvi(config(example(1.5), n)).unwrap().minimization.lowest_psi)
        .collect();
    let first = (psi[0] - psi[1]).abs();
    let second = (psi[1] - psi[2]).abs();
    assert!(first < 1e-2 * psi[1].abs(), "{psi:?}");
    assert!(second < first, "{psi:?}");
}

#[test]
fn first_eigenvalue_with_empty_y() {
    let cfg = SolverConfig {
        k: 1,
        m: 1,
        ..SolverConfig::default()
    };
    let set = solve_hvi(cfg).unwrap();
    assert!(set.linking.y_vacuous);
    assert_eq!(set.solutions.len(), 2);
    let (_, _, d) = set.distances[0];
    assert!(d >= 1e-3);
}

#[test]
fn third_eigenvalue_needs_a_wider_window() {
    let cfg = SolverConfig {
        k: 3,
        m: 3,
        potential: example(4.0),
        ..SolverConfig::default()
    };
    let set = solve_hvi(cfg).unwrap();
    assert_eq!(set.solutions.len(), 2);
    assert!(set.solutions.iter().all(|s| s.residual.passes()));
}

#[test]
fn grid_and_square_certify() {
    let grid = SolverConfig {
        domain: DomainSpec::Grid1d { length: PI, points: 61 },
        ..SolverConfig::default()
    };
    let set = solve_hvi(grid).unwrap();
    assert_eq!(set.diagnostics.dim_hhat, 59 - 2);
    assert!(set.solutions.iter().all(|s| s.residual.max_violation < 1e-10));

    let square = SolverConfig {
        domain: DomainSpec::Rectangle { lx: PI, ly: PI },
        n_trunc: 24,
        ..SolverConfig::default()
    };
    let set = solve_hvi(square).unwrap();
    assert!(set.diagnostics.dim_hhat >= 24);
    assert_eq!(set.solutions.len(), 2);
    assert!(set.solutions.iter().all(|s| s.residual.max_violation < 1e-10));
}

#[test]
fn gauss_on_the_square_still_builds_a_context() {
    let cfg = SolverConfig {
        domain: DomainSpec::Rectangle { lx: PI, ly: PI },
        n_trunc: 12,
        quadrature: QuadratureChoice::Gauss { nodes_per_dim: None },
        ..SolverConfig::default()
    };
    let p = Pipeline::new(cfg).unwrap();
    let ctx = p.context().unwrap();
    assert!(ctx.table().orthonormality_defect(ctx.quadrature().weights()) < 1e-10);
    assert_eq!(p.split.hhat.len(), p.split.hhat.end - p.split.ek.end);
}

#[test]
fn hypothesis_failure_names_its_stage() {
    let err = solve_hvi(config(example(6.0), 16)).unwrap_err();
    match err {
        HviError::Stage { stage, .. } => assert_eq!(stage, Stage::Hypotheses),
        other => panic!("{other}"),
    }
}

#[test]
fn path_maximum_picks_the_first_largest_value() {
    assert_eq!(path_maximum(&[0.0, 2.0, 1.0, 2.0]), (1, 2.0));
    assert_eq!(path_maximum(&[-1.0]), (0, -1.0));
}

#[test]
fn reported_points_are_recomputed_cold() {
    let set = solve_hvi(SolverConfig::default()).unwrap();
    let ctx = default_context();
    for s in &set.solutions {
        let fresh = hvi_core::reduction::reduced_eval(&ctx, &s.point.u, &InnerOptions::default()).unwrap();
        assert_eq!(fresh.psi_value, s.point.psi_value);
        let lifted: SpectralVector = s.point.u.add(&fresh.reduction.theta);
        assert!(lifted.sub(&s.x).norm() < 1e-12);
    }
}
