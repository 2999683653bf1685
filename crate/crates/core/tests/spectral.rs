use std::f64::consts::PI;

use hvi_core::spectral::{
    build_basis, build_tensor_basis, coercivity_constant, decompose, decompose_all, evaluate, evaluate_gradient, ModeTable,
};
use hvi_core::{DomainSpec, Quadrature, QuadratureRule, SpectralVector};
use nalgebra::{DMatrix, SymmetricEigen};

fn distinct_sums_of_squares(limit: usize) -> Vec<(u64, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for p in 1..=limit as u64 {
        for q in 1..=limit as u64 {
            *counts.entry(p * p + q * q).or_insert(0) += 1;
        }
    }
    counts.into_iter().collect()
}

#[test]
fn square_eigenvalues_and_multiplicities_match_enumeration() {
    let basis = build_basis(DomainSpec::Rectangle { lx: PI, ly: PI }, 40).unwrap();
    let oracle = distinct_sums_of_squares(30);
    let groups = basis.complete_groups();
    assert!(groups >= 5);
    for g in 1..=groups {
        let (value, mult) = oracle[g - 1];
        assert!((basis.distinct_eigenvalue(g).unwrap() - value as f64).abs() < 1e-10);
        assert_eq!(basis.group(g).unwrap().len(), mult, "group {g}");
    }
    let first: Vec<f64> = (1..=5).map(|g| basis.distinct_eigenvalue(g).unwrap()).collect();
    assert_eq!(first, vec![2.0, 5.0, 8.0, 10.0, 13.0]);
}

#[test]
fn unequal_rectangle_sides_split_groups() {
    let basis = build_basis(DomainSpec::Rectangle { lx: PI, ly: 2.0 * PI }, 12).unwrap();
    // λ = p² + q²/4
    let mut oracle: Vec<f64> = (1..=8)
        .flat_map(|p| (1..=8).map(move |q| (p * p) as f64 + (q * q) as f64 / 4.0))
        .collect();
    oracle.sort_by(f64::total_cmp);
    for (i, l) in basis.eigenvalues().iter().enumerate() {
        assert!((l - oracle[i]).abs() < 1e-10);
    }
}

#[test]
fn grid_basis_matches_dense_tridiagonal_eigensolver() {
    let (length, points) = (2.0, 41);
    let interior = points - 2;
    let h = length / (points - 1) as f64;
    let mut a = DMatrix::<f64>::zeros(interior, interior);
    for i in 0..interior {
        a[(i, i)] = 2.0 / (h * h);
        if i + 1 < interior {
            a[(i, i + 1)] = -1.0 / (h * h);
            a[(i + 1, i)] = -1.0 / (h * h);
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..interior).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let domain = DomainSpec::Grid1d { length, points };
    let basis = build_basis(domain, interior).unwrap();
    let nodes: Vec<[f64; 2]> = (1..=interior).map(|i| [i as f64 * h, 0.0]).collect();
    for (mode, &col) in order.iter().enumerate().take(12) {
        let lambda = eig.eigenvalues[col];
        assert!((basis.eigenvalue(mode) - lambda).abs() < 1e-8 * lambda, "mode {mode}");
        // Eigenvectors agree up to sign and the √h scaling of a discrete L² norm.
        let v: Vec<f64> = nodes.iter().map(|&z| basis.value(mode, z) * h.sqrt()).collect();
        let dot: f64 = v.iter().enumerate().map(|(i, x)| x * eig.eigenvectors[(i, col)]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-10, "mode {mode}: {dot}");
    }
    assert!(build_basis(domain, interior + 1).is_err());
}

#[test]
fn collocation_rule_is_exactly_orthonormal() {
    let domain = DomainSpec::Interval { length: 3.0 };
    let basis = build_basis(domain, 40).unwrap();
    let quad = Quadrature::collocation_for(&domain, 40).unwrap();
    let table = ModeTable::new(&basis, 40, quad.nodes());
    assert!(table.orthonormality_defect(quad.weights()) < 1e-12);
}

#[test]
fn tensor_collocation_on_a_rectangle_is_square_and_orthogonal() {
    let domain = DomainSpec::Rectangle { lx: 2.0, ly: 3.0 };
    let basis = build_tensor_basis(domain, [5, 7], 1e-9).unwrap();
    assert_eq!(basis.len(), 35);
    assert_eq!(basis.highest_mode_numbers(35), [5, 7]);
    let quad = Quadrature::tensor_collocation(&domain, [5, 7]).unwrap();
    let table = ModeTable::new(&basis, 35, quad.nodes());
    assert!(table.orthonormality_defect(quad.weights()) < 1e-12);
    let interior = quad
        .nodes()
        .iter()
        .filter(|z| z[0] > 0.0 && z[0] < 2.0 - 1e-12 && z[1] > 0.0 && z[1] < 3.0 - 1e-12)
        .count();
    assert_eq!(interior, 35);
}

#[test]
fn tensor_basis_marks_groups_past_the_first_missing_mode_incomplete() {
    let domain = DomainSpec::Rectangle { lx: PI, ly: PI };
    let basis = build_tensor_basis(domain, [4, 4], 1e-9).unwrap();
    // (5, 1) is missing, so groups at or above 26 are cut.
    let complete = basis.complete_groups();
    assert!(basis.distinct_eigenvalue(complete).unwrap() < 26.0);
    assert!(basis.distinct_eigenvalue(complete + 1).unwrap() >= 26.0);
    let full = build_basis(domain, 40).unwrap();
    for g in 1..=complete {
        assert_eq!(basis.group(g).unwrap().len(), full.group(g).unwrap().len());
    }
    let split = decompose_all(&basis, 2, 1).unwrap();
    assert_eq!(split.hbar0(), 0..3);
    assert_eq!(split.hhat, 3..16);
}

#[test]
fn gauss_rule_is_orthonormal_on_a_rectangle() {
    let domain = DomainSpec::Rectangle { lx: 1.0, ly: 2.0 };
    let basis = build_basis(domain, 20).unwrap();
    let quad = Quadrature::gauss_for(&basis, 20).unwrap();
    let table = ModeTable::new(&basis, 20, quad.nodes());
    assert!(table.orthonormality_defect(quad.weights()) < 1e-10);
}

#[test]
fn parseval_and_dirichlet_identity() {
    let domain = DomainSpec::Rectangle { lx: PI, ly: 1.5 };
    let basis = build_basis(domain, 12).unwrap();
    let quad = Quadrature::new(&domain, QuadratureRule::GaussLegendre { nodes_per_dim: 48 }).unwrap();
    let c: Vec<f64> = (0..12).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0 + 0.1 * i as f64).collect();
    let x = SpectralVector::from_coeffs(c);
    let values = evaluate(&basis, &x, quad.nodes());
    let l2 = quad.integrate(&values.iter().map(|v| v * v).collect::<Vec<_>>());
    assert!((l2 - x.l2_norm_sq()).abs() < 1e-10 * x.l2_norm_sq());
    let grads = evaluate_gradient(&basis, &x, quad.nodes());
    let dirichlet = quad.integrate(&grads.iter().map(|g| g[0] * g[0] + g[1] * g[1]).collect::<Vec<_>>());
    assert!((dirichlet - x.h1_seminorm_sq(&basis)).abs() < 1e-9 * dirichlet);
}

#[test]
fn gradients_match_finite_differences() {
    let domain = DomainSpec::Rectangle { lx: 2.0, ly: 1.0 };
    let basis = build_basis(domain, 8).unwrap();
    let z = [0.37, 0.61];
    let h = 1e-6;
    for mode in 0..8 {
        let g = basis.gradient(mode, z);
        let dx = (basis.value(mode, [z[0] + h, z[1]]) - basis.value(mode, [z[0] - h, z[1]])) / (2.0 * h);
        let dy = (basis.value(mode, [z[0], z[1] + h]) - basis.value(mode, [z[0], z[1] - h])) / (2.0 * h);
        assert!((g[0] - dx).abs() < 1e-6 && (g[1] - dy).abs() < 1e-6);
    }
}

#[test]
fn decomposition_ranges_partition_the_active_modes() {
    let basis = build_basis(DomainSpec::Rectangle { lx: PI, ly: PI }, 40).unwrap();
    // Groups 2, 5, 8, 10 on the square: k = 4 is λ = 10 with two modes.
    let split = decompose(&basis, 4, 2, 10).unwrap();
    assert_eq!(split.hbar, 0..4);
    assert_eq!(split.ek, 4..6);
    assert_eq!(split.y, 0..1);
    assert_eq!(split.v, 1..6);
    assert_eq!(split.hbar0(), 0..6);
    assert_eq!(split.hhat.start, 6);
    assert!(split.hhat.len() <= 10);
    // Only whole groups enter Ĥ.
    let end = split.hhat.end;
    assert!(basis.groups().iter().any(|g| g.end == end));
    assert!(decompose(&basis, 2, 3, 10).is_err());
}

fn coercivity_for(eps: f64, n_trunc: usize) -> f64 {
    let domain = DomainSpec::Interval { length: PI };
    let basis = build_basis(domain, n_trunc + 4).unwrap();
    let quad = Quadrature::collocation_for(&domain, basis.len()).unwrap();
    let beta = move |_: [f64; 2]| 9.0 - eps;
    coercivity_constant(&basis, 2, &beta, n_trunc, &quad).unwrap().value
}

#[test]
fn coercivity_of_a_constant_weight_is_eps_over_nine() {
    for eps in [0.1, 1.0, 4.0] {
        for n_trunc in [16, 64, 256] {
            let xi = coercivity_for(eps, n_trunc);
            assert!((xi - eps / 9.0).abs() < 1e-8, "eps {eps}, n_trunc {n_trunc}: {xi}");
        }
    }
}

#[test]
fn weight_touching_the_next_eigenvalue_on_part_of_the_domain_stays_coercive() {
    // β = λ₃ on (0, π/2) and 0 elsewhere: unique continuation keeps ξ > 0.
    let domain = DomainSpec::Interval { length: PI };
    let beta = |z: [f64; 2]| if z[0] < PI / 2.0 { 9.0 } else { 0.0 };
    let mut previous = f64::INFINITY;
    for n_trunc in [8, 16, 32] {
        let basis = build_basis(domain, n_trunc + 4).unwrap();
        let quad = Quadrature::new(&domain, QuadratureRule::GaussLegendre { nodes_per_dim: 400 }).unwrap();
        let c = coercivity_constant(&basis, 2, &beta, n_trunc, &quad).unwrap();
        assert!(c.is_positive(), "{c:?}");
        assert!(c.value < 1.0);
        // Enlarging the subspace can only lower the minimum.
        assert!(c.value <= previous + 1e-12);
        previous = c.value;
    }
}
