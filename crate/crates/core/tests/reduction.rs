mod common;

use common::oracle::brute_force_theta;
use common::{context, default_context, example, low_mode_point};
use hvi_core::reduction::{continuity_probe, reduce, reduce_from, reduced_eval, strong_convexity_audit};
use hvi_core::{HviError, InnerOptions, PotentialSpec, SpectralVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn theta_of_zero_is_zero() {
    let ctx = default_context();
    let r = reduce(&ctx, &ctx.zeros(), &InnerOptions::default()).unwrap();
    assert!(r.theta.norm() < 1e-10);
    assert!(r.inner_residual <= 1e-9);
}

#[test]
fn matches_brute_force_on_three_high_modes() {
    let ctx = context(example(1.5), 3);
    assert_eq!(ctx.decomposition().dim_hhat(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut moved = 0;
    for i in 0..12 {
        let u = low_mode_point(&ctx, &mut rng, 1.0 + 0.6 * i as f64);
        let theta = reduce(&ctx, &u, &InnerOptions::default()).unwrap().theta;
        let oracle = brute_force_theta(&ctx, &u, 2.0);
        let d = theta.sub(&oracle).h1_norm(ctx.basis());
        assert!(
            d < 1e-4,
            "‖u‖ = {}: distance {d}, energies {} vs {}",
            u.h1_norm(ctx.basis()),
            ctx.energy(&u.add(&theta)),
            ctx.energy(&u.add(&oracle))
        );
        if theta.norm() > 1e-3 {
            moved += 1;
        }
    }
    // Large inputs reach the kinks of j, so ϑ is not identically zero.
    assert!(moved >= 3);
}

#[test]
fn warm_and_cold_solves_agree() {
    let ctx = default_context();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let opts = InnerOptions::default();
    let mut previous = None;
    for _ in 0..10 {
        let u = low_mode_point(&ctx, &mut rng, 6.0);
        let cold = reduce(&ctx, &u, &opts).unwrap();
        let warm = reduce_from(&ctx, &u, &opts, previous.as_ref()).unwrap();
        assert!(cold.theta.sub(&warm.theta).h1_norm(ctx.basis()) < 1e-6);
        previous = Some(cold);
    }
}

#[test]
fn inner_inclusion_is_certified_by_the_multiplier() {
    let ctx = default_context();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let u = low_mode_point(&ctx, &mut rng, 7.0);
        let r = reduce(&ctx, &u, &InnerOptions::default()).unwrap();
        let x = u.add(&r.theta);
        let nodal = ctx.nodal_values(&x);
        for (iv, h) in ctx.node_intervals(&nodal).iter().zip(&r.multiplier) {
            assert!(iv.contains(*h));
        }
        let check = ctx.min_norm_subgradient_from(&x, ctx.decomposition().hhat.clone(), &r.multiplier);
        assert!(check <= 1e-9, "{check}");
        assert!(r.strong_convexity_margin >= ctx.required_margin() - 1e-8);
    }
}

#[test]
fn reduced_functional_lies_below_every_other_lift() {
    // ψ(u) = −min_w φ(u + w), so −φ(u + w) ≤ ψ(u) for any w in Ĥ.
    let ctx = default_context();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let u = low_mode_point(&ctx, &mut rng, 5.0);
        let e = reduced_eval(&ctx, &u, &InnerOptions::default()).unwrap();
        for _ in 0..5 {
            let w = common::high_mode_point(&ctx, &mut rng, 3.0);
            assert!(-ctx.energy(&u.add(&w)) <= e.psi_value + 1e-12);
        }
    }
}

#[test]
fn reduced_gradient_matches_finite_differences_of_psi() {
    let ctx = default_context();
    let opts = InnerOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        let u = low_mode_point(&ctx, &mut rng, 5.0);
        let e = reduced_eval(&ctx, &u, &opts).unwrap();
        let h = 1e-6;
        for n in ctx.decomposition().hbar0() {
            let step = SpectralVector::unit(ctx.dim(), n).scaled(h);
            let plus = reduced_eval(&ctx, &u.add(&step), &opts).unwrap().psi_value;
            let minus = reduced_eval(&ctx, &u.sub(&step), &opts).unwrap().psi_value;
            let fd = (plus - minus) / (2.0 * h);
            let g = e.reduced_subgradient.coeffs()[n];
            assert!((g - fd).abs() < 1e-4 * (1.0 + fd.abs()), "mode {n}: {g} vs {fd}");
        }
    }
}

#[test]
fn quadratic_potential_continuity_bound() {
    let eps = 0.8;
    let ctx = context(PotentialSpec::Quadratic { epsilon: eps }, 32);
    let gap = ctx.shifted_eigenvalues()[ctx.decomposition().hhat.start];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = low_mode_point(&ctx, &mut rng, 1.0);
    let ratio = continuity_probe(&ctx, &u, 0.1, 8, &InnerOptions::default(), 1).unwrap();
    assert!(ratio <= eps / (gap - eps) + 1e-9, "{ratio}");
}

#[test]
fn example_potential_continuity_ratio_is_finite() {
    let ctx = default_context();
    let ratio = continuity_probe(&ctx, &ctx.zeros(), 1e-2, 8, &InnerOptions::default(), 0).unwrap();
    assert!(ratio.is_finite());
}

#[test]
fn audit_on_random_triples() {
    let ctx = default_context();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let u = low_mode_point(&ctx, &mut rng, 8.0);
        let v1 = common::high_mode_point(&ctx, &mut rng, 10.0);
        let v2 = common::high_mode_point(&ctx, &mut rng, 10.0);
        let margin = strong_convexity_audit(&ctx, &u, &v1, &v2);
        assert!(margin >= ctx.required_margin() - 1e-8, "{margin}");
    }
}

#[test]
fn non_convex_inner_problem_is_refused() {
    let cfg = common::config(example(6.0), 16);
    let err = hvi_core::Pipeline::new(cfg).unwrap().context().unwrap_err();
    assert!(matches!(err.root(), HviError::NotStronglyConvex { .. }));
}
