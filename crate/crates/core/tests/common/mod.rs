#![allow(dead_code)]

pub mod oracle;

use hvi_core::{EnergyContext, Pipeline, PotentialSpec, SolverConfig, SpectralVector};
use rand::Rng;

pub fn config(potential: PotentialSpec, n_trunc: usize) -> SolverConfig {
    SolverConfig {
        potential,
        n_trunc,
        ..SolverConfig::default()
    }
}

pub fn example(mu: f64) -> PotentialSpec {
    PotentialSpec::Example {
        mu,
        slope_neg: 0.5,
        slope_pos: 0.5,
    }
}

pub fn context(potential: PotentialSpec, n_trunc: usize) -> EnergyContext {
    Pipeline::new(config(potential, n_trunc)).unwrap().context().unwrap()
}

pub fn default_context() -> EnergyContext {
    Pipeline::new(SolverConfig::default()).unwrap().context().unwrap()
}

/// Uniform direction on the low modes scaled to H¹ norm `r`.
pub fn low_mode_point(ctx: &EnergyContext, rng: &mut impl Rng, r: f64) -> SpectralVector {
    let mut u = ctx.zeros();
    for n in ctx.decomposition().hbar0() {
        u.coeffs_mut()[n] = rng.gen_range(-1.0..1.0);
    }
    let len = u.h1_norm(ctx.basis());
    u.scaled(r / len)
}

pub fn high_mode_point(ctx: &EnergyContext, rng: &mut impl Rng, scale: f64) -> SpectralVector {
    let mut v = ctx.zeros();
    for n in ctx.decomposition().hhat.clone() {
        // Decay like a function with a kinked derivative.
        v.coeffs_mut()[n] = scale * rng.gen_range(-1.0..1.0) / (1.0 + n as f64).powi(2);
    }
    v
}
