//! The reduction map ϑ and the reduced functional ψ(u) = −φ(u + ϑ(u)) on H̄₀.
//!
//! For fixed u ∈ H̄₀ the map v ↦ φ(u + v) on Ĥ is strongly convex as soon as
//! the one-sided slope constant l of ∂j is below λ_{k+1} − λ_k. Writing
//! g(ζ) = (l/2)ζ² − j(ζ), which is convex, and using Parseval on the
//! quadrature,
//!
//! ```text
//! φ(u + v) = const(u) + ½ Σ_Ĥ (λₙ − λ_k − l) vₙ² + Σ_q w_q g(x_q),   x = U(u + v).
//! ```
//!
//! The inner problem is solved by ADMM on the splitting y = x, whose nodal
//! step is the exact proximal map of g, so nodes that should sit on a kink of
//! j land on it exactly. Near convergence an active-set Newton step solves the
//! optimality system with the kink nodes pinned. The multiplier of the
//! splitting is the selection h ∈ ∂j(x) that certifies the result, and it also
//! gives the reduced subgradient.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::energy::EnergyContext;
use crate::error::HviError;
use crate::spectral::SpectralVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerOptions {
    /// Bound on the Ĥ-projected min-norm subgradient.
    pub tol: f64,
    pub max_iter: usize,
    /// ADMM penalty; `None` uses λ_{k+1} − λ_k − l.
    pub rho: Option<f64>,
    /// Try the active-set Newton step once ADMM is close.
    pub polish: bool,
    /// Audit strong monotonicity at the returned point.
    pub audit: bool,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            tol: 1e-9,
            max_iter: 20_000,
            rho: None,
            polish: true,
            audit: true,
        }
    }
}

/// ADMM iterate kept for warm starts: nodal split variable and scaled dual.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerState {
    y: Vec<f64>,
    dual: Vec<f64>,
    rho: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionResult {
    /// ϑ(u), zero outside the Ĥ indices.
    pub theta: SpectralVector,
    /// Nodal selection h ∈ ∂j(u + ϑ(u)) certifying the inner inclusion.
    pub multiplier: Vec<f64>,
    /// Ĥ-projected norm of (λ − λ_k)c − Uᵀ W h.
    pub inner_residual: f64,
    pub iterations: usize,
    /// True when the accepted point came from the active-set step.
    pub polished: bool,
    /// Audited strong-monotonicity ratio, NaN when the audit was skipped.
    pub strong_convexity_margin: f64,
    state: InnerState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedEval {
    pub psi_value: f64,
    /// −p_{H̄₀}(x*), supported on the H̄₀ indices.
    pub reduced_subgradient: SpectralVector,
    pub reduction: ReductionResult,
}

impl ReducedEval {
    pub fn residual(&self) -> f64 {
        self.reduced_subgradient.norm()
    }
}

fn check_convexity(ctx: &EnergyContext) -> Result<f64, HviError> {
    let split = ctx.decomposition();
    let gap = ctx.shifted_eigenvalues()[split.hhat.start];
    let l = ctx.slope_constant();
    if !(l < gap) {
        return Err(HviError::NotStronglyConvex { slope_bound: l, gap });
    }
    Ok(gap - l)
}

fn check_support(ctx: &EnergyContext, u: &SpectralVector) -> Result<(), HviError> {
    if u.len() != ctx.dim() || !u.is_supported_on(ctx.decomposition().hbar0()) {
        return Err(HviError::InvalidParameter {
            name: "u",
            reason: "must be a coefficient vector supported on the low modes".into(),
        });
    }
    if !u.is_finite() {
        return Err(HviError::InvalidParameter {
            name: "u",
            reason: "coefficients must be finite".into(),
        });
    }
    Ok(())
}

/// Certifies `theta` with the selection `h`: clamps h into the node
/// intervals at x = u + ϑ, improves it on kink nodes, and returns the
/// Ĥ-projected residual with the final selection.
fn certify(ctx: &EnergyContext, x: &SpectralVector, h: &[f64]) -> (f64, Vec<f64>) {
    let nodal = ctx.nodal_values(x);
    let intervals = ctx.node_intervals(&nodal);
    let start: Vec<f64> = intervals.iter().zip(h).map(|(iv, h)| iv.clamp(*h)).collect();
    ctx.min_norm_selection(x, &intervals, &start, ctx.decomposition().hhat.clone())
}

/// ϑ(u): the minimizer of φ(u + ·) over the truncated Ĥ.
pub fn reduce(ctx: &EnergyContext, u: &SpectralVector, opts: &InnerOptions) -> Result<ReductionResult, HviError> {
    reduce_from(ctx, u, opts, None)
}

/// [`reduce`] warm-started from a previous result.
pub fn reduce_from(
    ctx: &EnergyContext,
    u: &SpectralVector,
    opts: &InnerOptions,
    warm: Option<&ReductionResult>,
) -> Result<ReductionResult, HviError> {
    check_support(ctx, u)?;
    let modulus = check_convexity(ctx)?;
    let l = ctx.slope_constant();
    let split = ctx.decomposition();
    let hhat = split.hhat.clone();
    let q_len = ctx.quadrature().len();
    let weights = ctx.quadrature().weights();
    let table = ctx.table();
    let shifted = ctx.shifted_eigenvalues();
    let rho = opts.rho.unwrap_or(modulus);
    let j = ctx.potential();

    let base = ctx.nodal_values(u);
    let (mut v, mut y, mut dual) = match warm {
        Some(w) if w.theta.len() == ctx.dim() => {
            let scale = w.state.rho / rho;
            (
                w.theta.clone(),
                w.state.y.clone(),
                w.state.dual.iter().map(|d| d * scale).collect::<Vec<_>>(),
            )
        }
        _ => (ctx.zeros(), base.clone(), vec![0.0; q_len]),
    };
    let initial = v.clone();

    let mut ax = vec![0.0; q_len];
    let mut rhs = vec![0.0; ctx.dim()];
    let mut scratch = vec![0.0; q_len];
    let mut best: Option<(f64, SpectralVector, Vec<f64>, bool)> = None;
    let mut iterations = 0;
    let mut next_polish = 0usize;
    // max |x − y| over the nodes after the last y-step.
    let mut primal_gap = f64::INFINITY;

    let finish = |theta: SpectralVector, h: Vec<f64>, res: f64, iterations: usize, polished: bool| {
        let x = u.add(&theta);
        let nodal = ctx.nodal_values(&x);
        let dual = nodal
            .iter()
            .zip(&h)
            .map(|(xv, hv)| (l * xv - hv) / rho)
            .collect();
        ReductionResult {
            theta,
            multiplier: h,
            inner_residual: res,
            iterations,
            polished,
            strong_convexity_margin: f64::NAN,
            state: InnerState { y: nodal, dual, rho },
        }
    };

    let result = loop {
        if iterations > 0 || warm.is_some() {
            // Check the current iterate every few steps.
            if iterations % 5 == 0 {
                let x = u.add(&v);
                let h: Vec<f64> = y.iter().zip(&dual).map(|(yv, d)| l * yv - rho * d).collect();
                let (res, h) = certify(ctx, &x, &h);
                if best.as_ref().is_none_or(|b| res < b.0) {
                    best = Some((res, v.clone(), h.clone(), false));
                }
                if res <= opts.tol {
                    break finish(v.clone(), h, res, iterations, false);
                }
                if opts.polish && (res < 1e-2 || primal_gap < 1e-2) && iterations >= next_polish {
                    next_polish = iterations + 25;
                    if let Some((pv, ph, pres)) = active_set_step(ctx, u, &base, &v, &y) {
                        if pres <= opts.tol {
                            break finish(pv, ph, pres, iterations, true);
                        }
                        if best.as_ref().is_none_or(|b| pres < b.0) {
                            best = Some((pres, pv, ph, true));
                        }
                    }
                }
            }
        }
        if iterations >= opts.max_iter {
            let (res, theta, h, polished) = best.take().unwrap_or_else(|| {
                let x = u.add(&v);
                let h: Vec<f64> = y.iter().zip(&dual).map(|(yv, d)| l * yv - rho * d).collect();
                let (res, h) = certify(ctx, &x, &h);
                (res, v.clone(), h, false)
            });
            if res <= opts.tol {
                break finish(theta, h, res, iterations, polished);
            }
            return Err(HviError::InnerNotConverged {
                iterations,
                residual: res,
            });
        }
        iterations += 1;

        // v-step: (D + ρ) v = ρ Uᵀ W (y − b − s) on Ĥ, with D = λ − λ_k − l.
        for q in 0..q_len {
            scratch[q] = y[q] - base[q] - dual[q];
        }
        table.analyze(weights, &scratch, &mut rhs);
        {
            let c = v.coeffs_mut();
            for n in hhat.clone() {
                let d = shifted[n] - l;
                c[n] = rho * rhs[n] / (d + rho);
            }
        }
        // y-step: nodal prox of g; then the dual update.
        table.synthesize(v.coeffs(), &mut ax);
        primal_gap = 0.0;
        for q in 0..q_len {
            let x = ax[q] + base[q];
            y[q] = j.convexified_prox(x + dual[q], l, rho);
            dual[q] += x - y[q];
            primal_gap = primal_gap.max((x - y[q]).abs());
        }
    };

    let mut result = result;
    if opts.audit {
        let probe = if initial.sub(&result.theta).norm() > 1e-8 {
            initial
        } else {
            let scale = 1e-3 * (1.0 + result.theta.norm());
            result.theta.add(&SpectralVector::unit(ctx.dim(), hhat.start).scaled(scale))
        };
        let margin = strong_convexity_audit(ctx, u, &result.theta, &probe);
        let required = ctx.required_margin();
        result.strong_convexity_margin = margin;
        if margin < required - 1e-8 {
            return Err(HviError::MonotonicityViolated { margin, required });
        }
    }
    Ok(result)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum NodeState {
    /// Boundary node: no high mode sees it.
    Idle,
    /// Pinned at breakpoint i with a free multiplier.
    Pinned(usize),
    /// Following piece p.
    Free(usize),
}

/// Primal-dual active-set Newton iteration on the inner optimality system,
/// started from the kink pattern of the ADMM split variable `y`. Pinned
/// nodes whose multiplier leaves the Clarke interval are released to the
/// matching side; free nodes that cross a kink are pinned there. Exact for
/// piecewise quadratic potentials once the pattern settles.
fn active_set_step(
    ctx: &EnergyContext,
    u: &SpectralVector,
    base: &[f64],
    v: &SpectralVector,
    y: &[f64],
) -> Option<(SpectralVector, Vec<f64>, f64)> {
    let j = ctx.potential();
    let breaks = j.breakpoints();
    let hhat = ctx.decomposition().hhat.clone();
    let nh = hhat.len();
    let weights = ctx.quadrature().weights();
    let table = ctx.table();
    let shifted = ctx.shifted_eigenvalues();
    let q_len = y.len();
    let derivs: Vec<_> = j.pieces().iter().map(|p| p.derivative()).collect();
    let second: Vec<_> = derivs.iter().map(|p| p.derivative()).collect();
    let jumps: Vec<(f64, f64)> = breaks
        .iter()
        .enumerate()
        .map(|(i, &b)| (derivs[i].eval(b), derivs[i + 1].eval(b)))
        .collect();
    let is_kink = |i: usize| (jumps[i].0 - jumps[i].1).abs() > 1e-12 * (1.0 + jumps[i].0.abs());

    let kink_of = |yv: f64| {
        breaks
            .iter()
            .position(|b| (yv - b).abs() <= 1e-12 * (1.0 + b.abs()))
            .filter(|&i| is_kink(i))
    };
    let mut state: Vec<NodeState> = (0..q_len)
        .map(|q| {
            if table.row(q)[hhat.clone()].iter().all(|x| *x == 0.0) {
                NodeState::Idle
            } else if let Some(i) = kink_of(y[q]) {
                NodeState::Pinned(i)
            } else {
                NodeState::Free(j.piece_index(y[q]))
            }
        })
        .collect();

    let mut x0 = vec![0.0; q_len];
    table.synthesize(v.coeffs(), &mut x0);
    for (x, b) in x0.iter_mut().zip(base) {
        *x += b;
    }
    let mut cur = v.clone();
    let mut best: Option<(SpectralVector, Vec<f64>, f64)> = None;
    for _ in 0..40 {
        let pinned: Vec<(usize, usize)> = state
            .iter()
            .enumerate()
            .filter_map(|(q, s)| match s {
                NodeState::Pinned(i) => Some((q, *i)),
                _ => None,
            })
            .collect();
        if pinned.len() > nh {
            break;
        }
        let dim = nh + pinned.len();
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for (i, n) in hhat.clone().enumerate() {
            a[(i, i)] = shifted[n];
        }
        for q in 0..q_len {
            let NodeState::Free(p) = state[q] else {
                continue;
            };
            let row = &table.row(q)[hhat.clone()];
            let w = weights[q];
            let slope = second[p].eval(x0[q]);
            let offset = derivs[p].eval(x0[q]) - slope * x0[q] + slope * base[q];
            for i in 0..nh {
                let wi = w * row[i];
                if wi == 0.0 {
                    continue;
                }
                rhs[i] += wi * offset;
                if slope != 0.0 {
                    for m in 0..nh {
                        a[(i, m)] -= wi * slope * row[m];
                    }
                }
            }
        }
        for (c, &(q, i)) in pinned.iter().enumerate() {
            let row = &table.row(q)[hhat.clone()];
            let w = weights[q];
            for r in 0..nh {
                a[(r, nh + c)] = -w * row[r];
                a[(nh + c, r)] = row[r];
            }
            rhs[nh + c] = breaks[i] - base[q];
        }
        let Some(sol) = a.lu().solve(&rhs) else {
            break;
        };
        let mut next = ctx.zeros();
        for (i, n) in hhat.clone().enumerate() {
            next.coeffs_mut()[n] = sol[i];
        }
        if !next.is_finite() {
            break;
        }
        let x = u.add(&next);
        let nodal = ctx.nodal_values(&x);
        let mut h: Vec<f64> = nodal.iter().map(|z| j.derivative(*z)).collect();
        for (c, &(q, _)) in pinned.iter().enumerate() {
            h[q] = sol[nh + c];
        }

        let mut changed = false;
        for q in 0..q_len {
            let updated = match state[q] {
                NodeState::Idle => continue,
                NodeState::Pinned(i) => {
                    // Interval at a downward kink is [j'(b+), j'(b−)].
                    let (left, right) = jumps[i];
                    let slack = 1e-12 * (1.0 + h[q].abs());
                    if h[q] > left.max(right) + slack {
                        NodeState::Free(i)
                    } else if h[q] < left.min(right) - slack {
                        NodeState::Free(i + 1)
                    } else {
                        continue;
                    }
                }
                NodeState::Free(p) => {
                    let z = nodal[q];
                    let mut target = NodeState::Free(j.piece_index(z));
                    if p < breaks.len() && z > breaks[p] {
                        if let Some(i) = (p..breaks.len()).take_while(|&i| breaks[i] < z).find(|&i| is_kink(i)) {
                            target = NodeState::Pinned(i);
                        }
                    } else if p > 0 && z < breaks[p - 1] {
                        if let Some(i) = (0..p).rev().take_while(|&i| breaks[i] > z).find(|&i| is_kink(i)) {
                            target = NodeState::Pinned(i);
                        }
                    }
                    if target == state[q] {
                        continue;
                    }
                    target
                }
            };
            state[q] = updated;
            changed = true;
        }

        let (res, h) = certify(ctx, &x, &h);
        let step = next.sub(&cur).norm();
        if best.as_ref().is_none_or(|b| res < b.2) {
            best = Some((next.clone(), h, res));
        }
        if !changed && step <= 1e-14 * (1.0 + next.norm()) {
            break;
        }
        cur = next;
        x0 = nodal;
    }
    best
}

/// ⟨x₁* − x₂*, v₁ − v₂⟩ / ‖∇(v₁ − v₂)‖² with midpoint selections at u + vᵢ
/// projected to Ĥ.
pub fn strong_convexity_audit(
    ctx: &EnergyContext,
    u: &SpectralVector,
    v1: &SpectralVector,
    v2: &SpectralVector,
) -> f64 {
    let hhat = ctx.decomposition().hhat.clone();
    let g1 = ctx.subgradient_selection(&u.add(v1));
    let g2 = ctx.subgradient_selection(&u.add(v2));
    let d = v1.sub(v2).restricted(hhat.clone());
    let num: f64 = hhat
        .clone()
        .map(|n| (g1.coeffs()[n] - g2.coeffs()[n]) * d.coeffs()[n])
        .sum();
    num / d.h1_seminorm_sq(ctx.basis())
}

/// ψ(u) = −φ(u + ϑ(u)) and the reduced subgradient −p_{H̄₀}(x*).
pub fn reduced_eval(ctx: &EnergyContext, u: &SpectralVector, opts: &InnerOptions) -> Result<ReducedEval, HviError> {
    reduced_eval_from(ctx, u, opts, None)
}

pub fn reduced_eval_from(
    ctx: &EnergyContext,
    u: &SpectralVector,
    opts: &InnerOptions,
    warm: Option<&ReductionResult>,
) -> Result<ReducedEval, HviError> {
    let reduction = reduce_from(ctx, u, opts, warm)?;
    Ok(assemble(ctx, u, reduction))
}

fn assemble(ctx: &EnergyContext, u: &SpectralVector, reduction: ReductionResult) -> ReducedEval {
    let x = u.add(&reduction.theta);
    let nodal = ctx.nodal_values(&x);
    let psi_value = -ctx.energy_with_nodal(&x, &nodal);
    let full = ctx.subgradient_with(&x, &reduction.multiplier);
    let reduced_subgradient = full.restricted(ctx.decomposition().hbar0()).negated();
    ReducedEval {
        psi_value,
        reduced_subgradient,
        reduction,
    }
}

/// Largest ‖∇(ϑ(u') − ϑ(u))‖ / ‖∇(u' − u)‖ over `n_samples` random u' on
/// the H¹ sphere of the given radius around u.
pub fn continuity_probe(
    ctx: &EnergyContext,
    u: &SpectralVector,
    radius: f64,
    n_samples: usize,
    opts: &InnerOptions,
    seed: u64,
) -> Result<f64, HviError> {
    if !(radius > 0.0) {
        return Err(HviError::InvalidParameter {
            name: "radius",
            reason: "must be positive".into(),
        });
    }
    let centre = reduce(ctx, u, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hbar0 = ctx.decomposition().hbar0();
    let mut worst: f64 = 0.0;
    for _ in 0..n_samples {
        let mut d = ctx.zeros();
        for n in hbar0.clone() {
            d.coeffs_mut()[n] = StandardNormal.sample(&mut rng);
        }
        let len = d.h1_norm(ctx.basis());
        if len == 0.0 {
            continue;
        }
        let d = d.scaled(radius / len);
        let moved = reduce_from(ctx, &u.add(&d), opts, Some(&centre))?;
        let ratio = moved.theta.sub(&centre.theta).h1_norm(ctx.basis()) / radius;
        worst = worst.max(ratio);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{example_potential, PiecewisePotential};
    use crate::spectral::{build_basis, decompose, DomainSpec, Quadrature};
    use core::f64::consts::PI;

    fn context(potential: PiecewisePotential, n_trunc: usize) -> EnergyContext {
        let basis = build_basis(DomainSpec::Interval { length: PI }, n_trunc + 4).unwrap();
        let split = decompose(&basis, 2, 2, n_trunc).unwrap();
        let quad = Quadrature::collocation_for(basis.domain(), split.active()).unwrap();
        EnergyContext::new(&basis, split, potential, quad, 1e-9).unwrap()
    }

    #[test]
    fn zero_potential_reduces_to_zero() {
        let ctx = context(PiecewisePotential::zero(), 16);
        let u = SpectralVector::from_coeffs({
            let mut c = alloc::vec![0.0; ctx.dim()];
            c[0] = 0.4;
            c[1] = -1.2;
            c
        });
        let r = reduce(&ctx, &u, &InnerOptions::default()).unwrap();
        assert!(r.theta.norm() < 1e-12);
    }

    #[test]
    fn theta_of_zero_is_zero() {
        let ctx = context(example_potential(1.5, 0.5, 0.5), 16);
        let r = reduce(&ctx, &ctx.zeros(), &InnerOptions::default()).unwrap();
        assert!(r.theta.norm() < 1e-10);
        let e = reduced_eval(&ctx, &ctx.zeros(), &InnerOptions::default()).unwrap();
        assert_eq!(e.psi_value, 0.0);
    }

    #[test]
    fn large_input_converges_and_is_certified() {
        let ctx = context(example_potential(1.5, 0.5, 0.5), 32);
        let mut u = ctx.zeros();
        u.coeffs_mut()[0] = 1.3;
        u.coeffs_mut()[1] = 4.0;
        let r = reduce(&ctx, &u, &InnerOptions::default()).unwrap();
        assert!(r.inner_residual <= 1e-9);
        assert!(r.theta.is_supported_on(ctx.decomposition().hhat.clone()));
        assert!(r.strong_convexity_margin >= ctx.required_margin() - 1e-8);
    }

    #[test]
    fn rejects_non_convex_configuration() {
        let ctx = context(example_potential(6.0, 0.5, 0.5), 8);
        assert!(matches!(
            reduce(&ctx, &ctx.zeros(), &InnerOptions::default()),
            Err(HviError::NotStronglyConvex { .. })
        ));
    }
}
