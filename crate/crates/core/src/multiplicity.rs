//! Critical points of the reduced functional ψ on H̄₀ and the pipeline that
//! lifts them to solutions of the inclusion.
//!
//! ψ(0) = 0, ψ is bounded below, and near 0 it is nonnegative on Y and
//! nonpositive on V. The search looks for a global minimizer by multistart
//! descent, then for a second nontrivial critical point: a mountain pass
//! between 0 and the minimizer when that is not degenerate, otherwise another
//! minimizer (another multistart basin or the reflection −u for even j). When
//! inf ψ = 0 the points of V near 0 are critical and one of them is returned.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{QuadratureChoice, SolverConfig};
use crate::energy::{EnergyContext, ResidualReport};
use crate::error::{HviError, Stage};
use crate::linalg;
use crate::potential::{check_hypotheses, HypothesisReport, PiecewisePotential};
use crate::reduction::{continuity_probe, reduced_eval, reduced_eval_from, InnerOptions, ReducedEval, ReductionResult};
use crate::spectral::{
    build_basis_with_tol, build_tensor_basis, decompose, decompose_all, default_grouping_tol, DomainSpec, EigenBasis, Quadrature,
    SpaceDecomposition, SpectralVector,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuterOptions {
    /// Bound on the reduced subgradient norm at an accepted critical point.
    pub tol: f64,
    pub max_iter: usize,
    /// Gradients sampled around each iterate; 0 means twice dim H̄₀.
    pub n_grad: usize,
    pub multistarts: usize,
    pub seed: u64,
    /// Starting points are drawn uniformly from this coefficient ball.
    pub start_radius: f64,
    /// ψ below this value aborts the search.
    pub floor: f64,
    pub path_segments: usize,
    pub path_refinements: usize,
    pub nontrivial: f64,
    pub distinct: f64,
    /// inf ψ counts as zero when it is above −branch_tol.
    pub branch_tol: f64,
}

impl Default for OuterOptions {
    fn default() -> Self {
        OuterOptions::from_config(&SolverConfig::default())
    }
}

impl OuterOptions {
    pub fn from_config(cfg: &SolverConfig) -> Self {
        OuterOptions {
            tol: cfg.tol_outer,
            max_iter: cfg.max_outer_iter,
            n_grad: cfg.n_grad,
            multistarts: cfg.multistarts,
            seed: cfg.seed,
            start_radius: cfg.start_radius,
            floor: cfg.psi_floor,
            path_segments: cfg.path_segments,
            path_refinements: cfg.path_refinements,
            nontrivial: cfg.nontrivial_threshold,
            distinct: cfg.distinct_threshold,
            branch_tol: cfg.branch_tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticalKind {
    GlobalMin,
    LinkingSecond,
    Other,
}

impl CriticalKind {
    pub fn name(self) -> &'static str {
        match self {
            CriticalKind::GlobalMin => "global_min",
            CriticalKind::LinkingSecond => "linking_second",
            CriticalKind::Other => "other",
        }
    }
}

/// How a critical point was found.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Multistart { start: usize },
    MountainPass,
    Reflection,
    VSphere,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Multistart { .. } => "multistart",
            Origin::MountainPass => "mountain_pass",
            Origin::Reflection => "reflection",
            Origin::VSphere => "v_sphere",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    /// Supported on the H̄₀ indices.
    pub u: SpectralVector,
    pub psi_value: f64,
    pub reduced_residual: f64,
    pub kind: CriticalKind,
    pub origin: Origin,
}

/// Reduced evaluations with warm starts, an evaluation count and the floor guard.
struct Evaluator<'a> {
    ctx: &'a EnergyContext,
    inner: InnerOptions,
    floor: f64,
    warm: Option<ReductionResult>,
    evaluations: usize,
    lowest: f64,
}

impl<'a> Evaluator<'a> {
    fn new(ctx: &'a EnergyContext, inner: &InnerOptions, floor: f64) -> Self {
        Evaluator {
            ctx,
            inner: *inner,
            floor,
            warm: None,
            evaluations: 0,
            lowest: f64::INFINITY,
        }
    }

    fn dim(&self) -> usize {
        self.ctx.decomposition().dim_hbar0()
    }

    fn lift(&self, u: &[f64]) -> SpectralVector {
        let mut c = vec![0.0; self.ctx.dim()];
        c[..u.len()].copy_from_slice(u);
        SpectralVector::from_coeffs(c)
    }

    fn eval(&mut self, u: &[f64]) -> Result<ReducedEval, HviError> {
        let lifted = self.lift(u);
        let e = reduced_eval_from(self.ctx, &lifted, &self.inner, self.warm.as_ref())?;
        self.evaluations += 1;
        self.lowest = self.lowest.min(e.psi_value);
        if e.psi_value < self.floor {
            return Err(HviError::UnboundedDescent {
                psi: e.psi_value,
                floor: self.floor,
            });
        }
        self.warm = Some(e.reduction.clone());
        Ok(e)
    }

    fn gradient(&self, e: &ReducedEval) -> Vec<f64> {
        e.reduced_subgradient.coeffs()[..self.dim()].to_vec()
    }

    /// Newton's method on ∇ψ = 0 with a central-difference Jacobian and a
    /// backtracking search on ‖∇ψ‖. Converges to the nearby critical point
    /// whatever its index.
    fn newton(&mut self, start: &[f64], tol: f64) -> Result<Option<(Vec<f64>, ReducedEval)>, HviError> {
        let d = self.dim();
        let mut u = start.to_vec();
        let mut e = self.eval(&u)?;
        let mut g = self.gradient(&e);
        for _ in 0..60 {
            let gn = linalg::norm(&g);
            if gn <= tol {
                return Ok(Some((u, e)));
            }
            let h = 1e-6 * (1.0 + linalg::norm(&u));
            let mut jac = vec![0.0; d * d];
            for i in 0..d {
                let mut up = u.clone();
                up[i] += h;
                let gp = {
                    let ep = self.eval(&up)?;
                    self.gradient(&ep)
                };
                let mut um = u.clone();
                um[i] -= h;
                let gm = {
                    let em = self.eval(&um)?;
                    self.gradient(&em)
                };
                for r in 0..d {
                    jac[r * d + i] = (gp[r] - gm[r]) / (2.0 * h);
                }
            }
            for r in 0..d {
                for c in 0..r {
                    let s = 0.5 * (jac[r * d + c] + jac[c * d + r]);
                    jac[r * d + c] = s;
                    jac[c * d + r] = s;
                }
            }
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(step) = linalg::solve_dense(d, &jac, &rhs) else {
                return Ok(None);
            };
            if !step.iter().all(|s| s.is_finite()) {
                return Ok(None);
            }
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                let et = self.eval(&trial)?;
                let gt = self.gradient(&et);
                if linalg::norm(&gt) < (1.0 - 1e-4 * t) * gn {
                    u = trial;
                    e = et;
                    g = gt;
                    break;
                }
                t *= 0.5;
                if t < 1e-8 {
                    return Ok(None);
                }
            }
        }
        let done = linalg::norm(&g) <= tol;
        Ok(done.then_some((u, e)))
    }
}

fn ball_sample(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let n = linalg::norm(&v);
    let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x *= r / n);
    }
    v
}

struct Descent {
    u: Vec<f64>,
    eval: ReducedEval,
    converged: bool,
}

/// Gradient sampling: the min-norm element of the convex hull of gradients
/// sampled in an ε-ball is the search direction, with Armijo backtracking.
/// Close to stationarity the Newton step takes over.
fn gradient_sampling(
    ev: &mut Evaluator<'_>,
    start: &[f64],
    opts: &OuterOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Descent, HviError> {
    let d = ev.dim();
    let n_grad = if opts.n_grad == 0 { 2 * d } else { opts.n_grad };
    let mut u = start.to_vec();
    let mut e = ev.eval(&u)?;
    let mut eps = 0.05 * (1.0 + linalg::norm(&u));
    let mut step_scale: f64 = 0.25;
    let mut last_newton = 0usize;
    for it in 0..opts.max_iter {
        let g = ev.gradient(&e);
        let gn = linalg::norm(&g);
        if gn <= opts.tol {
            return Ok(Descent { u, eval: e, converged: true });
        }
        if (gn < 1e-3 || eps < 1e-8) && it >= last_newton {
            last_newton = it + 10;
            if let Some((nu, ne)) = ev.newton(&u, opts.tol)? {
                if ne.psi_value <= e.psi_value + 1e-10 * (1.0 + e.psi_value.abs()) {
                    return Ok(Descent {
                        u: nu,
                        eval: ne,
                        converged: true,
                    });
                }
            }
            // Newton may have moved the warm start; re-evaluate the iterate.
            e = ev.eval(&u)?;
        }
        let mut bundle = vec![g.clone()];
        for _ in 0..n_grad {
            let offset = ball_sample(rng, d, eps);
            let p: Vec<f64> = u.iter().zip(&offset).map(|(a, b)| a + b).collect();
            let ep = ev.eval(&p)?;
            bundle.push(ev.gradient(&ep));
        }
        let dir = linalg::min_norm_convex_combination(&bundle);
        let dn = linalg::norm(&dir);
        if dn <= eps.max(opts.tol) {
            eps *= 0.1;
            e = ev.eval(&u)?;
            continue;
        }
        let mut t = (2.0 * step_scale).min(opts.start_radius / dn);
        let accepted = loop {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a - t * b).collect();
            let et = ev.eval(&trial)?;
            if et.psi_value <= e.psi_value - 1e-4 * t * dn * dn {
                break Some((trial, et));
            }
            t *= 0.5;
            if t < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some((nu, ne)) => {
                u = nu;
                e = ne;
                step_scale = t;
            }
            None => {
                eps *= 0.1;
                e = ev.eval(&u)?;
            }
        }
    }
    let converged = linalg::norm(&ev.gradient(&e)) <= opts.tol;
    Ok(Descent { u, eval: e, converged })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeReport {
    pub best: CriticalPoint,
    /// Converged minimizers from all starts, pairwise distinct, sorted by ψ.
    pub minima: Vec<CriticalPoint>,
    pub starts: usize,
    pub converged_starts: usize,
    /// Smallest ψ seen at any evaluated point.
    pub lowest_psi: f64,
    pub evaluations: usize,
}

fn h1_distance(ctx: &EnergyContext, a: &SpectralVector, b: &SpectralVector) -> f64 {
    a.sub(b).h1_norm(ctx.basis())
}

/// Multistart descent for inf ψ over H̄₀.
pub fn minimize_psi(ctx: &EnergyContext, opts: &OuterOptions, inner: &InnerOptions) -> Result<MinimizeReport, HviError> {
    let d = ctx.decomposition().dim_hbar0();
    if d == 0 {
        return Err(HviError::Decomposition("H̄₀ is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut found: Vec<CriticalPoint> = Vec::new();
    let mut lowest = f64::INFINITY;
    let mut evaluations = 0;
    let mut best_residual = f64::INFINITY;
    let mut converged_starts = 0;
    for start in 0..opts.multistarts {
        let u0 = ball_sample(&mut rng, d, opts.start_radius);
        let mut ev = Evaluator::new(ctx, inner, opts.floor);
        let run = gradient_sampling(&mut ev, &u0, opts, &mut rng);
        evaluations += ev.evaluations;
        lowest = lowest.min(ev.lowest);
        let run = run?;
        let residual = run.eval.residual();
        best_residual = best_residual.min(residual);
        if !run.converged {
            continue;
        }
        converged_starts += 1;
        found.push(CriticalPoint {
            u: ev.lift(&run.u),
            psi_value: run.eval.psi_value,
            reduced_residual: residual,
            kind: CriticalKind::Other,
            origin: Origin::Multistart { start },
        });
    }
    if found.is_empty() {
        return Err(HviError::OuterNotConverged {
            iterations: opts.max_iter,
            residual: best_residual,
        });
    }
    // Stable sort keeps the start order among equal values.
    found.sort_by(|a, b| a.psi_value.total_cmp(&b.psi_value));
    let mut minima: Vec<CriticalPoint> = Vec::new();
    for p in found {
        if minima.iter().all(|m| h1_distance(ctx, &m.u, &p.u) > opts.distinct) {
            minima.push(p);
        }
    }
    minima[0].kind = CriticalKind::GlobalMin;
    Ok(MinimizeReport {
        best: minima[0].clone(),
        minima,
        starts: opts.multistarts,
        converged_starts,
        lowest_psi: lowest,
        evaluations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkingReport {
    /// Largest radius where all samples respected the sign conditions; 0 on failure.
    pub delta: f64,
    pub y_vacuous: bool,
    /// min ψ over the Y-sphere samples at `delta` (or at the failing radius).
    pub y_min: f64,
    /// max ψ over the V-sphere samples.
    pub v_max: f64,
    pub samples_per_side: usize,
    pub slack: f64,
}

/// Unit directions (in H¹) of the coordinate range: ± axes, then seeded
/// random directions up to `n_samples` in dimension ≥ 2.
fn sphere_directions(ctx: &EnergyContext, range: core::ops::Range<usize>, n_samples: usize) -> Vec<SpectralVector> {
    let mut dirs = Vec::new();
    let dim = range.len();
    if dim == 0 {
        return dirs;
    }
    for n in range.clone() {
        for s in [1.0, -1.0] {
            dirs.push(SpectralVector::unit(ctx.dim(), n).scaled(s));
        }
    }
    if dim >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        while dirs.len() < n_samples.max(2 * dim) {
            let mut v = ctx.zeros();
            for n in range.clone() {
                v.coeffs_mut()[n] = StandardNormal.sample(&mut rng);
            }
            dirs.push(v);
        }
    }
    dirs.into_iter()
        .map(|v| {
            let len = v.h1_norm(ctx.basis());
            v.scaled(1.0 / len)
        })
        .collect()
}

/// Finds the largest δ ≤ `delta_max` with ψ ≥ −slack on the Y-sphere and
/// ψ ≤ slack on the V-sphere of radius δ, by halving then bisection.
pub fn local_linking_check(
    ctx: &EnergyContext,
    delta_max: f64,
    n_samples: usize,
    inner: &InnerOptions,
) -> Result<LinkingReport, HviError> {
    const SLACK: f64 = 1e-10;
    let split = ctx.decomposition();
    let y_dirs = sphere_directions(ctx, split.y.clone(), n_samples);
    let v_dirs = sphere_directions(ctx, split.v.clone(), n_samples);
    let probe = |delta: f64| -> Result<(bool, f64, f64), HviError> {
        let mut y_min = f64::INFINITY;
        let mut v_max = f64::NEG_INFINITY;
        for d in &y_dirs {
            y_min = y_min.min(reduced_eval(ctx, &d.scaled(delta), inner)?.psi_value);
        }
        for d in &v_dirs {
            v_max = v_max.max(reduced_eval(ctx, &d.scaled(delta), inner)?.psi_value);
        }
        let ok = !(y_min < -SLACK) && !(v_max > SLACK);
        Ok((ok, y_min, v_max))
    };
    let report = |delta: f64, y_min: f64, v_max: f64| LinkingReport {
        delta,
        y_vacuous: y_dirs.is_empty(),
        y_min,
        v_max,
        samples_per_side: v_dirs.len().max(y_dirs.len()),
        slack: SLACK,
    };
    let (ok, y_min, v_max) = probe(delta_max)?;
    if ok {
        return Ok(report(delta_max, y_min, v_max));
    }
    let mut hi = delta_max;
    let mut lo = None;
    let mut fail = (y_min, v_max);
    for _ in 0..40 {
        let mid = 0.5 * hi;
        let (ok, y_min, v_max) = probe(mid)?;
        if ok {
            lo = Some((mid, y_min, v_max));
            break;
        }
        fail = (y_min, v_max);
        hi = mid;
    }
    let Some(mut good) = lo else {
        return Ok(report(0.0, fail.0, fail.1));
    };
    for _ in 0..30 {
        let mid = 0.5 * (good.0 + hi);
        let (ok, y_min, v_max) = probe(mid)?;
        if ok {
            good = (mid, y_min, v_max);
        } else {
            hi = mid;
        }
    }
    Ok(report(good.0, good.1, good.2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathResult {
    pub nodes: Vec<SpectralVector>,
    pub values: Vec<f64>,
    pub max_index: usize,
    pub refinements: usize,
}

impl PathResult {
    pub fn max_value(&self) -> f64 {
        self.values[self.max_index]
    }

    /// True when the path maximum sits at one of the endpoints.
    pub fn degenerate(&self) -> bool {
        self.max_index == 0 || self.max_index + 1 == self.values.len()
    }
}

/// First index attaining the maximum.
pub fn path_maximum(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc })
}

/// Discrete minimax path from `a` to `b`: the highest interior node is pushed
/// down along the component of −∇ψ normal to the path, and the path is
/// subdivided around the maximum `opts.path_refinements` times.
pub fn mountain_pass(
    ctx: &EnergyContext,
    a: &SpectralVector,
    b: &SpectralVector,
    opts: &OuterOptions,
    inner: &InnerOptions,
) -> Result<PathResult, HviError> {
    let mut ev = Evaluator::new(ctx, inner, opts.floor);
    let d = ev.dim();
    let s = opts.path_segments;
    let mut nodes: Vec<Vec<f64>> = (0..=s)
        .map(|i| {
            let t = i as f64 / s as f64;
            (0..d).map(|n| (1.0 - t) * a.coeffs()[n] + t * b.coeffs()[n]).collect()
        })
        .collect();
    let mut values = Vec::with_capacity(nodes.len());
    for p in &nodes {
        values.push(ev.eval(p)?.psi_value);
    }
    let mut refinements = 0;
    loop {
        for _ in 0..400 {
            let (i, _) = path_maximum(&values);
            if i == 0 || i + 1 == nodes.len() {
                break;
            }
            let e = ev.eval(&nodes[i])?;
            let g = ev.gradient(&e);
            let tangent: Vec<f64> = nodes[i + 1].iter().zip(&nodes[i - 1]).map(|(p, q)| p - q).collect();
            let tl = linalg::norm(&tangent);
            let along = if tl > 0.0 { linalg::dot(&g, &tangent) / (tl * tl) } else { 0.0 };
            let normal: Vec<f64> = g.iter().zip(&tangent).map(|(gi, ti)| gi - along * ti).collect();
            let nn = linalg::norm(&normal);
            if nn <= opts.tol {
                break;
            }
            let mut t = 1.0;
            let moved = loop {
                let trial: Vec<f64> = nodes[i].iter().zip(&normal).map(|(p, n)| p - t * n).collect();
                let et = ev.eval(&trial)?;
                if et.psi_value < values[i] - 1e-4 * t * nn * nn {
                    break Some((trial, et.psi_value));
                }
                t *= 0.5;
                if t < 1e-10 {
                    break None;
                }
            };
            match moved {
                Some((p, v)) => {
                    nodes[i] = p;
                    values[i] = v;
                }
                None => break,
            }
        }
        let (i, _) = path_maximum(&values);
        if refinements >= opts.path_refinements || i == 0 || i + 1 == nodes.len() {
            break;
        }
        refinements += 1;
        let left: Vec<f64> = nodes[i - 1].iter().zip(&nodes[i]).map(|(p, q)| 0.5 * (p + q)).collect();
        let right: Vec<f64> = nodes[i].iter().zip(&nodes[i + 1]).map(|(p, q)| 0.5 * (p + q)).collect();
        let vl = ev.eval(&left)?.psi_value;
        let vr = ev.eval(&right)?.psi_value;
        nodes.insert(i + 1, right);
        values.insert(i + 1, vr);
        nodes.insert(i, left);
        values.insert(i, vl);
    }
    let (max_index, _) = path_maximum(&values);
    Ok(PathResult {
        nodes: nodes.iter().map(|p| ev.lift(p)).collect(),
        values,
        max_index,
        refinements,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// inf ψ < 0.
    Negative,
    /// inf ψ = 0 within the branch tolerance.
    Zero,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Negative => "inf_psi_negative",
            Branch::Zero => "inf_psi_zero",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecondPointReport {
    pub point: CriticalPoint,
    pub branch: Branch,
    /// Max of ψ on the refined path from 0 to the minimizer.
    pub path_max: Option<f64>,
    pub path_degenerate: Option<bool>,
    /// (origin, outcome) for every candidate tried, in order.
    pub attempts: Vec<(&'static str, &'static str)>,
}

fn accept(
    ctx: &EnergyContext,
    candidate: &CriticalPoint,
    first: &CriticalPoint,
    opts: &OuterOptions,
) -> Result<(), &'static str> {
    if !(candidate.reduced_residual <= opts.tol) {
        return Err("not_converged");
    }
    if candidate.u.h1_norm(ctx.basis()) <= opts.nontrivial {
        return Err("trivial");
    }
    if h1_distance(ctx, &candidate.u, &first.u) <= opts.distinct {
        return Err("same_as_first");
    }
    Ok(())
}

/// A nontrivial critical point of ψ distinct from `first`.
pub fn second_point_search(
    ctx: &EnergyContext,
    first: &CriticalPoint,
    minima: &[CriticalPoint],
    delta: f64,
    opts: &OuterOptions,
    inner: &InnerOptions,
) -> Result<SecondPointReport, HviError> {
    let mut attempts = Vec::new();
    let mut ev = Evaluator::new(ctx, inner, opts.floor);
    let mut best_failed: Option<CriticalPoint> = None;
    let point = |u: Vec<f64>, e: &ReducedEval, kind, origin, ev: &Evaluator<'_>| CriticalPoint {
        u: ev.lift(&u),
        psi_value: e.psi_value,
        reduced_residual: e.residual(),
        kind,
        origin,
    };

    if first.psi_value >= -opts.branch_tol {
        // Flat branch: points of V on the sphere of radius δ/2 are critical.
        if delta > 0.0 {
            for dir in sphere_directions(ctx, ctx.decomposition().v.clone(), 8) {
                let u = dir.scaled(0.5 * delta);
                let e = reduced_eval(ctx, &u, inner)?;
                let c = CriticalPoint {
                    u,
                    psi_value: e.psi_value,
                    reduced_residual: e.residual(),
                    kind: CriticalKind::LinkingSecond,
                    origin: Origin::VSphere,
                };
                match accept(ctx, &c, first, opts) {
                    Ok(()) => {
                        attempts.push((Origin::VSphere.name(), "accepted"));
                        return Ok(SecondPointReport {
                            point: c,
                            branch: Branch::Zero,
                            path_max: None,
                            path_degenerate: None,
                            attempts,
                        });
                    }
                    Err(why) => {
                        attempts.push((Origin::VSphere.name(), why));
                        best_failed.get_or_insert(c);
                    }
                }
            }
        }
        let c = best_failed.unwrap_or_else(|| first.clone());
        return Err(HviError::Distinctness {
            distance_to_first: h1_distance(ctx, &c.u, &first.u),
            norm: c.u.h1_norm(ctx.basis()),
        });
    }

    let d = ev.dim();
    let path = mountain_pass(ctx, &ctx.zeros(), &first.u, opts, inner)?;
    let path_max = Some(path.max_value());
    let path_degenerate = Some(path.degenerate());
    let finish = |point: CriticalPoint, attempts| SecondPointReport {
        point,
        branch: Branch::Negative,
        path_max,
        path_degenerate,
        attempts,
    };
    if path.degenerate() {
        attempts.push((Origin::MountainPass.name(), "path_max_at_endpoint"));
    } else {
        let top = path.nodes[path.max_index].coeffs()[..d].to_vec();
        match ev.newton(&top, opts.tol)? {
            Some((u, e)) => {
                let c = point(u, &e, CriticalKind::LinkingSecond, Origin::MountainPass, &ev);
                match accept(ctx, &c, first, opts) {
                    Ok(()) => {
                        attempts.push((Origin::MountainPass.name(), "accepted"));
                        return Ok(finish(c, attempts));
                    }
                    Err(why) => attempts.push((Origin::MountainPass.name(), why)),
                }
            }
            None => attempts.push((Origin::MountainPass.name(), "not_converged")),
        }
    }

    for m in minima.iter().filter(|m| m.u != first.u) {
        let c = CriticalPoint {
            kind: CriticalKind::Other,
            ..m.clone()
        };
        match accept(ctx, &c, first, opts) {
            Ok(()) => {
                attempts.push((c.origin.name(), "accepted"));
                return Ok(finish(c, attempts));
            }
            Err(why) => attempts.push((c.origin.name(), why)),
        }
    }

    let reflected: Vec<f64> = first.u.coeffs()[..d].iter().map(|c| -c).collect();
    match ev.newton(&reflected, opts.tol)? {
        Some((u, e)) => {
            let c = point(u, &e, CriticalKind::Other, Origin::Reflection, &ev);
            match accept(ctx, &c, first, opts) {
                Ok(()) => {
                    attempts.push((Origin::Reflection.name(), "accepted"));
                    return Ok(finish(c, attempts));
                }
                Err(why) => {
                    attempts.push((Origin::Reflection.name(), why));
                    best_failed = Some(c);
                }
            }
        }
        None => attempts.push((Origin::Reflection.name(), "not_converged")),
    }
    let c = best_failed.unwrap_or_else(|| first.clone());
    Err(HviError::Distinctness {
        distance_to_first: h1_distance(ctx, &c.u, &first.u),
        norm: c.u.h1_norm(ctx.basis()),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// x = u + ϑ(u).
    pub x: SpectralVector,
    /// The reduced critical point, with ψ and residual recomputed cold.
    pub point: CriticalPoint,
    pub residual: ResidualReport,
    pub h1_norm: f64,
    /// Estimated min-norm subgradient of φ at x over all active modes.
    pub full_subgradient: f64,
    pub inner_residual: f64,
    pub strong_convexity_margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// Coercivity constant of Ĥ for β ≡ l + λ_k.
    pub required_margin: f64,
    /// Smallest audited strong-monotonicity ratio over the certified solutions.
    pub audited_margin: f64,
    /// Empirical Lipschitz ratio of ϑ around 0 and around the first solution.
    pub continuity_ratio: f64,
    pub slope_constant: f64,
    pub dim_hbar0: usize,
    pub dim_hhat: usize,
    pub n_nodes: usize,
}

/// (i, j, ‖∇(xᵢ − xⱼ)‖) with 1-based solution indices.
pub type Distance = (usize, usize, f64);

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionSet {
    pub config: SolverConfig,
    pub hypotheses: HypothesisReport,
    pub hypotheses_overridden: bool,
    pub linking: LinkingReport,
    pub minimization: MinimizeReport,
    pub second: SecondPointReport,
    pub solutions: Vec<Solution>,
    /// Every pair.
    pub distances: Vec<Distance>,
    pub diagnostics: Diagnostics,
}

/// The stages of [`solve_hvi`], callable one at a time.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub config: SolverConfig,
    pub basis: EigenBasis,
    pub split: SpaceDecomposition,
    pub potential: PiecewisePotential,
}

impl Pipeline {
    /// Validates the configuration, builds the basis and the decomposition.
    pub fn new(config: SolverConfig) -> Result<Self, HviError> {
        config.validate()?;
        let potential = config.potential.build()?;
        let basis = Self::basis_for(&config).map_err(|e| e.at(Stage::Basis))?;
        let split = if Self::collocated_modes(&config) {
            decompose_all(&basis, config.k, config.m)
        } else {
            decompose(&basis, config.k, config.m, config.n_trunc)
        }
        .map_err(|e| e.at(Stage::Decomposition))?;
        Ok(Pipeline {
            config,
            basis,
            split,
            potential,
        })
    }

    /// Grids and collocated rectangles fix the mode set to match their
    /// nodes, so Ĥ takes every mode past group k.
    fn collocated_modes(config: &SolverConfig) -> bool {
        match config.domain {
            DomainSpec::Grid1d { .. } => true,
            DomainSpec::Rectangle { .. } => matches!(config.quadrature, QuadratureChoice::Auto | QuadratureChoice::Collocation),
            DomainSpec::Interval { .. } => false,
        }
    }

    /// Enough modes for groups 1..k+1 and `n_trunc` modes past group k. A
    /// grid uses all of its interior modes.
    fn basis_for(config: &SolverConfig) -> Result<EigenBasis, HviError> {
        let tol = config.grouping_tol.unwrap_or_else(|| default_grouping_tol(&config.domain));
        let enough = |basis: &EigenBasis| {
            basis.complete_groups() > config.k && basis.group(config.k).is_some_and(|g| basis.len() >= g.end + config.n_trunc)
        };
        match config.domain {
            DomainSpec::Grid1d { points, .. } => build_basis_with_tol(config.domain, points.saturating_sub(2), tol),
            DomainSpec::Rectangle { lx, ly } if Self::collocated_modes(config) => {
                let short = lx.min(ly);
                let mut s = 2usize;
                loop {
                    let counts = [(s as f64 * lx / short).ceil() as usize, (s as f64 * ly / short).ceil() as usize];
                    let basis = build_tensor_basis(config.domain, counts, tol)?;
                    if enough(&basis) || counts[0] * counts[1] > 1 << 16 {
                        return Ok(basis);
                    }
                    s += 1;
                }
            }
            _ => {
                let mut n = (config.k + config.n_trunc + 2).max(3);
                loop {
                    let basis = build_basis_with_tol(config.domain, n, tol)?;
                    if enough(&basis) || n > 1 << 16 {
                        return Ok(basis);
                    }
                    n *= 2;
                }
            }
        }
    }

    pub fn inner_options(&self) -> InnerOptions {
        InnerOptions {
            tol: self.config.tol_inner,
            max_iter: self.config.max_inner_iter,
            ..InnerOptions::default()
        }
    }

    pub fn outer_options(&self) -> OuterOptions {
        OuterOptions::from_config(&self.config)
    }

    pub fn hypotheses(&self) -> Result<HypothesisReport, HviError> {
        check_hypotheses(&self.potential, &self.basis, self.config.k, self.config.m).map_err(|e| e.at(Stage::Hypotheses))
    }

    /// Fails with the report unless all hypotheses pass or the override is set.
    pub fn gate(&self, report: &HypothesisReport) -> Result<(), HviError> {
        if report.all_pass() || self.config.override_hypotheses {
            Ok(())
        } else {
            Err(HviError::HypothesesFailed(Box::new(report.clone())).at(Stage::Hypotheses))
        }
    }

    pub fn quadrature(&self) -> Result<Quadrature, HviError> {
        let active = self.split.active();
        match self.config.quadrature {
            QuadratureChoice::Auto | QuadratureChoice::Collocation => match self.config.domain {
                DomainSpec::Rectangle { .. } => {
                    Quadrature::tensor_collocation(&self.config.domain, self.basis.highest_mode_numbers(active))
                }
                _ => Quadrature::collocation_for(&self.config.domain, active),
            },
            QuadratureChoice::Gauss { nodes_per_dim: None } => Quadrature::gauss_for(&self.basis, active),
            QuadratureChoice::Gauss {
                nodes_per_dim: Some(n),
            } => Quadrature::new(
                &self.config.domain,
                crate::spectral::QuadratureRule::GaussLegendre { nodes_per_dim: n },
            ),
        }
    }

    pub fn context(&self) -> Result<EnergyContext, HviError> {
        let build = || {
            let quad = self.quadrature()?;
            let ctx = EnergyContext::new(&self.basis, self.split.clone(), self.potential.clone(), quad, self.config.kink_tol)?;
            let defect = ctx.table().orthonormality_defect(ctx.quadrature().weights());
            if defect > 1e-10 {
                return Err(HviError::QuadratureTooCoarse { max_deviation: defect });
            }
            let gap = ctx.shifted_eigenvalues()[self.split.hhat.start];
            if !(ctx.slope_constant() < gap) {
                return Err(HviError::NotStronglyConvex {
                    slope_bound: ctx.slope_constant(),
                    gap,
                });
            }
            Ok(ctx)
        };
        build().map_err(|e: HviError| e.at(Stage::Context))
    }

    pub fn linking(&self, ctx: &EnergyContext) -> Result<LinkingReport, HviError> {
        let report = local_linking_check(ctx, self.config.linking_delta_max, self.config.linking_samples, &self.inner_options())
            .map_err(|e| e.at(Stage::Linking))?;
        if report.delta > 0.0 {
            Ok(report)
        } else {
            Err(HviError::LinkingFailed {
                y_witness: report.y_min,
                v_witness: report.v_max,
            }
            .at(Stage::Linking))
        }
    }

    pub fn minimize(&self, ctx: &EnergyContext) -> Result<MinimizeReport, HviError> {
        minimize_psi(ctx, &self.outer_options(), &self.inner_options()).map_err(|e| e.at(Stage::Minimization))
    }

    pub fn second_point(
        &self,
        ctx: &EnergyContext,
        minimization: &MinimizeReport,
        linking: &LinkingReport,
    ) -> Result<SecondPointReport, HviError> {
        second_point_search(
            ctx,
            &minimization.best,
            &minimization.minima,
            linking.delta,
            &self.outer_options(),
            &self.inner_options(),
        )
        .map_err(|e| e.at(Stage::SecondPoint))
    }

    /// Lifts each point with a cold inner solve and checks residual, lift
    /// consistency, nontriviality and pairwise distinctness.
    pub fn certify(
        &self,
        ctx: &EnergyContext,
        points: &[CriticalPoint],
    ) -> Result<(Vec<Solution>, Vec<Distance>), HviError> {
        let inner = self.inner_options();
        let outer = self.outer_options();
        let all = 0..ctx.dim();
        let mut solutions = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let e = reduced_eval(ctx, &p.u, &inner).map_err(|e| e.at(Stage::Certification))?;
            let x = p.u.add(&e.reduction.theta);
            let residual = ctx.residual_certificate(&x, self.config.tol_residual);
            let full = ctx
                .min_norm_subgradient_from(&x, all.clone(), &e.reduction.multiplier)
                .min(ctx.min_norm_subgradient(&x, all.clone()));
            let point = CriticalPoint {
                psi_value: e.psi_value,
                reduced_residual: e.residual(),
                ..p.clone()
            };
            let h1_norm = x.h1_norm(ctx.basis());
            let ok = point.reduced_residual <= outer.tol
                && residual.passes()
                && full <= inner.tol + outer.tol + 1e-8
                && h1_norm > outer.nontrivial;
            if !ok {
                return Err(HviError::CertificationFailed {
                    solution: i + 1,
                    max_violation: residual.max_violation,
                    min_norm_subgradient: full,
                }
                .at(Stage::Certification));
            }
            solutions.push(Solution {
                x,
                point,
                residual,
                h1_norm,
                full_subgradient: full,
                inner_residual: e.reduction.inner_residual,
                strong_convexity_margin: e.reduction.strong_convexity_margin,
            });
        }
        let mut distances = Vec::new();
        for i in 0..solutions.len() {
            for j in i + 1..solutions.len() {
                let d = h1_distance(ctx, &solutions[i].x, &solutions[j].x);
                if d <= outer.distinct {
                    return Err(HviError::Distinctness {
                        distance_to_first: d,
                        norm: solutions[j].h1_norm,
                    }
                    .at(Stage::Certification));
                }
                distances.push((i + 1, j + 1, d));
            }
        }
        Ok((solutions, distances))
    }

    pub fn diagnostics(&self, ctx: &EnergyContext, solutions: &[Solution]) -> Result<Diagnostics, HviError> {
        let inner = self.inner_options();
        let samples = self.config.continuity_samples;
        let mut ratio = 0.0f64;
        if samples > 0 {
            ratio = continuity_probe(ctx, &ctx.zeros(), 1e-2, samples, &inner, self.config.seed)?;
            if let Some(s) = solutions.first() {
                ratio = ratio.max(continuity_probe(ctx, &s.point.u, 1e-2, samples, &inner, self.config.seed)?);
            }
        }
        Ok(Diagnostics {
            required_margin: ctx.required_margin(),
            audited_margin: solutions
                .iter()
                .map(|s| s.strong_convexity_margin)
                .fold(f64::INFINITY, f64::min),
            continuity_ratio: ratio,
            slope_constant: ctx.slope_constant(),
            dim_hbar0: self.split.dim_hbar0(),
            dim_hhat: self.split.dim_hhat(),
            n_nodes: ctx.quadrature().len(),
        })
    }
}

/// basis → decomposition → hypotheses → local linking → minimization →
/// second point → lift and certify.
pub fn solve_hvi(config: SolverConfig) -> Result<SolutionSet, HviError> {
    let pipeline = Pipeline::new(config)?;
    let hypotheses = pipeline.hypotheses()?;
    pipeline.gate(&hypotheses)?;
    let ctx = pipeline.context()?;
    let linking = pipeline.linking(&ctx)?;
    let minimization = pipeline.minimize(&ctx)?;
    let second = pipeline.second_point(&ctx, &minimization, &linking)?;
    let points = [minimization.best.clone(), second.point.clone()];
    let (solutions, distances) = pipeline.certify(&ctx, &points)?;
    let diagnostics = pipeline.diagnostics(&ctx, &solutions).map_err(|e| e.at(Stage::Certification))?;
    Ok(SolutionSet {
        hypotheses_overridden: !hypotheses.all_pass(),
        config: pipeline.config,
        hypotheses,
        linking,
        minimization,
        second,
        solutions,
        distances,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_maximum_is_orientation_free() {
        let v = [0.0, 0.3, -0.2, 0.7, 0.1, 0.0];
        let mut r = v;
        r.reverse();
        assert_eq!(path_maximum(&v).1, path_maximum(&r).1);
        assert_eq!(path_maximum(&v).0, 3);
    }
}
