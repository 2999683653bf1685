//! Piecewise polynomial potentials ζ ↦ j(ζ), their Clarke subdifferentials
//! and the growth/resonance hypotheses the reduction relies on.
//!
//! A potential is continuous and piecewise polynomial. Piece `i` is active on
//! `[b_i, b_{i+1})` with `b_0 = −∞` and `b_{K+1} = +∞`, so a breakpoint
//! belongs to the piece on its right. At a breakpoint the Clarke
//! subdifferential is the segment between the two one-sided derivatives.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::HviError;
use crate::spectral::EigenBasis;

/// Polynomial with ascending coefficients `c₀ + c₁ζ + c₂ζ² + …`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.0.len() <= 1 {
            return Polynomial(vec![0.0]);
        }
        Polynomial(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| i as f64 * c)
                .collect(),
        )
    }

    /// Degree ignoring trailing zero coefficients; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|c| *c != 0.0).unwrap_or(0)
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.0.get(i).copied().unwrap_or(0.0)
    }

    fn leading(&self) -> f64 {
        self.coeff(self.degree())
    }
}

/// Named parameters of the built-in families, echoed in reports.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialFamily {
    /// The five-piece potential with a concave bump on [−4, 4] and affine tails.
    Example {
        mu: f64,
        slope_neg: f64,
        slope_pos: f64,
    },
    /// max{(ξ/2)ζ² + c|ζ|, (ξ/2)|ζ|}.
    Max { xi: f64, c: f64 },
    /// j(ζ) = (ε/2)ζ².
    Quadratic { epsilon: f64 },
    Zero,
    Custom,
}

/// Closed convex interval [lo, hi].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubgradientInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SubgradientInterval {
    pub fn point(v: f64) -> Self {
        SubgradientInterval { lo: v, hi: v }
    }

    pub fn hull(a: f64, b: f64) -> Self {
        SubgradientInterval {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn distance(&self, v: f64) -> f64 {
        if v < self.lo {
            self.lo - v
        } else if v > self.hi {
            v - self.hi
        } else {
            0.0
        }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    fn extend(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }
}

/// Sup of (v₁ − v₂)/(ζ₁ − ζ₂) over subgradients, i.e. the constant `l` of the
/// one-sided Lipschitz condition on ∂j.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeBound {
    pub value: f64,
    /// Where the supremum is attained or where it blows up.
    pub witness: f64,
    /// False when the supremum on some piece was estimated by sampling.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePotential {
    breakpoints: Vec<f64>,
    pieces: Vec<Polynomial>,
    derivatives: Vec<Polynomial>,
    family: PotentialFamily,
}

const CONTINUITY_TOL: f64 = 1e-12;

impl PiecewisePotential {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self, HviError> {
        Self::with_family(breakpoints, pieces, PotentialFamily::Custom)
    }

    fn with_family(
        breakpoints: Vec<f64>,
        pieces: Vec<Vec<f64>>,
        family: PotentialFamily,
    ) -> Result<Self, HviError> {
        let invalid = |reason: String| HviError::InvalidParameter {
            name: "potential",
            reason,
        };
        if pieces.len() != breakpoints.len() + 1 {
            return Err(invalid(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(invalid("breakpoints must be finite and strictly increasing".to_string()));
        }
        if pieces.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid("piece coefficients must be finite".to_string()));
        }
        let pieces: Vec<Polynomial> = pieces
            .into_iter()
            .map(|p| if p.is_empty() { Polynomial(vec![0.0]) } else { Polynomial(p) })
            .collect();
        for (i, b) in breakpoints.iter().enumerate() {
            let left = pieces[i].eval(*b);
            let right = pieces[i + 1].eval(*b);
            if (left - right).abs() > CONTINUITY_TOL * (1.0 + left.abs().max(right.abs())) {
                return Err(invalid(format!(
                    "discontinuous at breakpoint {b}: {left} vs {right}"
                )));
            }
        }
        let derivatives = pieces.iter().map(Polynomial::derivative).collect();
        let j = PiecewisePotential {
            breakpoints,
            pieces,
            derivatives,
            family,
        };
        if j.value(0.0).abs() > CONTINUITY_TOL {
            return Err(invalid(format!("j(0) = {} but must vanish", j.value(0.0))));
        }
        Ok(j)
    }

    pub fn zero() -> Self {
        Self::with_family(Vec::new(), vec![vec![0.0]], PotentialFamily::Zero)
            .expect("zero potential is valid")
    }

    /// j(ζ) = (ε/2)ζ², smooth.
    pub fn quadratic(epsilon: f64) -> Self {
        Self::with_family(
            Vec::new(),
            vec![vec![0.0, 0.0, 0.5 * epsilon]],
            PotentialFamily::Quadratic { epsilon },
        )
        .expect("quadratic potential is valid")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    /// Index of the piece active at ζ.
    pub fn piece_index(&self, zeta: f64) -> usize {
        self.breakpoints.partition_point(|b| *b <= zeta)
    }

    pub fn value(&self, zeta: f64) -> f64 {
        self.pieces[self.piece_index(zeta)].eval(zeta)
    }

    /// Derivative of the active piece (right derivative at breakpoints).
    pub fn derivative(&self, zeta: f64) -> f64 {
        self.derivatives[self.piece_index(zeta)].eval(zeta)
    }

    /// One-sided derivatives (left, right) at breakpoint `i`.
    fn one_sided(&self, i: usize) -> (f64, f64) {
        let b = self.breakpoints[i];
        (self.derivatives[i].eval(b), self.derivatives[i + 1].eval(b))
    }

    /// ∂j(ζ): a singleton off the breakpoints, the hull of the one-sided
    /// derivatives on them.
    pub fn clarke_interval(&self, zeta: f64) -> SubgradientInterval {
        match self.breakpoints.binary_search_by(|b| b.total_cmp(&zeta)) {
            Ok(i) => {
                let (l, r) = self.one_sided(i);
                SubgradientInterval::hull(l, r)
            }
            Err(_) => SubgradientInterval::point(self.derivative(zeta)),
        }
    }

    /// ∂j(ζ) enlarged by the subdifferentials of all breakpoints within `tol`
    /// of ζ. Numerical iterates land on kinks only up to rounding, and this
    /// is the form used by certificates.
    pub fn clarke_interval_within(&self, zeta: f64, tol: f64) -> SubgradientInterval {
        let mut out = self.clarke_interval(zeta);
        let start = self.breakpoints.partition_point(|b| *b < zeta - tol);
        for i in start..self.breakpoints.len() {
            let b = self.breakpoints[i];
            if b > zeta + tol {
                break;
            }
            let (l, r) = self.one_sided(i);
            out.extend(l);
            out.extend(r);
        }
        out
    }

    /// Proximal map of g(ζ) = (l/2)ζ² − j(ζ) with parameter 1/ρ:
    /// argmin_y g(y) + (ρ/2)(y − t)².
    ///
    /// Requires `l` to be at least [`slope_bound`](Self::slope_bound), which
    /// makes g convex with upward derivative jumps only, so
    /// F(y) = (l + ρ)y − j'(y) − ρt is nondecreasing.
    pub fn convexified_prox(&self, t: f64, l: f64, rho: f64) -> f64 {
        let f = |piece: usize, y: f64| (l + rho) * y - self.derivatives[piece].eval(y) - rho * t;
        let k = self.breakpoints.len();
        for i in 0..k {
            let b = self.breakpoints[i];
            let left = f(i, b);
            if left > 0.0 {
                let lo = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
                return self.solve_piece(i, lo, b, l, rho, t);
            }
            if f(i + 1, b) >= 0.0 {
                return b;
            }
        }
        let lo = if k == 0 { f64::NEG_INFINITY } else { self.breakpoints[k - 1] };
        self.solve_piece(k, lo, f64::INFINITY, l, rho, t)
    }

    /// Root of (l + ρ)y − p'(y) − ρt on (lo, hi), known to exist.
    fn solve_piece(&self, piece: usize, lo: f64, hi: f64, l: f64, rho: f64, t: f64) -> f64 {
        let d = &self.derivatives[piece];
        if d.degree() <= 1 {
            let y = (d.coeff(0) + rho * t) / (l + rho - d.coeff(1));
            return y.max(lo).min(hi);
        }
        let f = |y: f64| (l + rho) * y - d.eval(y) - rho * t;
        let dd = d.derivative();
        // F has slope at least ρ, so the root is within |F(a)|/ρ of any finite a.
        let (mut a, mut b) = (lo, hi);
        if !a.is_finite() && !b.is_finite() {
            let ft = f(t);
            if ft > 0.0 {
                a = t - ft / rho - 1.0;
                b = t;
            } else {
                a = t;
                b = t - ft / rho + 1.0;
            }
        } else if !a.is_finite() {
            a = b - f(b) / rho - 1.0;
        } else if !b.is_finite() {
            b = a - f(a) / rho + 1.0;
        }
        let mut y = 0.5 * (a + b);
        for _ in 0..200 {
            let fy = f(y);
            if fy == 0.0 {
                return y;
            }
            if fy > 0.0 {
                b = y;
            } else {
                a = y;
            }
            let slope = l + rho - dd.eval(y);
            let newton = y - fy / slope;
            y = if slope > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (b - a).abs() <= 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        y
    }

    /// Constant l of the one-sided Lipschitz condition
    /// (v₁ − v₂)/(ζ₁ − ζ₂) ≤ l for vᵢ ∈ ∂j(ζᵢ).
    ///
    /// For a continuous piecewise C¹ function this is the largest second
    /// derivative over the pieces, or +∞ as soon as the derivative jumps up
    /// at a breakpoint.
    pub fn slope_bound(&self) -> SlopeBound {
        for (i, b) in self.breakpoints.iter().enumerate() {
            let (l, r) = self.one_sided(i);
            if r > l + 1e-12 * (1.0 + l.abs().max(r.abs())) {
                return SlopeBound {
                    value: f64::INFINITY,
                    witness: *b,
                    exact: true,
                };
            }
        }
        let mut best = SlopeBound {
            value: f64::NEG_INFINITY,
            witness: 0.0,
            exact: true,
        };
        for (i, d) in self.derivatives.iter().enumerate() {
            let lo = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
            let hi = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
            let (value, witness, exact) = sup_polynomial(&d.derivative(), lo, hi);
            if value > best.value {
                best = SlopeBound {
                    value,
                    witness,
                    exact: best.exact && exact,
                };
            } else {
                best.exact &= exact;
            }
        }
        best
    }

    /// Human-readable description: breakpoints and piece coefficients.
    pub fn describe(&self) -> String {
        let mut s = String::from("breakpoints = [");
        for (i, b) in self.breakpoints.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(&format!("{b:?}"));
        }
        s.push_str("]; pieces = ");
        for (i, p) in self.pieces.iter().enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            for (k, c) in p.0.iter().enumerate() {
                if k > 0 {
                    s.push(' ');
                }
                s.push_str(&format!("{c:?}"));
            }
        }
        s
    }
}

/// Supremum of a polynomial over (lo, hi), possibly unbounded.
fn sup_polynomial(p: &Polynomial, lo: f64, hi: f64) -> (f64, f64, bool) {
    let deg = p.degree();
    let lead = p.leading();
    let odd = deg % 2 == 1;
    if deg >= 1 {
        if !hi.is_finite() && lead > 0.0 {
            return (f64::INFINITY, f64::INFINITY, true);
        }
        let lead_at_minus_inf = if odd { -lead } else { lead };
        if !lo.is_finite() && lead_at_minus_inf > 0.0 {
            return (f64::INFINITY, f64::NEG_INFINITY, true);
        }
    }
    let mut candidates: Vec<f64> = Vec::new();
    if lo.is_finite() {
        candidates.push(lo);
    }
    if hi.is_finite() {
        candidates.push(hi);
    }
    let exact = match deg {
        0 => {
            return (p.coeff(0), if lo.is_finite() { lo } else if hi.is_finite() { hi } else { 0.0 }, true);
        }
        1 => true,
        2 => {
            let vertex = -p.coeff(1) / (2.0 * p.coeff(2));
            if vertex > lo && vertex < hi {
                candidates.push(vertex);
            }
            true
        }
        _ => {
            let a = if lo.is_finite() { lo } else { hi - 100.0 };
            let b = if hi.is_finite() { hi } else { a + 100.0 };
            let n = 4000;
            for s in 0..=n {
                candidates.push(a + (b - a) * s as f64 / n as f64);
            }
            false
        }
    };
    candidates
        .into_iter()
        .map(|x| (p.eval(x), x))
        .fold((f64::NEG_INFINITY, 0.0, exact), |acc, (v, x)| if v > acc.0 { (v, x, exact) } else { acc })
}

/// The five-piece potential with parameters μ, slope ξ₁ for ζ < −4 and
/// slope ξ₂ for ζ ≥ 4.
pub fn example_potential(mu: f64, slope_neg: f64, slope_pos: f64) -> PiecewisePotential {
    PiecewisePotential::with_family(
        vec![-4.0, -1.0, 1.0, 4.0],
        vec![
            vec![-2.0 * mu - 4.0 * slope_neg, -slope_neg],
            vec![2.0 * mu, 3.0 * mu, 0.5 * mu],
            vec![0.0, 0.0, -0.5 * mu],
            vec![2.0 * mu, -3.0 * mu, 0.5 * mu],
            vec![-2.0 * mu - 4.0 * slope_pos, slope_pos],
        ],
        PotentialFamily::Example {
            mu,
            slope_neg,
            slope_pos,
        },
    )
    .expect("example potential is continuous for finite parameters")
}

/// j(ζ) = max{(ξ/2)ζ² + c|ζ|, (ξ/2)|ζ|}.
///
/// The branches cross at |ζ| = 1 − 2c/ξ; for c ≥ ξ/2 the quadratic branch
/// dominates everywhere and the only kink is at 0.
pub fn max_potential(xi: f64, c: f64) -> Result<PiecewisePotential, HviError> {
    if !(xi > 0.0) || !xi.is_finite() || !c.is_finite() {
        return Err(HviError::InvalidParameter {
            name: "xi",
            reason: "max potential needs a finite xi > 0".to_string(),
        });
    }
    let family = PotentialFamily::Max { xi, c };
    let half = 0.5 * xi;
    let crossing = 1.0 - 2.0 * c / xi;
    if crossing > 0.0 {
        PiecewisePotential::with_family(
            vec![-crossing, 0.0, crossing],
            vec![
                vec![0.0, -c, half],
                vec![0.0, -half],
                vec![0.0, half],
                vec![0.0, c, half],
            ],
            family,
        )
    } else {
        PiecewisePotential::with_family(vec![0.0], vec![vec![0.0, -c, half], vec![0.0, c, half]], family)
    }
}

/// Crossing points ±(1 − 2c/ξ) of the two branches of [`max_potential`], if any.
pub fn max_potential_crossing(xi: f64, c: f64) -> Option<f64> {
    let s = 1.0 - 2.0 * c / xi;
    (s > 0.0).then_some(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 7] = [
        Hypothesis::I,
        Hypothesis::II,
        Hypothesis::III,
        Hypothesis::IV,
        Hypothesis::V,
        Hypothesis::VI,
        Hypothesis::VII,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::I => "H(j)(i)",
            Hypothesis::II => "H(j)(ii)",
            Hypothesis::III => "H(j)(iii)",
            Hypothesis::IV => "H(j)(iv)",
            Hypothesis::V => "H(j)(v)",
            Hypothesis::VI => "H(j)(vi)",
            Hypothesis::VII => "H(j)(vii)",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Hypothesis::I => "i",
            Hypothesis::II => "ii",
            Hypothesis::III => "iii",
            Hypothesis::IV => "iv",
            Hypothesis::V => "v",
            Hypothesis::VI => "vi",
            Hypothesis::VII => "vii",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Untestable,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Untestable => "untestable",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisCheck {
    pub id: Hypothesis,
    pub verdict: Verdict,
    /// Witnessing constants of a pass (a₁, c₁, r, l, β, δ₀, γ, …).
    pub constants: Vec<(&'static str, f64)>,
    /// Concrete ζ values or violated constants backing a fail.
    pub witness: Vec<(&'static str, f64)>,
    pub note: String,
}

impl HypothesisCheck {
    fn new(id: Hypothesis) -> Self {
        HypothesisCheck {
            id,
            verdict: Verdict::Pass,
            constants: Vec::new(),
            witness: Vec::new(),
            note: String::new(),
        }
    }

    fn fail(mut self, note: impl Into<String>, witness: Vec<(&'static str, f64)>) -> Self {
        self.verdict = Verdict::Fail;
        self.note = note.into();
        self.witness = witness;
        self
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    pub fn witness_value(&self, name: &str) -> Option<f64> {
        self.witness.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub k: usize,
    pub m: usize,
    /// λ_{m−1}, λ_m, λ_k, λ_{k+1} (λ₀ = −∞).
    pub eigenvalues: [f64; 4],
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn get(&self, id: Hypothesis) -> &HypothesisCheck {
        self.checks.iter().find(|c| c.id == id).expect("all hypotheses are checked")
    }

    pub fn first_failure(&self) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.verdict != Verdict::Pass)
    }

    /// The constant l of (v), +∞ when unbounded.
    pub fn slope_constant(&self) -> f64 {
        self.get(Hypothesis::V).constant("l").unwrap_or(f64::INFINITY)
    }
}

/// Verifies H(j)(i)–(vii) for `j` against the distinct eigenvalues of `basis`.
pub fn check_hypotheses(
    j: &PiecewisePotential,
    basis: &EigenBasis,
    k: usize,
    m: usize,
) -> Result<HypothesisReport, HviError> {
    if m < 1 || m > k {
        return Err(HviError::InvalidParameter {
            name: "m",
            reason: format!("need 1 <= m <= k, got m = {m}, k = {k}"),
        });
    }
    let eig = |g: usize| {
        basis.distinct_eigenvalue(g).ok_or_else(|| HviError::InvalidParameter {
            name: "k",
            reason: format!("distinct eigenvalue {g} is not in the basis"),
        })
    };
    let lam_m_minus = eig(m - 1)?;
    let lam_m = eig(m)?;
    let lam_k = eig(k)?;
    if k + 1 > basis.complete_groups() {
        return Err(HviError::InvalidParameter {
            name: "k",
            reason: format!("distinct eigenvalue {} is not in the basis", k + 1),
        });
    }
    let lam_k1 = eig(k + 1)?;
    let gap = lam_k1 - lam_k;
    let checks = vec![
        check_i(j),
        check_ii(j),
        check_iii(j, basis.domain().critical_exponent()),
        check_iv(j),
        check_v(j, gap),
        check_vi(j, lam_m_minus - lam_k, lam_m - lam_k),
        check_vii(j, gap),
    ];
    Ok(HypothesisReport {
        checks,
        k,
        m,
        eigenvalues: [lam_m_minus, lam_m, lam_k, lam_k1],
    })
}

fn check_i(j: &PiecewisePotential) -> HypothesisCheck {
    let c = HypothesisCheck::new(Hypothesis::I);
    let v = j.value(0.0);
    if v.abs() > CONTINUITY_TOL {
        return c.fail("j(0) does not vanish", vec![("zeta", 0.0), ("j", v)]);
    }
    HypothesisCheck {
        note: "z-independent; j(0) = 0".to_string(),
        ..c
    }
}

fn check_ii(j: &PiecewisePotential) -> HypothesisCheck {
    let c = HypothesisCheck::new(Hypothesis::II);
    for (i, b) in j.breakpoints.iter().enumerate() {
        let jump = (j.pieces[i].eval(*b) - j.pieces[i + 1].eval(*b)).abs();
        if jump > CONTINUITY_TOL * (1.0 + j.value(*b).abs()) {
            return c.fail("discontinuous at a breakpoint", vec![("zeta", *b), ("jump", jump)]);
        }
    }
    HypothesisCheck {
        note: "continuous piecewise polynomial".to_string(),
        ..c
    }
}

/// |u| ≤ a₁ + c₁|ζ|^{r−1} with r = max(1, tail degree).
fn check_iii(j: &PiecewisePotential, critical: f64) -> HypothesisCheck {
    let mut c = HypothesisCheck::new(Hypothesis::III);
    let last = j.pieces.len() - 1;
    let tails = [&j.pieces[0], &j.pieces[last]];
    let r = tails.iter().map(|p| p.degree()).max().unwrap_or(0).max(1) as f64;
    if !(r < critical) {
        return c.fail("growth exponent not subcritical", vec![("r", r), ("critical_exponent", critical)]);
    }
    // For |ζ| ≥ 1 every monomial ζ^{i−1} with i ≤ r is bounded by |ζ|^{r−1}.
    let tail_bound = tails
        .iter()
        .map(|p| p.0.iter().enumerate().skip(1).map(|(i, ci)| i as f64 * ci.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let c1 = if tail_bound > 0.0 { tail_bound } else { 1.0 };
    // On [−R, R] every derivative is bounded by Σ i|cᵢ| R^{i−1}.
    let radius = j.breakpoints.iter().fold(1.0f64, |a, b| a.max(b.abs())) + 1.0;
    let a1 = j
        .pieces
        .iter()
        .map(|p| {
            p.0.iter()
                .enumerate()
                .skip(1)
                .map(|(i, ci)| i as f64 * ci.abs() * radius.powi(i as i32 - 1))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    // Sampled confirmation, including both one-sided derivatives at breakpoints.
    let bound = |z: f64| a1 + c1 * z.abs().powf(r - 1.0);
    let mut samples: Vec<f64> = (0..=2000).map(|s| -1e3 + s as f64 * 1.0).collect();
    samples.extend_from_slice(&j.breakpoints);
    for z in samples {
        let iv = j.clarke_interval(z);
        let worst = iv.lo.abs().max(iv.hi.abs());
        if worst > bound(z) * (1.0 + 1e-12) {
            return c.fail("subgradient exceeds fitted growth bound", vec![("zeta", z), ("u", worst)]);
        }
    }
    c.constants = vec![("a1", a1), ("c1", c1), ("r", r), ("critical_exponent", critical)];
    c.note = "constants fitted from piece coefficients".to_string();
    c
}

/// uζ − 2j → −∞ on both unbounded pieces.
fn check_iv(j: &PiecewisePotential) -> HypothesisCheck {
    let mut c = HypothesisCheck::new(Hypothesis::IV);
    let last = j.pieces.len() - 1;
    for (side, piece) in [(-1.0f64, &j.pieces[0]), (1.0f64, &j.pieces[last])] {
        // p'(ζ)ζ − 2p(ζ) = Σ (i − 2) cᵢ ζ^i
        let q = Polynomial(
            piece
                .0
                .iter()
                .enumerate()
                .map(|(i, ci)| (i as f64 - 2.0) * ci)
                .collect(),
        );
        let deg = q.degree();
        let lead = q.leading();
        let sign_at_inf = if deg % 2 == 1 { side * lead.signum() } else { lead.signum() };
        let far = side * 1e3;
        let sample = far * j.derivative(far) - 2.0 * j.value(far);
        if deg == 0 || lead == 0.0 || sign_at_inf >= 0.0 {
            return c.fail(
                "u·ζ − 2j(ζ) does not tend to −∞ on an unbounded piece",
                vec![("side", side), ("zeta", far), ("value", sample)],
            );
        }
        // sampled sweep from the outermost breakpoint to 10³
        let start = j.breakpoints.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        let near = side * start;
        let near_value = near * j.derivative(near) - 2.0 * j.value(near);
        if sample >= near_value && start < 1e3 {
            return c.fail(
                "sampled u·ζ − 2j(ζ) does not decrease along the tail",
                vec![("side", side), ("zeta", far), ("value", sample)],
            );
        }
        c.constants.push(if side < 0.0 { ("sample_at_minus_1e3", sample) } else { ("sample_at_plus_1e3", sample) });
    }
    c.note = "decided from the leading term of the unbounded pieces".to_string();
    c
}

/// One-sided Lipschitz bound l compared against λ_{k+1} − λ_k.
fn check_v(j: &PiecewisePotential, gap: f64) -> HypothesisCheck {
    let mut c = HypothesisCheck::new(Hypothesis::V);
    let bound = j.slope_bound();
    c.constants = vec![("l", bound.value), ("gap", gap), ("margin", gap - bound.value)];
    if !bound.value.is_finite() {
        return c.fail(
            "derivative jumps upward, so the slope quotient is unbounded",
            vec![("zeta", bound.witness), ("l", bound.value), ("gap", gap)],
        );
    }
    if !(bound.value < gap) {
        return c.fail(
            "slope bound l is not below the spectral gap λ_{k+1} − λ_k",
            vec![("zeta", bound.witness), ("l", bound.value), ("gap", gap)],
        );
    }
    if !bound.exact {
        c.verdict = Verdict::Untestable;
        c.note = "second-derivative supremum estimated by sampling".to_string();
        return c;
    }
    c.note = "l = sup of piece second derivatives; downward kinks only".to_string();
    c
}

/// λ_{m−1} − λ_k ≤ 2j/ζ² ≤ β < λ_m − λ_k for 0 < |ζ| ≤ δ₀.
fn check_vi(j: &PiecewisePotential, lower: f64, upper: f64) -> HypothesisCheck {
    let mut c = HypothesisCheck::new(Hypothesis::VI);
    // 2j/ζ² stays bounded near 0 only if both adjacent pieces have no
    // constant or linear term.
    let at_zero = j.piece_index(0.0);
    let left = if j.breakpoints.binary_search_by(|b| b.total_cmp(&0.0)).is_ok() {
        at_zero - 1
    } else {
        at_zero
    };
    for piece in [left, at_zero] {
        let p = &j.pieces[piece];
        if p.coeff(1) != 0.0 {
            let z = if p.coeff(1) > 0.0 { 1e-8 } else { -1e-8 };
            let z = if piece == left && piece != at_zero { -z.abs() } else { z };
            return c.fail(
                "2j(ζ)/ζ² is unbounded near 0 (linear term)",
                vec![("zeta", z), ("quotient", 2.0 * j.value(z) / (z * z))],
            );
        }
    }
    let nearest = j
        .breakpoints
        .iter()
        .filter(|b| **b != 0.0)
        .fold(f64::INFINITY, |a, b| a.min(b.abs()));
    let mut delta = if nearest.is_finite() { nearest } else { 1.0 };
    let quotient = |z: f64| 2.0 * j.value(z) / (z * z);
    let mut last_witness = (0.0, 0.0);
    while delta > 1e-8 {
        let n = 400;
        let mut sup = f64::NEG_INFINITY;
        let mut ok = true;
        for s in 1..=n {
            let r = delta * s as f64 / n as f64;
            for z in [-r, r] {
                let v = quotient(z);
                sup = sup.max(v);
                if v < lower || !(v < upper) {
                    ok = false;
                    last_witness = (z, v);
                }
            }
        }
        if ok {
            c.constants = vec![
                ("delta0", delta),
                ("beta", sup),
                ("lower", lower),
                ("upper", upper),
            ];
            c.note = "β constant: strict inequality β < λ_m − λ_k enforced everywhere".to_string();
            return c;
        }
        delta *= 0.5;
    }
    c.fail(
        "2j(ζ)/ζ² leaves [λ_{m−1} − λ_k, λ_m − λ_k) at every tested δ₀",
        vec![
            ("zeta", last_witness.0),
            ("quotient", last_witness.1),
            ("lower", lower),
            ("upper", upper),
        ],
    )
}

/// 0 ≤ liminf 2j/ζ² ≤ limsup 2j/ζ² ≤ γ < λ_{k+1} − λ_k at ±∞.
fn check_vii(j: &PiecewisePotential, gap: f64) -> HypothesisCheck {
    let mut c = HypothesisCheck::new(Hypothesis::VII);
    let last = j.pieces.len() - 1;
    let mut limits = [0.0; 2];
    for (slot, (side, piece)) in [(-1.0f64, &j.pieces[0]), (1.0f64, &j.pieces[last])].into_iter().enumerate() {
        let deg = piece.degree();
        limits[slot] = if deg > 2 {
            let sign = if deg % 2 == 1 { side * piece.leading().signum() } else { piece.leading().signum() };
            sign * f64::INFINITY
        } else if deg == 2 {
            2.0 * piece.coeff(2)
        } else {
            0.0
        };
    }
    let liminf = limits[0].min(limits[1]);
    let gamma = limits[0].max(limits[1]);
    c.constants = vec![("liminf", liminf), ("gamma", gamma), ("gap", gap)];
    if liminf < 0.0 {
        let constants = c.constants.clone();
        let mut f = c.fail("2j(ζ)/ζ² has a negative limit at infinity", vec![("liminf", liminf)]);
        f.constants = constants;
        return f;
    }
    if !(gamma < gap) {
        let constants = c.constants.clone();
        let mut f = c.fail(
            "limit of 2j(ζ)/ζ² at infinity reaches the spectral gap",
            vec![("gamma", gamma), ("gap", gap)],
        );
        f.constants = constants;
        return f;
    }
    c.note = "limits from the quadratic coefficients of the unbounded pieces".to_string();
    c
}
