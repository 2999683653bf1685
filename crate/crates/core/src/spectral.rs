//! Eigenpairs of the Dirichlet Laplacian, quadrature rules and the orthogonal
//! splittings of H¹₀ used by the reduction.
//!
//! Functions are stored as coefficient vectors in an L²-orthonormal
//! eigenbasis, so `‖x‖²_{L²} = Σ cₙ²` and `‖∇x‖²_{L²} = Σ λₙ cₙ²` hold exactly.
//! Eigenvalues are grouped into distinct values; groups are 1-based in the
//! public API to match the usual numbering λ₁ < λ₂ < ….

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::HviError;
use crate::linalg;

/// A point of Z. One-dimensional domains only use the first coordinate.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainSpec {
    /// Z = (0, length).
    Interval { length: f64 },
    /// Z = (0, lx) × (0, ly).
    Rectangle { lx: f64, ly: f64 },
    /// Z = (0, length) sampled by `points` equispaced nodes, boundary included.
    Grid1d { length: f64, points: usize },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<(), HviError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            DomainSpec::Interval { length } if !positive(length) => {
                Err(HviError::InvalidDomain("interval length must be positive"))
            }
            DomainSpec::Rectangle { lx, ly } if !positive(lx) || !positive(ly) => {
                Err(HviError::InvalidDomain("rectangle sides must be positive"))
            }
            DomainSpec::Grid1d { length, .. } if !positive(length) => {
                Err(HviError::InvalidDomain("grid length must be positive"))
            }
            DomainSpec::Grid1d { points, .. } if points < 3 => {
                Err(HviError::InvalidDomain("grid needs at least 3 points"))
            }
            _ => Ok(()),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::Rectangle { .. } => 2,
            _ => 1,
        }
    }

    /// Lebesgue measure |Z|.
    pub fn measure(&self) -> f64 {
        match *self {
            DomainSpec::Interval { length } | DomainSpec::Grid1d { length, .. } => length,
            DomainSpec::Rectangle { lx, ly } => lx * ly,
        }
    }

    /// Sobolev critical exponent 2* (infinite for dimension ≤ 2).
    pub fn critical_exponent(&self) -> f64 {
        let n = self.dimension() as f64;
        if n <= 2.0 {
            f64::INFINITY
        } else {
            2.0 * n / (n - 2.0)
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DomainSpec::Interval { .. } => "interval",
            DomainSpec::Rectangle { .. } => "rectangle",
            DomainSpec::Grid1d { .. } => "grid1d",
        }
    }
}

/// Shape of one eigenfunction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeShape {
    /// √(2/L)·sin(nπz/L).
    Sine { n: usize },
    /// (2/√(Lx·Ly))·sin(pπz₁/Lx)·sin(qπz₂/Ly).
    Sine2 { p: usize, q: usize },
    /// Eigenvector of the second-difference matrix; its nodal values are those
    /// of `Sine { n }` and off-grid evaluation uses that sine interpolant.
    GridSine { n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub eigenvalue: f64,
    pub shape: ModeShape,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenBasis {
    domain: DomainSpec,
    modes: Vec<Mode>,
    groups: Vec<Range<usize>>,
    /// Leading groups whose eigenspace is fully contained.
    complete: usize,
    grouping_tol: f64,
}

/// Default relative tolerance for merging eigenvalues into one distinct value.
pub fn default_grouping_tol(domain: &DomainSpec) -> f64 {
    match domain {
        DomainSpec::Grid1d { .. } => 1e-6,
        _ => 1e-9,
    }
}

fn same_eigenvalue(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// First `n_max` Dirichlet eigenpairs of `domain`, sorted by eigenvalue.
pub fn build_basis(domain: DomainSpec, n_max: usize) -> Result<EigenBasis, HviError> {
    build_basis_with_tol(domain, n_max, default_grouping_tol(&domain))
}

pub fn build_basis_with_tol(
    domain: DomainSpec,
    n_max: usize,
    grouping_tol: f64,
) -> Result<EigenBasis, HviError> {
    domain.validate()?;
    if n_max < 3 {
        return Err(HviError::InvalidParameter {
            name: "n_max",
            reason: "at least 3 modes are required".to_string(),
        });
    }
    if !(grouping_tol > 0.0) {
        return Err(HviError::InvalidParameter {
            name: "grouping_tol",
            reason: "must be positive".to_string(),
        });
    }
    let (modes, next_eigenvalue) = match domain {
        DomainSpec::Interval { length } => {
            let modes = (1..=n_max)
                .map(|n| Mode {
                    eigenvalue: (n as f64 * PI / length).powi(2),
                    shape: ModeShape::Sine { n },
                })
                .collect();
            (modes, None)
        }
        DomainSpec::Grid1d { length, points } => {
            let interior = points - 2;
            if n_max > interior {
                return Err(HviError::TooManyModes {
                    requested: n_max,
                    available: interior,
                });
            }
            let h = length / (points - 1) as f64;
            let eig = |n: usize| 4.0 / (h * h) * (n as f64 * PI * h / (2.0 * length)).sin().powi(2);
            let modes = (1..=n_max)
                .map(|n| Mode {
                    eigenvalue: eig(n),
                    shape: ModeShape::GridSine { n },
                })
                .collect();
            let next = (n_max < interior).then(|| eig(n_max + 1));
            (modes, next)
        }
        DomainSpec::Rectangle { lx, ly } => {
            // Any mode with p > n_max lies above the n_max modes (1..=n_max, 1),
            // so this candidate box contains the first n_max + 1 eigenvalues.
            let bound = n_max + 1;
            let mut all = Vec::with_capacity(bound * bound);
            for p in 1..=bound {
                for q in 1..=bound {
                    let lambda = (p as f64 * PI / lx).powi(2) + (q as f64 * PI / ly).powi(2);
                    all.push(Mode {
                        eigenvalue: lambda,
                        shape: ModeShape::Sine2 { p, q },
                    });
                }
            }
            sort_modes(&mut all);
            let next = all[n_max].eigenvalue;
            all.truncate(n_max);
            (all, Some(next))
        }
    };
    Ok(EigenBasis::from_sorted(domain, modes, next_eigenvalue, grouping_tol))
}

/// Sine products sin(pπz₁/Lx)·sin(qπz₂/Ly) with p ≤ `counts[0]` and
/// q ≤ `counts[1]`, sorted by eigenvalue. Unlike [`build_basis`] this is not
/// an eigenvalue truncation: only groups below the first omitted mode are
/// complete. Paired with [`Quadrature::tensor_collocation`] the transform to
/// interior nodal values is square and orthogonal.
pub fn build_tensor_basis(domain: DomainSpec, counts: [usize; 2], grouping_tol: f64) -> Result<EigenBasis, HviError> {
    domain.validate()?;
    let DomainSpec::Rectangle { lx, ly } = domain else {
        return Err(HviError::InvalidParameter {
            name: "domain.kind",
            reason: "tensor bases need a rectangle".to_string(),
        });
    };
    if counts[0] < 2 || counts[1] < 2 {
        return Err(HviError::InvalidParameter {
            name: "n_max",
            reason: "at least 2 modes per direction are required".to_string(),
        });
    }
    let lambda = |p: usize, q: usize| (p as f64 * PI / lx).powi(2) + (q as f64 * PI / ly).powi(2);
    let mut modes = Vec::with_capacity(counts[0] * counts[1]);
    for p in 1..=counts[0] {
        for q in 1..=counts[1] {
            modes.push(Mode {
                eigenvalue: lambda(p, q),
                shape: ModeShape::Sine2 { p, q },
            });
        }
    }
    sort_modes(&mut modes);
    let first_missing = lambda(counts[0] + 1, 1).min(lambda(1, counts[1] + 1));
    Ok(EigenBasis::from_sorted(domain, modes, Some(first_missing), grouping_tol))
}

fn sort_modes(modes: &mut [Mode]) {
    let key = |m: &Mode| match m.shape {
        ModeShape::Sine2 { p, q } => (p, q),
        ModeShape::Sine { n } | ModeShape::GridSine { n } => (n, 0),
    };
    modes.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue).then_with(|| key(a).cmp(&key(b))));
}

impl EigenBasis {
    /// Groups sorted modes; every group below `first_missing`, the lowest
    /// eigenvalue not in `modes`, is complete.
    fn from_sorted(domain: DomainSpec, modes: Vec<Mode>, first_missing: Option<f64>, grouping_tol: f64) -> Self {
        let mut groups: Vec<Range<usize>> = Vec::new();
        for (i, mode) in modes.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if same_eigenvalue(modes[g.start].eigenvalue, mode.eigenvalue, grouping_tol) => {
                    g.end = i + 1;
                }
                _ => groups.push(i..i + 1),
            }
        }
        let complete = match first_missing {
            Some(next) => groups
                .iter()
                .take_while(|g| {
                    let l = modes[g.start].eigenvalue;
                    l < next && !same_eigenvalue(l, next, grouping_tol)
                })
                .count(),
            None => groups.len(),
        };
        EigenBasis {
            domain,
            modes,
            groups,
            complete,
            grouping_tol,
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalue(&self, mode: usize) -> f64 {
        self.modes[mode].eigenvalue
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn grouping_tol(&self) -> f64 {
        self.grouping_tol
    }

    /// Number of distinct eigenvalues whose eigenspace is fully contained.
    pub fn complete_groups(&self) -> usize {
        self.complete
    }

    /// Mode indices of the 1-based distinct group `g`.
    pub fn group(&self, g: usize) -> Option<Range<usize>> {
        g.checked_sub(1).and_then(|i| self.groups.get(i)).cloned()
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// Distinct eigenvalue λ_g (1-based). `distinct_eigenvalue(0)` is −∞,
    /// the convention used for λ₀ when m = 1.
    pub fn distinct_eigenvalue(&self, g: usize) -> Option<f64> {
        if g == 0 {
            return Some(f64::NEG_INFINITY);
        }
        self.group(g).map(|r| self.modes[r.start].eigenvalue)
    }

    pub fn distinct_eigenvalues(&self) -> Vec<f64> {
        self.groups.iter().map(|g| self.modes[g.start].eigenvalue).collect()
    }

    /// Largest mode number per coordinate direction among the first `count` modes.
    pub fn highest_mode_numbers(&self, count: usize) -> [usize; 2] {
        let mut out = [0, 0];
        for mode in &self.modes[..count.min(self.modes.len())] {
            match mode.shape {
                ModeShape::Sine { n } | ModeShape::GridSine { n } => out[0] = out[0].max(n),
                ModeShape::Sine2 { p, q } => {
                    out[0] = out[0].max(p);
                    out[1] = out[1].max(q);
                }
            }
        }
        out
    }

    /// Keeps the first `count` modes.
    pub fn truncated(&self, count: usize) -> EigenBasis {
        let count = count.min(self.modes.len());
        let mut groups: Vec<Range<usize>> = self
            .groups
            .iter()
            .filter(|g| g.start < count)
            .map(|g| g.start..g.end.min(count))
            .collect();
        let complete = groups
            .iter()
            .zip(&self.groups)
            .take(self.complete)
            .take_while(|(a, b)| a.end == b.end)
            .count();
        if groups.is_empty() {
            groups.push(0..0);
        }
        EigenBasis {
            domain: self.domain,
            modes: self.modes[..count].to_vec(),
            groups,
            complete,
            grouping_tol: self.grouping_tol,
        }
    }

    pub fn value(&self, mode: usize, z: Point) -> f64 {
        match (self.modes[mode].shape, self.domain) {
            (ModeShape::Sine { n } | ModeShape::GridSine { n }, DomainSpec::Interval { length })
            | (ModeShape::Sine { n } | ModeShape::GridSine { n }, DomainSpec::Grid1d { length, .. }) => {
                (2.0 / length).sqrt() * (n as f64 * PI * z[0] / length).sin()
            }
            (ModeShape::Sine2 { p, q }, DomainSpec::Rectangle { lx, ly }) => {
                2.0 / (lx * ly).sqrt()
                    * (p as f64 * PI * z[0] / lx).sin()
                    * (q as f64 * PI * z[1] / ly).sin()
            }
            _ => unreachable!("mode shape does not match domain"),
        }
    }

    /// ∇uₙ(z); the second component is zero in one dimension.
    pub fn gradient(&self, mode: usize, z: Point) -> [f64; 2] {
        match (self.modes[mode].shape, self.domain) {
            (ModeShape::Sine { n } | ModeShape::GridSine { n }, DomainSpec::Interval { length })
            | (ModeShape::Sine { n } | ModeShape::GridSine { n }, DomainSpec::Grid1d { length, .. }) => {
                let w = n as f64 * PI / length;
                [(2.0 / length).sqrt() * w * (w * z[0]).cos(), 0.0]
            }
            (ModeShape::Sine2 { p, q }, DomainSpec::Rectangle { lx, ly }) => {
                let a = 2.0 / (lx * ly).sqrt();
                let (wp, wq) = (p as f64 * PI / lx, q as f64 * PI / ly);
                [
                    a * wp * (wp * z[0]).cos() * (wq * z[1]).sin(),
                    a * wq * (wp * z[0]).sin() * (wq * z[1]).cos(),
                ]
            }
            _ => unreachable!("mode shape does not match domain"),
        }
    }
}

/// Index sets of the splitting H̄ ⊕ E(λ_k) ⊕ Ĥ = Y ⊕ V ⊕ Ĥ.
///
/// Groups are contiguous in the sorted basis, so every set is a range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceDecomposition {
    pub k: usize,
    pub m: usize,
    /// Groups 1..k−1.
    pub hbar: Range<usize>,
    /// Group k.
    pub ek: Range<usize>,
    /// Groups k+1..N_trunc.
    pub hhat: Range<usize>,
    /// Groups 1..m−1.
    pub y: Range<usize>,
    /// Groups m..k.
    pub v: Range<usize>,
    /// Last distinct group included in Ĥ.
    pub last_group: usize,
}

impl SpaceDecomposition {
    /// H̄₀ = H̄ ⊕ E(λ_k).
    pub fn hbar0(&self) -> Range<usize> {
        0..self.ek.end
    }

    pub fn dim_hbar0(&self) -> usize {
        self.ek.end
    }

    pub fn dim_hhat(&self) -> usize {
        self.hhat.len()
    }

    /// Number of modes used by the truncated problem.
    pub fn active(&self) -> usize {
        self.hhat.end
    }
}

/// Splits the modes for distinct indices `1 ≤ m ≤ k`, keeping whole groups
/// past group k as long as they fit into `n_trunc` modes (at least group k+1).
pub fn decompose(
    basis: &EigenBasis,
    k: usize,
    m: usize,
    n_trunc: usize,
) -> Result<SpaceDecomposition, HviError> {
    use alloc::format;
    if m < 1 || m > k {
        return Err(HviError::Decomposition(format!(
            "need 1 <= m <= k, got m = {m}, k = {k}"
        )));
    }
    let complete = basis.complete_groups();
    if k + 1 > complete {
        return Err(HviError::Decomposition(format!(
            "group k+1 = {} is not available ({} complete groups); Ĥ would be empty",
            k + 1,
            complete
        )));
    }
    let group = |g: usize| basis.group(g).expect("group index checked");
    let ek = group(k);
    let first_hat = group(k + 1);
    if n_trunc < first_hat.len() {
        return Err(HviError::Decomposition(format!(
            "n_trunc = {n_trunc} does not cover group k+1 ({} modes)",
            first_hat.len()
        )));
    }
    let mut last_group = k + 1;
    let mut end = first_hat.end;
    while last_group < complete {
        let next = group(last_group + 1);
        if next.end - ek.end > n_trunc {
            break;
        }
        last_group += 1;
        end = next.end;
    }
    let y_end = if m == 1 { 0 } else { group(m - 1).end };
    Ok(SpaceDecomposition {
        k,
        m,
        hbar: 0..ek.start,
        ek: ek.clone(),
        hhat: ek.end..end,
        y: 0..y_end,
        v: y_end..ek.end,
        last_group,
    })
}

/// As [`decompose`] with every mode past group k in Ĥ, complete groups or
/// not. Used when the mode set is fixed by a collocation grid.
pub fn decompose_all(basis: &EigenBasis, k: usize, m: usize) -> Result<SpaceDecomposition, HviError> {
    let ek_end = basis.group(k).map_or(0, |g| g.end);
    let mut split = decompose(basis, k, m, basis.len().saturating_sub(ek_end))?;
    split.hhat.end = basis.len();
    split.last_group = basis.groups().len();
    Ok(split)
}

/// Coefficients in the L²-orthonormal eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVector {
    coeffs: Vec<f64>,
}

impl SpectralVector {
    pub fn zeros(len: usize) -> Self {
        SpectralVector {
            coeffs: vec![0.0; len],
        }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        SpectralVector { coeffs }
    }

    /// The unit vector e_index.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.coeffs[index] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// ‖x‖²_{L²}.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// ‖∇x‖²_{L²} = Σ λₙ cₙ².
    pub fn h1_seminorm_sq(&self, basis: &EigenBasis) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| basis.eigenvalue(i) * c * c)
            .sum()
    }

    pub fn h1_norm(&self, basis: &EigenBasis) -> f64 {
        self.h1_seminorm_sq(basis).sqrt()
    }

    /// Zero outside `range`.
    pub fn restricted(&self, range: Range<usize>) -> Self {
        let mut out = Self::zeros(self.len());
        out.coeffs[range.clone()].copy_from_slice(&self.coeffs[range]);
        out
    }

    pub fn is_supported_on(&self, range: Range<usize>) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(i, c)| range.contains(&i) || *c == 0.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// self + a·other
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        SpectralVector {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x + a * y)
                .collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        SpectralVector {
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        linalg::dot(&self.coeffs, &other.coeffs)
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.coeffs)
    }

    /// Coefficientwise reflection x ↦ −x.
    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }
}

/// Pointwise values Σ cₙ uₙ(z).
pub fn evaluate(basis: &EigenBasis, x: &SpectralVector, nodes: &[Point]) -> Vec<f64> {
    nodes
        .iter()
        .map(|&z| {
            x.coeffs()
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, c)| c * basis.value(i, z))
                .sum()
        })
        .collect()
}

/// Pointwise gradients Σ cₙ ∇uₙ(z).
pub fn evaluate_gradient(basis: &EigenBasis, x: &SpectralVector, nodes: &[Point]) -> Vec<[f64; 2]> {
    nodes
        .iter()
        .map(|&z| {
            let mut g = [0.0, 0.0];
            for (i, c) in x.coeffs().iter().enumerate() {
                if *c != 0.0 {
                    let d = basis.gradient(i, z);
                    g[0] += c * d[0];
                    g[1] += c * d[1];
                }
            }
            g
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Tensorized Gauss–Legendre with the given node count per dimension.
    GaussLegendre { nodes_per_dim: usize },
    /// Tensorized composite trapezoid on equispaced points, boundary included.
    Trapezoid { points_per_dim: usize },
    /// Trapezoid with its own point count in each direction.
    TrapezoidTensor { points: [usize; 2] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    rule: QuadratureRule,
    nodes: Vec<Point>,
    weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on Pₙ.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let previous = z;
            z = previous - p1 / dp;
            if (z - previous).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule_1d(rule: QuadratureRule, length: f64, axis: usize) -> Result<(Vec<f64>, Vec<f64>), HviError> {
    match rule {
        QuadratureRule::TrapezoidTensor { points } => {
            rule_1d(QuadratureRule::Trapezoid { points_per_dim: points[axis] }, length, 0)
        }
        QuadratureRule::GaussLegendre { nodes_per_dim: n } => {
            if n == 0 {
                return Err(HviError::InvalidParameter {
                    name: "quadrature.nodes",
                    reason: "Gauss rule needs at least one node".to_string(),
                });
            }
            let (x, w) = gauss_legendre(n);
            Ok((
                x.iter().map(|t| 0.5 * length * (t + 1.0)).collect(),
                w.iter().map(|w| 0.5 * length * w).collect(),
            ))
        }
        QuadratureRule::Trapezoid { points_per_dim: n } => {
            if n < 3 {
                return Err(HviError::InvalidParameter {
                    name: "quadrature.nodes",
                    reason: "trapezoid rule needs at least 3 points".to_string(),
                });
            }
            let h = length / (n - 1) as f64;
            let nodes = (0..n).map(|i| i as f64 * h).collect();
            let weights = (0..n)
                .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                .collect();
            Ok((nodes, weights))
        }
    }
}

impl Quadrature {
    pub fn new(domain: &DomainSpec, rule: QuadratureRule) -> Result<Self, HviError> {
        domain.validate()?;
        let (nodes, weights) = match *domain {
            DomainSpec::Interval { length } | DomainSpec::Grid1d { length, .. } => {
                let (x, w) = rule_1d(rule, length, 0)?;
                (x.into_iter().map(|t| [t, 0.0]).collect(), w)
            }
            DomainSpec::Rectangle { lx, ly } => {
                let (x, wx) = rule_1d(rule, lx, 0)?;
                let (y, wy) = rule_1d(rule, ly, 1)?;
                let mut nodes = Vec::with_capacity(x.len() * y.len());
                let mut weights = Vec::with_capacity(x.len() * y.len());
                for (xi, wxi) in x.iter().zip(&wx) {
                    for (yj, wyj) in y.iter().zip(&wy) {
                        nodes.push([*xi, *yj]);
                        weights.push(wxi * wyj);
                    }
                }
                (nodes, weights)
            }
        };
        Ok(Quadrature {
            rule,
            nodes,
            weights,
        })
    }

    /// Gauss rule with at least four nodes per highest mode number and dimension.
    pub fn gauss_for(basis: &EigenBasis, modes: usize) -> Result<Self, HviError> {
        let highest = basis.highest_mode_numbers(modes);
        let n = 4 * highest[0].max(highest[1]).max(1);
        Self::new(basis.domain(), QuadratureRule::GaussLegendre { nodes_per_dim: n })
    }

    /// Trapezoid rule whose interior node count equals the number of sine
    /// modes, so the discrete sine transform between coefficients and interior
    /// nodal values is square and orthogonal. For grids this is the grid itself.
    pub fn collocation_for(domain: &DomainSpec, modes: usize) -> Result<Self, HviError> {
        let points = match *domain {
            DomainSpec::Grid1d { points, .. } => points,
            DomainSpec::Interval { .. } => modes + 2,
            DomainSpec::Rectangle { .. } => {
                return Err(HviError::InvalidParameter {
                    name: "quadrature.rule",
                    reason: "rectangle collocation needs per-direction counts".to_string(),
                })
            }
        };
        Self::new(domain, QuadratureRule::Trapezoid { points_per_dim: points })
    }

    /// Trapezoid grid with `counts[i]` interior points in direction i, the
    /// collocation rule for [`build_tensor_basis`] with the same counts.
    pub fn tensor_collocation(domain: &DomainSpec, counts: [usize; 2]) -> Result<Self, HviError> {
        Self::new(
            domain,
            QuadratureRule::TrapezoidTensor {
                points: [counts[0] + 2, counts[1] + 2],
            },
        )
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Values of the first `modes` basis functions at the quadrature nodes,
/// row-major `nodes × modes`.
#[derive(Clone, Debug)]
pub struct ModeTable {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) data: Vec<f64>,
}

impl ModeTable {
    pub fn new(basis: &EigenBasis, modes: usize, nodes: &[Point]) -> Self {
        let mut data = Vec::with_capacity(nodes.len() * modes);
        for &z in nodes {
            for i in 0..modes {
                data.push(basis.value(i, z));
            }
        }
        ModeTable {
            rows: nodes.len(),
            cols: modes,
            data,
        }
    }

    pub fn row(&self, node: usize) -> &[f64] {
        &self.data[node * self.cols..(node + 1) * self.cols]
    }

    /// Nodal values U·c.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        for (q, o) in out.iter_mut().enumerate() {
            *o = linalg::dot(self.row(q), coeffs);
        }
    }

    /// Uᵀ·(w ∘ values), the L² projection onto the modes.
    pub fn analyze(&self, weights: &[f64], values: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for q in 0..self.rows {
            let wv = weights[q] * values[q];
            if wv != 0.0 {
                for (o, u) in out.iter_mut().zip(self.row(q)) {
                    *o += wv * u;
                }
            }
        }
    }

    /// Largest entry of |UᵀWU − I|.
    pub fn orthonormality_defect(&self, weights: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.cols {
            for j in 0..=i {
                let s: f64 = weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| {
                        let r = self.row(q);
                        w * r[i] * r[j]
                    })
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }
}

/// Result of [`coercivity_constant`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coercivity {
    /// min over the truncated Ĥ_n of (‖∇x‖² − ∫βx²)/‖∇x‖².
    pub value: f64,
    /// Number of modes in the truncated Ĥ_n.
    pub modes: usize,
    /// Last distinct group included.
    pub last_group: usize,
}

impl Coercivity {
    /// Strong convexity on the truncated space needs a strictly positive constant.
    pub fn is_positive(&self) -> bool {
        self.value > 1e-10
    }
}

/// Smallest ξ of (Λ − B)c = ξΛc on the modes of groups n+1.. (truncated to
/// `n_trunc` modes), with B_ij = ∫β uᵢuⱼ by `quad`.
pub fn coercivity_constant(
    basis: &EigenBasis,
    n: usize,
    beta: &dyn Fn(Point) -> f64,
    n_trunc: usize,
    quad: &Quadrature,
) -> Result<Coercivity, HviError> {
    let split = decompose(basis, n, n, n_trunc)?;
    let range = split.hhat.clone();
    let dim = range.len();
    let lambdas: Vec<f64> = range.clone().map(|i| basis.eigenvalue(i)).collect();
    let mut values = vec![0.0; quad.len() * dim];
    let mut weighted_beta = vec![0.0; quad.len()];
    for (q, &z) in quad.nodes().iter().enumerate() {
        weighted_beta[q] = quad.weights()[q] * beta(z);
        for (j, i) in range.clone().enumerate() {
            values[q * dim + j] = basis.value(i, z);
        }
    }
    let mut matrix = vec![0.0; dim * dim];
    for q in 0..quad.len() {
        let wb = weighted_beta[q];
        if wb == 0.0 {
            continue;
        }
        let row = &values[q * dim..(q + 1) * dim];
        for i in 0..dim {
            let a = wb * row[i];
            for j in 0..=i {
                matrix[i * dim + j] += a * row[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..=i {
            let b = matrix[i * dim + j] / (lambdas[i] * lambdas[j]).sqrt();
            let entry = if i == j { 1.0 - b } else { -b };
            matrix[i * dim + j] = entry;
            matrix[j * dim + i] = entry;
        }
    }
    Ok(Coercivity {
        value: linalg::min_symmetric_eigenvalue(dim, &matrix),
        modes: dim,
        last_group: split.last_group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_of_length_pi_has_square_eigenvalues() {
        let basis = build_basis(DomainSpec::Interval { length: PI }, 4).unwrap();
        let l = basis.eigenvalues();
        for (i, v) in l.iter().enumerate() {
            assert!((v - ((i + 1) * (i + 1)) as f64).abs() < 1e-12);
        }
        assert_eq!(basis.groups().len(), 4);
    }

    #[test]
    fn rejects_bad_domains_and_sizes() {
        assert!(build_basis(DomainSpec::Interval { length: 0.0 }, 4).is_err());
        assert!(build_basis(DomainSpec::Rectangle { lx: 1.0, ly: -1.0 }, 4).is_err());
        assert!(build_basis(DomainSpec::Grid1d { length: 1.0, points: 2 }, 3).is_err());
        assert!(matches!(
            build_basis(DomainSpec::Grid1d { length: 1.0, points: 6 }, 5),
            Err(HviError::TooManyModes { requested: 5, available: 4 })
        ));
        assert!(build_basis(DomainSpec::Interval { length: 1.0 }, 2).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((integral - 2.0 / 13.0).abs() < 1e-14);
        assert!(w.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn quadrature_reproduces_measure() {
        for domain in [
            DomainSpec::Interval { length: 2.5 },
            DomainSpec::Rectangle { lx: 1.5, ly: 0.7 },
            DomainSpec::Grid1d { length: 3.0, points: 11 },
        ] {
            for rule in [
                QuadratureRule::GaussLegendre { nodes_per_dim: 9 },
                QuadratureRule::Trapezoid { points_per_dim: 9 },
            ] {
                let q = Quadrature::new(&domain, rule).unwrap();
                let total: f64 = q.weights().iter().sum();
                assert!((total - domain.measure()).abs() <= 1e-12 * domain.measure());
            }
        }
    }

    #[test]
    fn decompose_interval_k1_has_empty_hbar() {
        let basis = build_basis(DomainSpec::Interval { length: PI }, 10).unwrap();
        let d = decompose(&basis, 1, 1, 5).unwrap();
        assert!(d.hbar.is_empty());
        assert_eq!(d.ek, 0..1);
        assert_eq!(d.hhat, 1..6);
        assert!(d.y.is_empty());
        assert_eq!(d.v, 0..1);
    }

    #[test]
    fn decompose_rejects_missing_next_group() {
        let basis = build_basis(DomainSpec::Interval { length: PI }, 4).unwrap();
        assert!(decompose(&basis, 4, 2, 8).is_err());
        assert!(decompose(&basis, 2, 3, 2).is_err());
        assert!(decompose(&basis, 2, 0, 2).is_err());
    }

    #[test]
    fn truncated_basis_keeps_prefix() {
        let basis = build_basis(DomainSpec::Interval { length: PI }, 10).unwrap();
        let t = basis.truncated(5);
        assert_eq!(t.len(), 5);
        assert_eq!(t.groups().len(), 5);
        assert_eq!(t.complete_groups(), 5);
    }

    #[test]
    fn grid_gradient_matches_finite_difference() {
        let basis = build_basis(DomainSpec::Rectangle { lx: 1.3, ly: 0.9 }, 6).unwrap();
        let z = [0.41, 0.23];
        let h = 1e-6;
        for i in 0..basis.len() {
            let g = basis.gradient(i, z);
            let fx = (basis.value(i, [z[0] + h, z[1]]) - basis.value(i, [z[0] - h, z[1]])) / (2.0 * h);
            let fy = (basis.value(i, [z[0], z[1] + h]) - basis.value(i, [z[0], z[1] - h])) / (2.0 * h);
            assert!((g[0] - fx).abs() < 1e-6 && (g[1] - fy).abs() < 1e-6);
        }
    }

    #[test]
    fn coercivity_of_zero_weight_is_one() {
        let basis = build_basis(DomainSpec::Interval { length: PI }, 12).unwrap();
        let quad = Quadrature::gauss_for(&basis, 12).unwrap();
        let c = coercivity_constant(&basis, 2, &|_| 0.0, 8, &quad).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12);
        assert_eq!(c.modes, 8);
    }

    #[test]
    fn spectral_vector_norms() {
        let basis = build_basis(DomainSpec::Interval { length: PI }, 3).unwrap();
        let x = SpectralVector::from_coeffs(Vec::from([1.0, 2.0, -1.0]));
        assert_eq!(x.l2_norm_sq(), 6.0);
        assert!((x.h1_seminorm_sq(&basis) - (1.0 + 16.0 + 9.0)).abs() < 1e-12);
        assert!(x.restricted(0..1).is_supported_on(0..1));
    }
}
