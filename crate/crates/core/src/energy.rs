//! The energy φ(x) = ½‖∇x‖² − (λ_k/2)‖x‖² − ∫ j(x), its subgradients in
//! spectral coordinates, and pointwise certificates for the inclusion
//! −Δx − λ_k x ∈ ∂j(x).
//!
//! A subgradient of φ at x has components (λₙ − λ_k)cₙ − ∫ h uₙ with
//! h(z) ∈ ∂j(x(z)). With the quadrature fixed, h is a vector of nodal values
//! and the integral is `Uᵀ W h`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::HviError;
use crate::potential::{PiecewisePotential, SubgradientInterval};
use crate::spectral::{
    coercivity_constant, EigenBasis, ModeTable, Point, Quadrature, SpaceDecomposition, SpectralVector,
};

#[derive(Clone, Debug)]
pub struct EnergyContext {
    basis: EigenBasis,
    split: SpaceDecomposition,
    potential: PiecewisePotential,
    quad: Quadrature,
    table: ModeTable,
    lambda_k: f64,
    /// λₙ − λ_k for every active mode.
    shifted: Vec<f64>,
    /// False for quadrature nodes on ∂Z, where the inclusion is not imposed.
    interior: Vec<bool>,
    kink_tol: f64,
    /// One-sided slope constant l of ∂j.
    slope: f64,
    /// Coercivity constant on Ĥ for β ≡ l + λ_k; NaN when l is not finite.
    required_margin: f64,
}

impl EnergyContext {
    /// `basis` may hold more modes than the decomposition uses; it is
    /// truncated to the active ones.
    pub fn new(
        basis: &EigenBasis,
        split: SpaceDecomposition,
        potential: PiecewisePotential,
        quad: Quadrature,
        kink_tol: f64,
    ) -> Result<Self, HviError> {
        let active = split.active();
        if active > basis.len() {
            return Err(HviError::TooManyModes {
                requested: active,
                available: basis.len(),
            });
        }
        if !(kink_tol >= 0.0) {
            return Err(HviError::InvalidParameter {
                name: "kink_tol",
                reason: "must be nonnegative".into(),
            });
        }
        let basis = basis.truncated(active);
        let lambda_k = basis.eigenvalue(split.ek.start);
        let shifted = basis.eigenvalues().iter().map(|l| l - lambda_k).collect();
        let table = ModeTable::new(&basis, active, quad.nodes());
        let interior = quad.nodes().iter().map(|z| !on_boundary(&basis, *z)).collect();
        let slope = potential.slope_bound().value;
        let required_margin = if slope.is_finite() {
            let beta = slope + lambda_k;
            coercivity_constant(&basis, split.k, &|_| beta, split.dim_hhat(), &quad)?.value
        } else {
            f64::NAN
        };
        Ok(EnergyContext {
            basis,
            split,
            potential,
            quad,
            table,
            lambda_k,
            shifted,
            interior,
            kink_tol,
            slope,
            required_margin,
        })
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn decomposition(&self) -> &SpaceDecomposition {
        &self.split
    }

    pub fn potential(&self) -> &PiecewisePotential {
        &self.potential
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    pub fn table(&self) -> &ModeTable {
        &self.table
    }

    pub fn lambda_k(&self) -> f64 {
        self.lambda_k
    }

    /// λₙ − λ_k for every active mode.
    pub fn shifted_eigenvalues(&self) -> &[f64] {
        &self.shifted
    }

    pub fn kink_tol(&self) -> f64 {
        self.kink_tol
    }

    /// The constant l with (v₁ − v₂)/(ζ₁ − ζ₂) ≤ l for vᵢ ∈ ∂j(ζᵢ).
    pub fn slope_constant(&self) -> f64 {
        self.slope
    }

    /// Lower bound every strong-monotonicity audit must meet: the coercivity
    /// constant of Ĥ for the weight β ≡ l + λ_k.
    pub fn required_margin(&self) -> f64 {
        self.required_margin
    }

    /// Number of active modes.
    pub fn dim(&self) -> usize {
        self.shifted.len()
    }

    pub fn zeros(&self) -> SpectralVector {
        SpectralVector::zeros(self.dim())
    }

    pub fn nodal_values(&self, x: &SpectralVector) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "coefficient vector does not match the context");
        let mut out = vec![0.0; self.quad.len()];
        self.table.synthesize(x.coeffs(), &mut out);
        out
    }

    /// ∫ h uₙ for every active mode, by quadrature.
    pub fn project(&self, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.table.analyze(self.quad.weights(), h, &mut out);
        out
    }

    /// φ(x) = ½Σ(λₙ − λ_k)cₙ² − ∫ j(x).
    pub fn energy(&self, x: &SpectralVector) -> f64 {
        let nodal = self.nodal_values(x);
        self.energy_with_nodal(x, &nodal)
    }

    pub(crate) fn energy_with_nodal(&self, x: &SpectralVector, nodal: &[f64]) -> f64 {
        let quadratic: f64 = x
            .coeffs()
            .iter()
            .zip(&self.shifted)
            .map(|(c, s)| 0.5 * s * c * c)
            .sum();
        let potential: f64 = nodal
            .iter()
            .zip(self.quad.weights())
            .map(|(v, w)| w * self.potential.value(*v))
            .sum();
        quadratic - potential
    }

    /// (λₙ − λ_k)cₙ − ∫ h uₙ for the given nodal selection h.
    pub fn subgradient_with(&self, x: &SpectralVector, h: &[f64]) -> SpectralVector {
        let projected = self.project(h);
        SpectralVector::from_coeffs(
            x.coeffs()
                .iter()
                .zip(&self.shifted)
                .zip(projected)
                .map(|((c, s), p)| s * c - p)
                .collect(),
        )
    }

    /// Subgradient with h the derivative of j off breakpoints and the
    /// midpoint of the Clarke interval on them.
    pub fn subgradient_selection(&self, x: &SpectralVector) -> SpectralVector {
        let h: Vec<f64> = self
            .nodal_values(x)
            .iter()
            .map(|v| self.potential.clarke_interval(*v).midpoint())
            .collect();
        self.subgradient_with(x, &h)
    }

    /// Clarke intervals of j at the nodal values, widened by the kink tolerance.
    pub fn node_intervals(&self, nodal: &[f64]) -> Vec<SubgradientInterval> {
        nodal
            .iter()
            .map(|v| self.potential.clarke_interval_within(*v, self.kink_tol))
            .collect()
    }

    /// Estimate of the smallest Euclidean norm of a subgradient of φ at x,
    /// restricted to the mode indices in `restriction`.
    pub fn min_norm_subgradient(&self, x: &SpectralVector, restriction: Range<usize>) -> f64 {
        let nodal = self.nodal_values(x);
        let intervals = self.node_intervals(&nodal);
        let start: Vec<f64> = intervals.iter().map(|iv| iv.midpoint()).collect();
        self.min_norm_selection(x, &intervals, &start, restriction).0
    }

    /// As [`min_norm_subgradient`](Self::min_norm_subgradient), starting the
    /// selection search from `h0` (clamped into the node intervals).
    pub fn min_norm_subgradient_from(
        &self,
        x: &SpectralVector,
        restriction: Range<usize>,
        h0: &[f64],
    ) -> f64 {
        let nodal = self.nodal_values(x);
        let intervals = self.node_intervals(&nodal);
        let start: Vec<f64> = intervals.iter().zip(h0).map(|(iv, h)| iv.clamp(*h)).collect();
        self.min_norm_selection(x, &intervals, &start, restriction).0
    }

    /// Coordinate descent over the nodes whose interval is not a singleton,
    /// minimizing the restricted norm of (λ − λ_k)c − Uᵀ W h. Returns the
    /// norm and the selection.
    pub(crate) fn min_norm_selection(
        &self,
        x: &SpectralVector,
        intervals: &[SubgradientInterval],
        start: &[f64],
        restriction: Range<usize>,
    ) -> (f64, Vec<f64>) {
        let mut h = start.to_vec();
        let full = self.subgradient_with(x, &h);
        let mut e: Vec<f64> = full.coeffs()[restriction.clone()].to_vec();
        let free: Vec<usize> = (0..h.len()).filter(|q| !intervals[*q].is_singleton()).collect();
        let weights = self.quad.weights();
        for _ in 0..200 {
            let mut moved: f64 = 0.0;
            for &q in &free {
                let row = &self.table.row(q)[restriction.clone()];
                let w = weights[q];
                let col_sq: f64 = row.iter().map(|u| w * w * u * u).sum();
                if col_sq == 0.0 {
                    continue;
                }
                // e = a − Σ w_q h_q U_q, so raising h_q by δ subtracts δ w_q U_q.
                let along: f64 = row.iter().zip(&e).map(|(u, ei)| w * u * ei).sum();
                let target = intervals[q].clamp(h[q] + along / col_sq);
                let delta = target - h[q];
                if delta != 0.0 {
                    for (ei, u) in e.iter_mut().zip(row) {
                        *ei -= delta * w * u;
                    }
                    h[q] = target;
                    moved = moved.max(delta.abs());
                }
            }
            if moved <= 1e-15 {
                break;
            }
        }
        (e.iter().map(|v| v * v).sum::<f64>().sqrt(), h)
    }

    /// r(z) = −Δx − λ_k x = Σ(λₙ − λ_k)cₙuₙ(z) at the given points.
    pub fn residual_values(&self, x: &SpectralVector, points: &[Point]) -> Vec<f64> {
        let scaled = SpectralVector::from_coeffs(
            x.coeffs().iter().zip(&self.shifted).map(|(c, s)| c * s).collect(),
        );
        crate::spectral::evaluate(&self.basis, &scaled, points)
    }

    /// Checks r(z) ∈ ∂j(x(z)) at every interior quadrature node.
    pub fn residual_certificate(&self, x: &SpectralVector, tol: f64) -> ResidualReport {
        let nodal = self.nodal_values(x);
        let scaled: Vec<f64> = x.coeffs().iter().zip(&self.shifted).map(|(c, s)| c * s).collect();
        let mut r = vec![0.0; nodal.len()];
        self.table.synthesize(&scaled, &mut r);
        let weights = self.quad.weights();
        let mut report = ResidualReport {
            max_violation: 0.0,
            max_relative_violation: 0.0,
            violating_fraction: 0.0,
            tol,
            n_nodes: 0,
            kink_nodes: 0,
            distances: Vec::with_capacity(nodal.len()),
        };
        let mut total = 0.0;
        let mut violating = 0.0;
        for q in 0..nodal.len() {
            if !self.interior[q] {
                report.distances.push(0.0);
                continue;
            }
            let iv = self.potential.clarke_interval_within(nodal[q], self.kink_tol);
            if !iv.is_singleton() {
                report.kink_nodes += 1;
            }
            let d = iv.distance(r[q]);
            report.distances.push(d);
            report.n_nodes += 1;
            total += weights[q];
            report.max_violation = report.max_violation.max(d);
            report.max_relative_violation = report.max_relative_violation.max(d / (1.0 + r[q].abs()));
            if d > tol * (1.0 + r[q].abs()) {
                violating += weights[q];
            }
        }
        if total > 0.0 {
            report.violating_fraction = violating / total;
        }
        report
    }
}

fn on_boundary(basis: &EigenBasis, z: Point) -> bool {
    use crate::spectral::DomainSpec;
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-14 * (1.0 + b.abs());
    match *basis.domain() {
        DomainSpec::Interval { length } | DomainSpec::Grid1d { length, .. } => {
            near(z[0], 0.0) || near(z[0], length)
        }
        DomainSpec::Rectangle { lx, ly } => {
            near(z[0], 0.0) || near(z[0], lx) || near(z[1], 0.0) || near(z[1], ly)
        }
    }
}

/// Pointwise check of −Δx − λ_k x ∈ ∂j(x) at the quadrature nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    /// max over nodes of dist(r(z), ∂j(x(z))).
    pub max_violation: f64,
    /// max of dist / (1 + |r(z)|).
    pub max_relative_violation: f64,
    /// Quadrature-weighted fraction of nodes with dist > tol·(1 + |r(z)|).
    pub violating_fraction: f64,
    pub tol: f64,
    /// Interior nodes checked.
    pub n_nodes: usize,
    /// Interior nodes within the kink tolerance of a breakpoint.
    pub kink_nodes: usize,
    /// Per-node distances, zero on boundary nodes.
    pub distances: Vec<f64>,
}

impl ResidualReport {
    pub fn passes(&self) -> bool {
        self.violating_fraction == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::example_potential;
    use crate::spectral::{build_basis, decompose, DomainSpec};
    use core::f64::consts::PI;

    fn context(potential: PiecewisePotential) -> EnergyContext {
        let basis = build_basis(DomainSpec::Interval { length: PI }, 12).unwrap();
        let split = decompose(&basis, 2, 2, 8).unwrap();
        let quad = Quadrature::collocation_for(basis.domain(), split.active()).unwrap();
        EnergyContext::new(&basis, split, potential, quad, 1e-9).unwrap()
    }

    #[test]
    fn energy_of_zero_vanishes() {
        let ctx = context(example_potential(1.5, 0.5, 0.5));
        assert_eq!(ctx.energy(&ctx.zeros()), 0.0);
        assert!(ctx.subgradient_selection(&ctx.zeros()).norm() == 0.0);
    }

    #[test]
    fn linear_problem_energy_is_quadratic() {
        let ctx = context(PiecewisePotential::zero());
        let x = SpectralVector::unit(ctx.dim(), 4).scaled(0.7);
        assert!((ctx.energy(&x) - 0.5 * (25.0 - 4.0) * 0.49).abs() < 1e-12);
        let g = ctx.subgradient_selection(&x);
        assert!((g.coeffs()[4] - 21.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn collocation_parseval_is_exact() {
        let ctx = context(PiecewisePotential::zero());
        assert!(ctx.table().orthonormality_defect(ctx.quadrature().weights()) < 1e-13);
    }

    #[test]
    fn residual_certificate_flags_non_solution() {
        let ctx = context(example_potential(1.5, 0.5, 0.5));
        let x = SpectralVector::unit(ctx.dim(), 2);
        let rep = ctx.residual_certificate(&x, 1e-6);
        assert!(rep.max_violation > 0.1);
        assert!(!rep.passes());
        let zero = ctx.residual_certificate(&ctx.zeros(), 1e-6);
        assert_eq!(zero.max_violation, 0.0);
        assert!(zero.passes());
    }

    #[test]
    fn min_norm_selection_uses_kink_freedom() {
        // x = 0 on every node sits on the kink of |ζ|-type potentials.
        let j = crate::potential::max_potential(1.0, 0.75).unwrap();
        let ctx = context(j);
        let x = SpectralVector::unit(ctx.dim(), 1).scaled(1e-12);
        assert!(ctx.min_norm_subgradient(&x, 0..ctx.dim()) < 1e-6);
    }
}
