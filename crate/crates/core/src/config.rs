//! Solver configuration shared by the library pipeline and the command line.

use alloc::format;
use alloc::vec::Vec;

use crate::error::HviError;
use crate::potential::{example_potential, max_potential, PiecewisePotential};
use crate::spectral::DomainSpec;

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialSpec {
    Example { mu: f64, slope_neg: f64, slope_pos: f64 },
    Max { xi: f64, c: f64 },
    Quadratic { epsilon: f64 },
    Zero,
    Custom { breakpoints: Vec<f64>, pieces: Vec<Vec<f64>> },
}

impl PotentialSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            PotentialSpec::Example { .. } => "example",
            PotentialSpec::Max { .. } => "max",
            PotentialSpec::Quadratic { .. } => "quadratic",
            PotentialSpec::Zero => "zero",
            PotentialSpec::Custom { .. } => "custom",
        }
    }

    pub fn build(&self) -> Result<PiecewisePotential, HviError> {
        match self {
            PotentialSpec::Example { mu, slope_neg, slope_pos } => {
                if ![mu, slope_neg, slope_pos].iter().all(|v| v.is_finite()) {
                    return Err(HviError::InvalidParameter {
                        name: "potential",
                        reason: "example parameters must be finite".into(),
                    });
                }
                Ok(example_potential(*mu, *slope_neg, *slope_pos))
            }
            PotentialSpec::Max { xi, c } => max_potential(*xi, *c),
            PotentialSpec::Quadratic { epsilon } => {
                if !epsilon.is_finite() {
                    return Err(HviError::InvalidParameter {
                        name: "potential.epsilon",
                        reason: "must be finite".into(),
                    });
                }
                Ok(PiecewisePotential::quadratic(*epsilon))
            }
            PotentialSpec::Zero => Ok(PiecewisePotential::zero()),
            PotentialSpec::Custom { breakpoints, pieces } => {
                PiecewisePotential::new(breakpoints.clone(), pieces.clone())
            }
        }
    }
}

/// How integrals over Z are discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureChoice {
    /// Collocation in one dimension, Gauss–Legendre on rectangles.
    Auto,
    /// Trapezoid rule on the sine collocation points (one dimension only).
    Collocation,
    /// Gauss–Legendre; `None` picks four nodes per highest mode number.
    Gauss { nodes_per_dim: Option<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub domain: DomainSpec,
    pub k: usize,
    pub m: usize,
    /// Number of modes kept past group k; a lower bound on rectangles with
    /// collocation, unused on grids, which keep every grid mode.
    pub n_trunc: usize,
    pub potential: PotentialSpec,
    pub quadrature: QuadratureChoice,
    pub tol_inner: f64,
    pub tol_outer: f64,
    pub tol_residual: f64,
    /// `None` uses the domain default.
    pub grouping_tol: Option<f64>,
    /// Nodes this close to a breakpoint get the full Clarke interval.
    pub kink_tol: f64,
    pub nontrivial_threshold: f64,
    pub distinct_threshold: f64,
    pub branch_tol: f64,
    pub seed: u64,
    pub multistarts: usize,
    pub start_radius: f64,
    pub n_grad: usize,
    pub max_inner_iter: usize,
    pub max_outer_iter: usize,
    pub psi_floor: f64,
    pub path_segments: usize,
    pub path_refinements: usize,
    pub linking_delta_max: f64,
    pub linking_samples: usize,
    pub continuity_samples: usize,
    /// Run past failed hypotheses; the report records that this was done.
    pub override_hypotheses: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            domain: DomainSpec::Interval {
                length: core::f64::consts::PI,
            },
            k: 2,
            m: 2,
            n_trunc: 64,
            potential: PotentialSpec::Example {
                mu: 1.5,
                slope_neg: 0.5,
                slope_pos: 0.5,
            },
            quadrature: QuadratureChoice::Auto,
            tol_inner: 1e-9,
            tol_outer: 1e-7,
            tol_residual: 1e-6,
            grouping_tol: None,
            kink_tol: 1e-9,
            nontrivial_threshold: 1e-4,
            distinct_threshold: 1e-3,
            branch_tol: 1e-8,
            seed: 0,
            multistarts: 8,
            start_radius: 4.0,
            n_grad: 0,
            max_inner_iter: 20_000,
            max_outer_iter: 500,
            psi_floor: -1e6,
            path_segments: 32,
            path_refinements: 2,
            linking_delta_max: 1.0,
            linking_samples: 16,
            continuity_samples: 8,
            override_hypotheses: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), HviError> {
        self.domain.validate()?;
        let bad = |name: &'static str, reason: alloc::string::String| {
            Err(HviError::InvalidParameter { name, reason })
        };
        if self.k < 1 {
            return bad("solver.k", "must be at least 1".into());
        }
        if self.m < 1 || self.m > self.k {
            return bad(
                "solver.m",
                format!("must satisfy 1 <= m <= k, got m = {} and k = {}", self.m, self.k),
            );
        }
        if self.n_trunc < 1 {
            return bad("solver.n_trunc", "must be at least 1".into());
        }
        let positive = [
            ("tol.inner", self.tol_inner),
            ("tol.outer", self.tol_outer),
            ("tol.residual", self.tol_residual),
            ("tol.kink", self.kink_tol),
            ("threshold.nontrivial", self.nontrivial_threshold),
            ("threshold.distinct", self.distinct_threshold),
            ("tol.branch", self.branch_tol),
            ("search.start_radius", self.start_radius),
            ("linking.delta_max", self.linking_delta_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(name, format!("must be positive and finite, got {v}"));
            }
        }
        if let Some(t) = self.grouping_tol {
            if !(t > 0.0) || !t.is_finite() {
                return bad("tol.grouping", format!("must be positive and finite, got {t}"));
            }
        }
        if !(self.psi_floor < 0.0) {
            return bad("search.floor", format!("must be negative, got {}", self.psi_floor));
        }
        if self.multistarts < 1 {
            return bad("search.multistarts", "must be at least 1".into());
        }
        if self.path_segments < 2 {
            return bad("search.path_segments", "must be at least 2".into());
        }
        if self.linking_samples < 1 {
            return bad("linking.samples", "must be at least 1".into());
        }
        if self.max_inner_iter < 1 || self.max_outer_iter < 1 {
            return bad("solver.max_iter", "iteration budgets must be positive".into());
        }
        if matches!(self.quadrature, QuadratureChoice::Collocation)
            && matches!(self.domain, DomainSpec::Rectangle { .. })
        {
            return bad("quadrature.rule", "collocation is only available in one dimension".into());
        }
        if let QuadratureChoice::Gauss { nodes_per_dim: Some(0) } = self.quadrature {
            return bad("quadrature.nodes", "must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_m_above_k() {
        let cfg = SolverConfig { m: 3, ..SolverConfig::default() };
        let err = cfg.validate().unwrap_err();
        assert!(alloc::format!("{err}").contains("m <= k"));
    }

    #[test]
    fn rejects_negative_tolerance() {
        let cfg = SolverConfig { tol_inner: -1.0, ..SolverConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
