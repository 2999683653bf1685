use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::potential::HypothesisReport;

/// Pipeline stage, used to tag propagated failures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Basis,
    Decomposition,
    Hypotheses,
    Context,
    Linking,
    Minimization,
    SecondPoint,
    Certification,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Basis => "basis",
            Stage::Decomposition => "decomposition",
            Stage::Hypotheses => "hypotheses",
            Stage::Context => "context",
            Stage::Linking => "local_linking",
            Stage::Minimization => "minimize_psi",
            Stage::SecondPoint => "second_point_search",
            Stage::Certification => "certification",
        }
    }
}

#[derive(Clone, Debug)]
pub enum HviError {
    /// Non-positive lengths, too few grid points and similar geometry errors.
    InvalidDomain(&'static str),
    InvalidParameter {
        name: &'static str,
        reason: String,
    },
    TooManyModes {
        requested: usize,
        available: usize,
    },
    Decomposition(String),
    /// Quadrature does not reproduce L²-orthonormality of the active modes.
    QuadratureTooCoarse {
        max_deviation: f64,
    },
    /// The inner functional on the high modes is not strongly convex.
    NotStronglyConvex {
        slope_bound: f64,
        gap: f64,
    },
    InnerNotConverged {
        iterations: usize,
        residual: f64,
    },
    /// Strong-convexity audit of an inner solve came out below the coercivity bound.
    MonotonicityViolated {
        margin: f64,
        required: f64,
    },
    OuterNotConverged {
        iterations: usize,
        residual: f64,
    },
    /// ψ fell below the configured floor; ψ is bounded below under the hypotheses.
    UnboundedDescent {
        psi: f64,
        floor: f64,
    },
    HypothesesFailed(Box<HypothesisReport>),
    /// The second critical point could not be separated from the first one or from zero.
    Distinctness {
        distance_to_first: f64,
        norm: f64,
    },
    LinkingFailed {
        y_witness: f64,
        v_witness: f64,
    },
    CertificationFailed {
        solution: usize,
        max_violation: f64,
        min_norm_subgradient: f64,
    },
    Stage {
        stage: Stage,
        source: Box<HviError>,
    },
}

impl HviError {
    pub fn at(self, stage: Stage) -> HviError {
        match self {
            e @ HviError::Stage { .. } => e,
            e => HviError::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &HviError {
        match self {
            HviError::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            HviError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

impl fmt::Display for HviError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HviError::InvalidDomain(msg) => write!(f, "invalid domain: {msg}"),
            HviError::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            HviError::TooManyModes {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} modes but the grid resolves only {available}"
            ),
            HviError::Decomposition(msg) => write!(f, "decomposition: {msg}"),
            HviError::QuadratureTooCoarse { max_deviation } => write!(
                f,
                "quadrature misses L2-orthonormality of the active modes by {max_deviation:e}"
            ),
            HviError::NotStronglyConvex { slope_bound, gap } => write!(
                f,
                "inner problem not strongly convex: slope bound {slope_bound} vs spectral gap {gap}"
            ),
            HviError::InnerNotConverged {
                iterations,
                residual,
            } => write!(
                f,
                "inner solver stopped after {iterations} iterations with residual {residual:e}"
            ),
            HviError::MonotonicityViolated { margin, required } => write!(
                f,
                "strong monotonicity audit failed: margin {margin} < required {required}"
            ),
            HviError::OuterNotConverged {
                iterations,
                residual,
            } => write!(
                f,
                "outer search stopped after {iterations} iterations with residual {residual:e}"
            ),
            HviError::UnboundedDescent { psi, floor } => {
                write!(f, "psi reached {psi} below the floor {floor}")
            }
            HviError::HypothesesFailed(report) => match report.first_failure() {
                Some(check) => write!(f, "hypothesis {} failed", check.id.label()),
                None => write!(f, "hypotheses not verified"),
            },
            HviError::Distinctness {
                distance_to_first,
                norm,
            } => write!(
                f,
                "second point not distinct: distance to first {distance_to_first:e}, norm {norm:e}"
            ),
            HviError::LinkingFailed {
                y_witness,
                v_witness,
            } => write!(
                f,
                "local linking violated at every tested radius (Y min {y_witness:e}, V max {v_witness:e})"
            ),
            HviError::CertificationFailed {
                solution,
                max_violation,
                min_norm_subgradient,
            } => write!(
                f,
                "solution {solution} failed certification: violation {max_violation:e}, min-norm subgradient {min_norm_subgradient:e}"
            ),
            HviError::Stage { stage, source } => write!(f, "{}: {source}", stage.name()),
        }
    }
}

impl core::error::Error for HviError {}
