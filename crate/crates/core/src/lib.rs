//! Spectral-Galerkin solver for resonant semilinear elliptic inclusions
//!
//! ```text
//! -Δx - λ_k x ∈ ∂j(x)  in Z,    x = 0 on ∂Z
//! ```
//!
//! with a locally Lipschitz, piecewise polynomial potential `j`. High modes are
//! eliminated by a strongly convex inner minimization (the reduction map), and
//! critical points of the reduced functional on the low modes are located by
//! nonsmooth descent. Every reported solution carries a pointwise certificate
//! against the Clarke subdifferential of `j`.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
// Negated comparisons are how NaN parameters get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `num_traits::Float` supplies libm-backed methods. Modules import it with
// `allow(unused_imports)` because std's inherent ones take over whenever std
// is linked somewhere in the build.

extern crate alloc;

pub mod config;
pub mod energy;
mod error;
mod linalg;
pub mod multiplicity;
pub mod potential;
pub mod reduction;
pub mod spectral;

pub use config::{PotentialSpec, QuadratureChoice, SolverConfig};
pub use energy::{EnergyContext, ResidualReport};
pub use error::{HviError, Stage};
pub use multiplicity::{solve_hvi, CriticalPoint, CriticalKind, Pipeline, SolutionSet};
pub use potential::{HypothesisReport, PiecewisePotential, SubgradientInterval};
pub use reduction::{InnerOptions, ReducedEval, ReductionResult};
pub use spectral::{DomainSpec, EigenBasis, Quadrature, QuadratureRule, SpaceDecomposition, SpectralVector};
