//! Positive perturbations of positive semigroups on discretized Banach lattices.
//!
//! A perturbation `A + BC` is built from a semigroup model, a regularized
//! control operator and an observation, through the variation-of-parameters
//! fixed point, and checked against closed-loop exponentials and resolvents.

pub mod boundary;
pub mod catalog;
pub mod error;
pub mod interpolation;
pub mod lattice;
pub mod operator;
pub mod perturbation;
pub mod probes;
pub mod quadrature;
pub mod semigroup;
pub mod system;
pub mod triple;

pub use error::{Error, Result};
pub use lattice::{GridSpace, LatticeVector, NormKind};
pub use operator::{LinOp, SpectralMethod};
pub use perturbation::{
    construct_dominated, construct_perturbed, construct_perturbed_at, resolvent_factorization, vp_residual,
    DominatingSplit, HypothesisReport, PerturbedSemigroup, TheoremKind, TimeGrid,
};
pub use semigroup::{expm, ModelKind, RegularizedControl, SemigroupModel};
pub use system::{StepFunction, TimeGridFn, TimeNorm, TimeRule};
pub use triple::{TripleSpec, ZRule};
