//! Exact incentive analysis for single-decision causal influence diagrams.

pub mod criteria;
pub mod dsl;
pub mod error;
pub mod export;
pub mod fairness;
pub mod graph;
pub mod policy;
pub mod random;
pub mod scalar;
pub mod scim;
pub mod semantics;
pub mod witness;

pub use error::{Error, Result};
pub use graph::{Cid, NodeId, NodeKind, NodeSet, PathWitness, Relation, Step};
pub use scalar::{Rational, Scalar};
pub use criteria::IncentiveKind;
pub use policy::Policy;

/// Models with exact rational probabilities and utilities.
pub type ExactScim = scim::Scim<Rational>;
pub type ExactQTable = policy::QTable<Rational>;
pub type ExactVerdict = semantics::SemanticVerdict<Rational>;

/// Double precision variants for quick approximate sweeps.
pub type FloatScim = scim::Scim<f64>;
pub type FloatQTable = policy::QTable<f64>;

pub type SingleScim = scim::Scim<f32>;
