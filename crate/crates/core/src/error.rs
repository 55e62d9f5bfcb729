use num_bigint::BigUint;
use thiserror::Error;

use crate::graph::Violation;
use crate::scim::ModelViolation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("node sets are not pairwise disjoint")]
    NotDisjoint,
    #[error("invalid graph: {}", join(.0))]
    InvalidGraph(Vec<Violation>),
    #[error("invalid model: {}", join(.0))]
    InvalidModel(Vec<ModelViolation>),
    #[error("`{0}` is the decision node")]
    DecisionNode(String),
    #[error("`{0}` is not observed by the decision")]
    NotObserved(String),
    #[error("`{0}` is a descendant of the decision")]
    DescendantOfDecision(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("cap exceeded: {count}")]
    CapExceeded { count: BigUint, cap: usize },
    #[error("conditioning event has zero probability")]
    ZeroProbability,
    #[error("{kind} criterion not satisfied for `{node}`")]
    CriterionNotSatisfied { node: String, kind: String },
    #[error("witness plan failed: {0}")]
    PlanFailure(String),
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
