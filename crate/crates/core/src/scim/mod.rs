//! Structural causal influence models with exact, table-driven semantics.
//!
//! Every non-decision node carries an extensional table mapping
//! `(parent values, exogenous value)` to a value of the node. The decision
//! node has no table; a [`Policy`](crate::policy::Policy) supplies it.

pub(crate) mod engine;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::{Cid, NodeId, NodeKind, Violation};
use crate::scalar::{Rational, Scalar};

pub use engine::{Engine, ExoSetting};

/// Partial or total assignment of value indices to nodes.
pub type Assignment = BTreeMap<NodeId, u32>;

/// Finite domain of a node, optionally with a numeric reading of each value.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain<T> {
    pub values: Vec<String>,
    pub numeric: Option<Vec<T>>,
}

impl<T> Domain<T> {
    pub fn symbolic<S: Into<String>>(values: impl IntoIterator<Item = S>) -> Self {
        Domain {
            values: values.into_iter().map(Into::into).collect(),
            numeric: None,
        }
    }

    pub fn with_numeric(mut self, numeric: Vec<T>) -> Self {
        self.numeric = Some(numeric);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, value: &str) -> Option<u32> {
        self.values.iter().position(|v| v == value).map(|i| i as u32)
    }
}

/// Distribution of one node's exogenous variable.
#[derive(Clone, Debug, PartialEq)]
pub struct ExoDistribution<T> {
    pub values: Vec<String>,
    pub probs: Vec<T>,
}

impl<T: Scalar> ExoDistribution<T> {
    pub fn uniform(n: usize) -> Self {
        let p = T::from_rational(&crate::scalar::ratio(1, n as i64));
        ExoDistribution {
            values: (0..n).map(|i| format!("e{i}")).collect(),
            probs: vec![p; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, value: &str) -> Option<u32> {
        self.values.iter().position(|v| v == value).map(|i| i as u32)
    }
}

/// Extensional structural function. Row `r` encodes parent values in mixed
/// radix (first parent most significant) followed by the exogenous value:
/// `r = parent_index * exo_len + exo`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructFn {
    pub rows: Vec<Option<u32>>,
}

impl StructFn {
    /// Tabulates `f(parent_values, exo)` over the full input space.
    pub fn tabulate(radices: &[usize], exo_len: usize, mut f: impl FnMut(&[u32], u32) -> u32) -> Self {
        let combos: usize = radices.iter().product();
        let mut rows = Vec::with_capacity(combos * exo_len);
        let mut vals = vec![0u32; radices.len()];
        for combo in 0..combos {
            decode_mixed(combo, radices, &mut vals);
            for e in 0..exo_len {
                rows.push(Some(f(&vals, e as u32)));
            }
        }
        StructFn { rows }
    }

    pub fn constant(len: usize, value: u32) -> Self {
        StructFn {
            rows: vec![Some(value); len],
        }
    }
}

/// Writes the mixed-radix digits of `index` into `out` (first digit most
/// significant).
pub fn decode_mixed(mut index: usize, radices: &[usize], out: &mut [u32]) {
    for (slot, &r) in out.iter_mut().zip(radices).rev() {
        *slot = (index % r) as u32;
        index /= r;
    }
}

pub(crate) fn encode_mixed(digits: impl IntoIterator<Item = u32>, radices: &[usize]) -> usize {
    digits
        .into_iter()
        .zip(radices)
        .fold(0, |acc, (d, &r)| acc * r + d as usize)
}

/// Hard and soft interventions applied together.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Intervention {
    pub hard: Vec<(NodeId, u32)>,
    /// Replacement tables indexed by parent values only (no exogenous input).
    pub soft: Vec<(NodeId, Vec<u32>)>,
}

impl Intervention {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn hard(assignments: impl IntoIterator<Item = (NodeId, u32)>) -> Self {
        Intervention {
            hard: assignments.into_iter().collect(),
            soft: Vec::new(),
        }
    }

    pub fn soft(node: NodeId, table: Vec<u32>) -> Self {
        Intervention {
            hard: Vec::new(),
            soft: vec![(node, table)],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty() && self.soft.is_empty()
    }

    pub fn and_hard(mut self, node: NodeId, value: u32) -> Self {
        self.hard.push((node, value));
        self
    }
}

/// A broken model invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelViolation {
    Graph(Violation),
    EmptyDomain(String),
    DuplicateValue { node: String, value: String },
    MissingNumeric(String),
    EmptyExogenous(String),
    NegativeProbability(String),
    NotNormalized { node: String, sum: String },
    MissingFunction(String),
    DecisionHasFunction(String),
    TableShape { node: String, expected: usize, found: usize },
    PartialFunction { node: String, missing: usize },
    OutputOutsideDomain { node: String, value: u32 },
    ShapeMismatch(String),
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ModelViolation::*;
        match self {
            Graph(v) => write!(f, "{v}"),
            EmptyDomain(n) => write!(f, "empty domain for `{n}`"),
            DuplicateValue { node, value } => {
                write!(f, "duplicate value `{value}` in domain of `{node}`")
            }
            MissingNumeric(n) => write!(f, "utility `{n}` lacks numeric values"),
            EmptyExogenous(n) => write!(f, "empty exogenous domain for `{n}`"),
            NegativeProbability(n) => write!(f, "negative probability for `{n}`"),
            NotNormalized { node, sum } => {
                write!(f, "distribution not normalized for `{node}` (sums to {sum})")
            }
            MissingFunction(n) => write!(f, "missing structural function for `{n}`"),
            DecisionHasFunction(n) => write!(f, "decision `{n}` must not have a structural function"),
            TableShape { node, expected, found } => write!(
                f,
                "table for `{node}` has {found} rows, expected {expected}"
            ),
            PartialFunction { node, missing } => {
                write!(f, "partial structural function for `{node}` ({missing} rows missing)")
            }
            OutputOutsideDomain { node, value } => {
                write!(f, "output {value} outside domain of `{node}`")
            }
            ShapeMismatch(m) => write!(f, "{m}"),
        }
    }
}

/// A single-decision structural causal influence model over scalar `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scim<T> {
    graph: Cid,
    domains: Vec<Domain<T>>,
    exo: Vec<ExoDistribution<T>>,
    fns: Vec<Option<StructFn>>,
}

impl<T: Scalar> Scim<T> {
    /// Assembles a model without checking it; see [`Scim::validate`].
    pub fn from_parts(
        graph: Cid,
        domains: Vec<Domain<T>>,
        exo: Vec<ExoDistribution<T>>,
        fns: Vec<Option<StructFn>>,
    ) -> Self {
        Scim {
            graph,
            domains,
            exo,
            fns,
        }
    }

    /// Assembles and validates.
    pub fn new(
        graph: Cid,
        domains: Vec<Domain<T>>,
        exo: Vec<ExoDistribution<T>>,
        fns: Vec<Option<StructFn>>,
    ) -> Result<Self> {
        let m = Self::from_parts(graph, domains, exo, fns);
        m.ensure_valid()?;
        Ok(m)
    }

    /// Promotes a bare diagram with binary `{v0, v1}` domains and uniform
    /// binary noise: a chance node is `v1` iff some parent is `v1` and its
    /// noise is `e1` (roots copy their noise); a utility that sees the
    /// decision pays 1 when the decision matches the disjunction of its
    /// other parents, other utilities pay that disjunction. The decision's
    /// noise has a single value.
    pub fn promote(graph: Cid) -> Result<Self> {
        graph.ensure_valid()?;
        let n = graph.len();
        let d = graph.the_decision()?;
        let one = T::one();
        let zero = T::zero();
        let domains: Vec<Domain<T>> = graph
            .node_ids()
            .map(|id| {
                let dom = Domain::symbolic(["v0", "v1"]);
                if graph.kind(id) == NodeKind::Utility {
                    dom.with_numeric(vec![zero.clone(), one.clone()])
                } else {
                    dom
                }
            })
            .collect();
        let exo: Vec<ExoDistribution<T>> = graph
            .node_ids()
            .map(|id| ExoDistribution::uniform(if id == d { 1 } else { 2 }))
            .collect();
        let fns = (0..n)
            .map(|i| {
                let id = NodeId(i);
                let parents = graph.parents(id);
                let radices = vec![2; parents.len()];
                match graph.kind(id) {
                    NodeKind::Decision => None,
                    NodeKind::Chance => Some(StructFn::tabulate(&radices, 2, |pa, e| {
                        if pa.is_empty() {
                            e
                        } else {
                            u32::from(pa.contains(&1) && e == 1)
                        }
                    })),
                    NodeKind::Utility => {
                        let dpos = parents.iter().position(|&p| p == d);
                        Some(StructFn::tabulate(&radices, 2, |pa, _| {
                            let others = pa
                                .iter()
                                .enumerate()
                                .any(|(i, &v)| Some(i) != dpos && v == 1);
                            match dpos {
                                Some(k) => u32::from((pa[k] == 1) == others),
                                None => u32::from(others),
                            }
                        }))
                    }
                }
            })
            .collect();
        Self::new(graph, domains, exo, fns)
    }

    pub fn graph(&self) -> &Cid {
        &self.graph
    }

    pub fn domain(&self, node: NodeId) -> &Domain<T> {
        &self.domains[node.0]
    }

    pub fn domains(&self) -> &[Domain<T>] {
        &self.domains
    }

    pub fn exo(&self, node: NodeId) -> &ExoDistribution<T> {
        &self.exo[node.0]
    }

    pub fn exos(&self) -> &[ExoDistribution<T>] {
        &self.exo
    }

    pub fn function(&self, node: NodeId) -> Option<&StructFn> {
        self.fns[node.0].as_ref()
    }

    pub fn functions(&self) -> &[Option<StructFn>] {
        &self.fns
    }

    pub fn decision(&self) -> NodeId {
        self.graph
            .decision()
            .expect("a validated model has a decision")
    }

    pub fn value_name(&self, node: NodeId, value: u32) -> &str {
        &self.domains[node.0].values[value as usize]
    }

    pub fn value_index(&self, node: NodeId, value: &str) -> Result<u32> {
        self.domains[node.0].index_of(value).ok_or_else(|| {
            Error::DomainMismatch(format!(
                "`{value}` is not in the domain of `{}`",
                self.graph.name(node)
            ))
        })
    }

    /// Domain sizes of `node`'s parents in graph parent order.
    pub fn parent_radices(&self, node: NodeId) -> Vec<usize> {
        self.graph
            .parents(node)
            .iter()
            .map(|p| self.domains[p.0].len())
            .collect()
    }

    /// Numeric value of a utility node's value.
    pub fn utility_value(&self, node: NodeId, value: u32) -> &T {
        &self.domains[node.0]
            .numeric
            .as_ref()
            .expect("utility domains are numeric")[value as usize]
    }

    /// Checks every model invariant and graph compatibility.
    pub fn validate(&self) -> Vec<ModelViolation> {
        use ModelViolation::*;
        let g = &self.graph;
        let mut out: Vec<ModelViolation> = g.validate().into_iter().map(Graph).collect();
        if self.domains.len() != g.len() || self.exo.len() != g.len() || self.fns.len() != g.len() {
            out.push(ShapeMismatch(format!(
                "expected {} domains, exogenous distributions and functions",
                g.len()
            )));
            return out;
        }
        for id in g.node_ids() {
            let name = g.name(id).to_string();
            let dom = &self.domains[id.0];
            if dom.is_empty() {
                out.push(EmptyDomain(name.clone()));
            }
            for (i, v) in dom.values.iter().enumerate() {
                if dom.values[..i].contains(v) {
                    out.push(DuplicateValue {
                        node: name.clone(),
                        value: v.clone(),
                    });
                }
            }
            match (&dom.numeric, g.kind(id)) {
                (Some(nums), _) if nums.len() != dom.len() => out.push(ShapeMismatch(format!(
                    "numeric values of `{name}` do not match its domain"
                ))),
                (None, NodeKind::Utility) => out.push(MissingNumeric(name.clone())),
                _ => {}
            }
            let exo = &self.exo[id.0];
            if exo.is_empty() {
                out.push(EmptyExogenous(name.clone()));
            }
            if exo.probs.len() != exo.values.len() {
                out.push(ShapeMismatch(format!(
                    "exogenous probabilities of `{name}` do not match its values"
                )));
            }
            for (i, v) in exo.values.iter().enumerate() {
                if exo.values[..i].contains(v) {
                    out.push(DuplicateValue {
                        node: format!("exo {name}"),
                        value: v.clone(),
                    });
                }
            }
            if exo.probs.iter().any(Scalar::is_negative_value) {
                out.push(NegativeProbability(name.clone()));
            }
            let sum = exo.probs.iter().fold(T::zero(), |a, p| a + p.clone());
            if !sum.is_unit_mass() {
                out.push(NotNormalized {
                    node: name.clone(),
                    sum: sum.render(),
                });
            }
        }
        for id in g.node_ids() {
            let name = g.name(id).to_string();
            match (g.kind(id), &self.fns[id.0]) {
                (NodeKind::Decision, Some(_)) => out.push(DecisionHasFunction(name)),
                (NodeKind::Decision, None) => {}
                (_, None) => out.push(MissingFunction(name)),
                (_, Some(f)) => {
                    let expected = self.parent_radices(id).iter().product::<usize>()
                        * self.exo[id.0].len();
                    if f.rows.len() != expected {
                        out.push(TableShape {
                            node: name,
                            expected,
                            found: f.rows.len(),
                        });
                        continue;
                    }
                    let missing = f.rows.iter().filter(|r| r.is_none()).count();
                    if missing > 0 {
                        out.push(PartialFunction {
                            node: name.clone(),
                            missing,
                        });
                    }
                    let size = self.domains[id.0].len() as u32;
                    if let Some(bad) = f.rows.iter().flatten().find(|&&v| v >= size) {
                        out.push(OutputOutsideDomain {
                            node: name,
                            value: *bad,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    /// The same model with an extra edge `x -> D`: the decision may now
    /// observe `x`. No table changes because the decision has none.
    pub fn with_observation(&self, x: NodeId) -> Result<Self> {
        let d = self.decision();
        if self.graph.has_edge(x, d) {
            return Ok(self.clone());
        }
        let graph = self.graph.with_edge(x, d)?;
        graph.ensure_valid()?;
        Ok(Scim {
            graph,
            ..self.clone()
        })
    }

    /// Converts probabilities and utilities to another scalar type.
    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Scim<U> {
        Scim {
            graph: self.graph.clone(),
            domains: self
                .domains
                .iter()
                .map(|d| Domain {
                    values: d.values.clone(),
                    numeric: d.numeric.as_ref().map(|n| n.iter().map(&f).collect()),
                })
                .collect(),
            exo: self
                .exo
                .iter()
                .map(|e| ExoDistribution {
                    values: e.values.clone(),
                    probs: e.probs.iter().map(&f).collect(),
                })
                .collect(),
            fns: self.fns.clone(),
        }
    }

    pub fn engine(&self) -> Engine<'_, T> {
        Engine::new(self)
    }

    pub fn render_assignment(&self, a: &Assignment) -> String {
        let parts: Vec<String> = a
            .iter()
            .map(|(&n, &v)| format!("{}={}", self.graph.name(n), self.value_name(n, v)))
            .collect();
        parts.join(", ")
    }
}

impl Scim<Rational> {
    pub fn to_f64(&self) -> Scim<f64> {
        self.map_scalar(f64::from_rational)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::graph::NodeKind::*;
    use crate::scalar::ratio;

    /// `D -> X -> U` with `X` copying `D` and `U` copying `X`, binary.
    pub fn chain_copy() -> Scim<Rational> {
        let g = Cid::from_parts(
            "chain",
            [("D", Decision), ("X", Chance), ("U", Utility)],
            [("D", "X"), ("X", "U")],
        )
        .unwrap();
        let dom = || Domain::symbolic(["v0", "v1"]);
        Scim::new(
            g,
            vec![
                dom(),
                dom(),
                dom().with_numeric(vec![ratio(0, 1), ratio(1, 1)]),
            ],
            vec![ExoDistribution::uniform(1); 3],
            vec![
                None,
                Some(StructFn::tabulate(&[2], 1, |pa, _| pa[0])),
                Some(StructFn::tabulate(&[2], 1, |pa, _| pa[0])),
            ],
        )
        .unwrap()
    }

    /// `C -> D -> U`, `C -> U`: C is a uniform coin, U pays 1 when D matches C.
    pub fn matching() -> Scim<Rational> {
        let g = Cid::from_parts(
            "matching",
            [("C", Chance), ("D", Decision), ("U", Utility)],
            [("C", "D"), ("D", "U"), ("C", "U")],
        )
        .unwrap();
        let dom = || Domain::symbolic(["v0", "v1"]);
        Scim::new(
            g,
            vec![
                dom(),
                dom(),
                dom().with_numeric(vec![ratio(0, 1), ratio(1, 1)]),
            ],
            vec![
                ExoDistribution::uniform(2),
                ExoDistribution::uniform(1),
                ExoDistribution::uniform(1),
            ],
            vec![
                Some(StructFn::tabulate(&[], 2, |_, e| e)),
                None,
                Some(StructFn::tabulate(&[2, 2], 1, |pa, _| u32::from(pa[0] == pa[1]))),
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn fixtures_validate() {
        assert!(chain_copy().validate().is_empty());
        assert!(matching().validate().is_empty());
    }

    #[test]
    fn missing_row_is_partial() {
        let m = chain_copy();
        let mut fns = m.functions().to_vec();
        fns[1].as_mut().unwrap().rows[0] = None;
        let bad = Scim::from_parts(m.graph().clone(), m.domains().to_vec(), m.exos().to_vec(), fns);
        let v = bad.validate();
        assert!(v.iter().any(|v| v.to_string().contains("partial structural function")));
    }

    #[test]
    fn unnormalized_distribution() {
        let m = chain_copy();
        let mut exo = m.exos().to_vec();
        exo[1] = ExoDistribution {
            values: vec!["a".into(), "b".into()],
            probs: vec![ratio(1, 2), ratio(2, 5)],
        };
        let mut fns = m.functions().to_vec();
        fns[1] = Some(StructFn::tabulate(&[2], 2, |pa, _| pa[0]));
        let bad = Scim::from_parts(m.graph().clone(), m.domains().to_vec(), exo, fns);
        let v = bad.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("distribution not normalized"));
        assert!(v[0].to_string().contains("9/10"));
    }

    #[test]
    fn output_outside_domain_and_decision_fn() {
        let m = chain_copy();
        let mut fns = m.functions().to_vec();
        fns[0] = Some(StructFn::constant(1, 0));
        fns[2].as_mut().unwrap().rows[1] = Some(5);
        let bad = Scim::from_parts(m.graph().clone(), m.domains().to_vec(), m.exos().to_vec(), fns);
        let v = bad.validate();
        assert!(v.contains(&ModelViolation::DecisionHasFunction("D".into())));
        assert!(v.contains(&ModelViolation::OutputOutsideDomain {
            node: "U".into(),
            value: 5
        }));
    }

    #[test]
    fn promote_lecture() {
        let m: Scim<Rational> = Scim::promote(crate::graph::fixtures::lecture()).unwrap();
        assert!(m.validate().is_empty());
        let f64_model = m.to_f64();
        assert!(f64_model.validate().is_empty());
    }

    #[test]
    fn mixed_radix_round_trip() {
        let radices = [3, 2, 4];
        let mut digits = [0u32; 3];
        for i in 0..24 {
            decode_mixed(i, &radices, &mut digits);
            assert_eq!(encode_mixed(digits, &radices), i);
        }
        decode_mixed(5, &radices, &mut digits);
        assert_eq!(digits, [0, 1, 1]);
    }
}
