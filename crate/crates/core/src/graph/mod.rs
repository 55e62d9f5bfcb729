//! Causal influence diagrams and their purely graphical queries.
//!
//! Nodes are addressed by [`NodeId`], the position of the node in declaration
//! order. All set-valued results are ordered by declaration, and every path
//! query resolves ties by preferring the shortest path and then the
//! lexicographically smallest node sequence.

mod dsep;
mod paths;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

pub use dsep::DSeparation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

pub type NodeSet = BTreeSet<NodeId>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Chance,
    Decision,
    Utility,
}

impl NodeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            NodeKind::Chance => "chance",
            NodeKind::Decision => "decision",
            NodeKind::Utility => "utility",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Parents,
    Children,
    Ancestors,
    Descendants,
    Family,
}

/// Orientation of one step of a path relative to the edge it traverses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    /// `a -> b`
    Forward,
    /// `a <- b`
    Backward,
}

/// A path through the graph, directed or undirected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathWitness {
    pub nodes: Vec<NodeId>,
    /// `steps[i]` relates `nodes[i]` and `nodes[i + 1]`.
    pub steps: Vec<Step>,
}

impl PathWitness {
    pub fn single(node: NodeId) -> Self {
        PathWitness {
            nodes: vec![node],
            steps: Vec::new(),
        }
    }

    pub fn directed(nodes: Vec<NodeId>) -> Self {
        let steps = vec![Step::Forward; nodes.len().saturating_sub(1)];
        PathWitness { nodes, steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn first(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn last(&self) -> NodeId {
        *self.nodes.last().expect("paths have at least one node")
    }

    /// Checks that every step follows an edge of `graph` in the recorded
    /// direction and that no node repeats.
    pub fn is_valid_in(&self, graph: &Cid) -> bool {
        if self.nodes.is_empty() || self.steps.len() + 1 != self.nodes.len() {
            return false;
        }
        let distinct: BTreeSet<_> = self.nodes.iter().collect();
        if distinct.len() != self.nodes.len() {
            return false;
        }
        self.nodes
            .windows(2)
            .zip(&self.steps)
            .all(|(pair, step)| match step {
                Step::Forward => graph.has_edge(pair[0], pair[1]),
                Step::Backward => graph.has_edge(pair[1], pair[0]),
            })
    }

    pub fn render(&self, graph: &Cid) -> String {
        let mut out = graph.name(self.nodes[0]).to_string();
        for (node, step) in self.nodes[1..].iter().zip(&self.steps) {
            out.push_str(match step {
                Step::Forward => " -> ",
                Step::Backward => " <- ",
            });
            out.push_str(graph.name(*node));
        }
        out
    }

    pub fn names(&self, graph: &Cid) -> Vec<String> {
        self.nodes
            .iter()
            .map(|&n| graph.name(n).to_string())
            .collect()
    }
}

/// A structural rule broken by a diagram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    SelfLoop(String),
    Cycle(Vec<String>),
    UtilityHasChild { utility: String, child: String },
    DecisionCount(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop(n) => write!(f, "self-loop on `{n}`"),
            Violation::Cycle(nodes) => write!(f, "cycle detected through {}", nodes.join(", ")),
            Violation::UtilityHasChild { utility, child } => {
                write!(f, "utility node has child: `{utility}` -> `{child}`")
            }
            Violation::DecisionCount(n) => {
                write!(f, "expected exactly one decision node, found {n}")
            }
        }
    }
}

/// A causal influence diagram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cid {
    name: String,
    names: Vec<String>,
    kinds: Vec<NodeKind>,
    edges: Vec<(NodeId, NodeId)>,
    parents: Vec<Vec<NodeId>>,
    children: Vec<Vec<NodeId>>,
    index: HashMap<String, NodeId>,
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Cid {
    pub fn new(name: impl Into<String>) -> Self {
        Cid {
            name: name.into(),
            names: Vec::new(),
            kinds: Vec::new(),
            edges: Vec::new(),
            parents: Vec::new(),
            children: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds a diagram from `(name, kind)` declarations and `(from, to)` edges.
    pub fn from_parts<'a>(
        name: &str,
        nodes: impl IntoIterator<Item = (&'a str, NodeKind)>,
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut cid = Cid::new(name);
        for (n, k) in nodes {
            cid.add_node(n, k)?;
        }
        for (a, b) in edges {
            cid.add_edge_by_name(a, b)?;
        }
        Ok(cid)
    }

    pub fn add_node(&mut self, name: &str, kind: NodeKind) -> Result<NodeId> {
        if !is_identifier(name) {
            return Err(Error::InvalidIdentifier(name.to_string()));
        }
        if self.index.contains_key(name) {
            return Err(Error::DuplicateNode(name.to_string()));
        }
        let id = NodeId(self.names.len());
        self.names.push(name.to_string());
        self.kinds.push(kind);
        self.parents.push(Vec::new());
        self.children.push(Vec::new());
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_edge(&mut self, from: NodeId, to: NodeId) -> Result<()> {
        if from.0 >= self.len() || to.0 >= self.len() {
            return Err(Error::UnknownNode(format!("#{}", from.0.max(to.0))));
        }
        if self.has_edge(from, to) {
            return Err(Error::DuplicateEdge(
                self.name(from).to_string(),
                self.name(to).to_string(),
            ));
        }
        self.edges.push((from, to));
        insert_sorted(&mut self.parents[to.0], from);
        insert_sorted(&mut self.children[from.0], to);
        Ok(())
    }

    pub fn add_edge_by_name(&mut self, from: &str, to: &str) -> Result<()> {
        let (a, b) = (self.node(from)?, self.node(to)?);
        self.add_edge(a, b)
    }

    pub fn graph_name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn node(&self, name: &str) -> Result<NodeId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn nodes(&self, names: &[&str]) -> Result<NodeSet> {
        names.iter().map(|n| self.node(n)).collect()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.0]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[id.0]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).map(NodeId)
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.children[from.0].binary_search(&to).is_ok()
    }

    /// Parents in declaration order.
    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id.0]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id.0]
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<NodeId> {
        self.node_ids().filter(|&n| self.kind(n) == kind).collect()
    }

    pub fn decisions(&self) -> Vec<NodeId> {
        self.nodes_of_kind(NodeKind::Decision)
    }

    /// The first declared decision node.
    pub fn decision(&self) -> Option<NodeId> {
        self.node_ids().find(|&n| self.kind(n) == NodeKind::Decision)
    }

    pub fn utilities(&self) -> Vec<NodeId> {
        self.nodes_of_kind(NodeKind::Utility)
    }

    /// The unique decision of a valid diagram.
    pub fn the_decision(&self) -> Result<NodeId> {
        match self.decisions().as_slice() {
            [d] => Ok(*d),
            other => Err(Error::InvalidGraph(vec![Violation::DecisionCount(
                other.len(),
            )])),
        }
    }

    /// Reports every broken structural rule; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            if a == b {
                out.push(Violation::SelfLoop(self.name(a).to_string()));
            }
        }
        if let Some(cycle) = self.find_cycle() {
            out.push(Violation::Cycle(
                cycle.iter().map(|&n| self.name(n).to_string()).collect(),
            ));
        }
        for &(a, b) in &self.edges {
            if self.kind(a) == NodeKind::Utility {
                out.push(Violation::UtilityHasChild {
                    utility: self.name(a).to_string(),
                    child: self.name(b).to_string(),
                });
            }
        }
        let decisions = self.decisions().len();
        if decisions != 1 {
            out.push(Violation::DecisionCount(decisions));
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(violations))
        }
    }

    fn find_cycle(&self) -> Option<Vec<NodeId>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.len()];
        let mut stack: Vec<NodeId> = Vec::new();
        fn visit(
            g: &Cid,
            n: NodeId,
            state: &mut [u8],
            stack: &mut Vec<NodeId>,
        ) -> Option<Vec<NodeId>> {
            state[n.0] = 1;
            stack.push(n);
            for &c in g.children(n) {
                if state[c.0] == 1 {
                    if c == n {
                        // self-loops are reported separately
                        continue;
                    }
                    let start = stack.iter().position(|&s| s == c).unwrap();
                    return Some(stack[start..].to_vec());
                }
                if state[c.0] == 0 {
                    if let Some(cycle) = visit(g, c, state, stack) {
                        return Some(cycle);
                    }
                }
            }
            stack.pop();
            state[n.0] = 2;
            None
        }
        for n in self.node_ids() {
            if state[n.0] == 0 {
                if let Some(c) = visit(self, n, &mut state, &mut stack) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Topological order preferring the earliest declared node among the
    /// ready ones. `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let mut indegree: Vec<usize> = self
            .parents
            .iter()
            .enumerate()
            .map(|(i, ps)| ps.iter().filter(|p| p.0 != i).count())
            .collect();
        let mut ready: BTreeSet<NodeId> = self
            .node_ids()
            .filter(|n| indegree[n.0] == 0)
            .collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for &c in self.children(n) {
                if c == n {
                    continue;
                }
                indegree[c.0] -= 1;
                if indegree[c.0] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == self.len() && self.edges.iter().all(|(a, b)| a != b)).then_some(order)
    }

    pub fn relatives(&self, node: NodeId, relation: Relation) -> NodeSet {
        match relation {
            Relation::Parents => self.parents(node).iter().copied().collect(),
            Relation::Children => self.children(node).iter().copied().collect(),
            Relation::Ancestors => self.ancestors_of(&[node]),
            Relation::Descendants => self.descendants_of(&[node]),
            Relation::Family => {
                let mut s: NodeSet = self.parents(node).iter().copied().collect();
                s.insert(node);
                s
            }
        }
    }

    /// Reflexive-transitive ancestors of a set.
    pub fn ancestors_of(&self, nodes: &[NodeId]) -> NodeSet {
        self.closure(nodes, |n| self.parents(n))
    }

    /// Reflexive-transitive descendants of a set.
    pub fn descendants_of(&self, nodes: &[NodeId]) -> NodeSet {
        self.closure(nodes, |n| self.children(n))
    }

    fn closure<'a>(&'a self, start: &[NodeId], next: impl Fn(NodeId) -> &'a [NodeId]) -> NodeSet {
        let mut seen: NodeSet = start.iter().copied().collect();
        let mut stack: Vec<NodeId> = start.to_vec();
        while let Some(n) = stack.pop() {
            for &m in next(n) {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        seen
    }

    /// Copy of the graph with an extra edge, used to model a hypothetical
    /// observation.
    pub fn with_edge(&self, from: NodeId, to: NodeId) -> Result<Cid> {
        let mut g = self.clone();
        g.add_edge(from, to)?;
        Ok(g)
    }

    /// Copy of the graph with the listed edges removed.
    pub fn without_edges(&self, removed: &[(NodeId, NodeId)]) -> Cid {
        let mut g = Cid::new(self.name.clone());
        for n in self.node_ids() {
            g.add_node(self.name(n), self.kind(n))
                .expect("names are unique and valid");
        }
        for &(a, b) in &self.edges {
            if !removed.contains(&(a, b)) {
                g.add_edge(a, b).expect("edges are unique");
            }
        }
        g
    }

    /// Copy of the graph with every edge into `targets` removed.
    pub fn without_incoming(&self, targets: &NodeSet) -> Cid {
        let removed: Vec<_> = self
            .edges
            .iter()
            .copied()
            .filter(|(_, b)| targets.contains(b))
            .collect();
        self.without_edges(&removed)
    }

    pub fn render_set(&self, set: &NodeSet) -> String {
        let names: Vec<&str> = set.iter().map(|&n| self.name(n)).collect();
        format!("{{{}}}", names.join(", "))
    }

    pub(crate) fn check(&self, ids: impl IntoIterator<Item = NodeId>) -> Result<()> {
        for id in ids {
            if id.0 >= self.len() {
                return Err(Error::UnknownNode(format!("#{}", id.0)));
            }
        }
        Ok(())
    }
}

fn insert_sorted(v: &mut Vec<NodeId>, id: NodeId) {
    if let Err(pos) = v.binary_search(&id) {
        v.insert(pos, id);
    }
}
