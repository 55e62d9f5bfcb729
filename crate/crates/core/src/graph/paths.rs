use std::collections::VecDeque;

use super::{Cid, NodeId, NodeSet, PathWitness};
use crate::error::Result;

impl Cid {
    /// Shortest, then lexicographically smallest, directed path
    /// `source ⤳ target`, optionally constrained to pass through `via`.
    /// The length-zero path `[x]` is returned for `source == target`.
    pub fn find_directed_path(
        &self,
        source: NodeId,
        target: NodeId,
        via: Option<NodeId>,
    ) -> Result<Option<PathWitness>> {
        self.check([source, target].into_iter().chain(via))?;
        Ok(match via {
            None => self.shortest_directed(source, target),
            Some(v) => {
                let head = self.shortest_directed(source, v);
                let tail = self.shortest_directed(v, target);
                match (head, tail) {
                    (Some(h), Some(t)) => {
                        let mut nodes = h.nodes;
                        nodes.extend_from_slice(&t.nodes[1..]);
                        Some(PathWitness::directed(nodes))
                    }
                    _ => None,
                }
            }
        })
    }

    pub fn has_directed_path(&self, source: NodeId, target: NodeId) -> bool {
        self.descendants_of(&[source]).contains(&target)
    }

    /// Existential reading for sets: some `s ∈ sources` reaches some `t ∈ targets`.
    pub fn has_directed_path_between(&self, sources: &NodeSet, targets: &NodeSet) -> bool {
        let srcs: Vec<_> = sources.iter().copied().collect();
        self.descendants_of(&srcs)
            .iter()
            .any(|n| targets.contains(n))
    }

    fn shortest_directed(&self, source: NodeId, target: NodeId) -> Option<PathWitness> {
        // distance to target along reversed edges
        let mut dist = vec![usize::MAX; self.len()];
        dist[target.0] = 0;
        let mut queue = VecDeque::from([target]);
        while let Some(n) = queue.pop_front() {
            for &p in self.parents(n) {
                if dist[p.0] == usize::MAX {
                    dist[p.0] = dist[n.0] + 1;
                    queue.push_back(p);
                }
            }
        }
        if dist[source.0] == usize::MAX {
            return None;
        }
        let mut nodes = vec![source];
        let mut cur = source;
        while cur != target {
            cur = *self
                .children(cur)
                .iter()
                .find(|c| dist[c.0] != usize::MAX && dist[c.0] + 1 == dist[cur.0])
                .expect("a child one step closer exists");
            nodes.push(cur);
        }
        Some(PathWitness::directed(nodes))
    }

    /// Whether every directed path from `sources` to `targets` contains an
    /// element of `cut`.
    pub fn intercepts(&self, sources: &NodeSet, targets: &NodeSet, cut: &NodeSet) -> Result<bool> {
        self.check(sources.iter().chain(targets).chain(cut).copied())?;
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<NodeId> = sources.iter().copied().filter(|s| !cut.contains(s)).collect();
        for s in &stack {
            seen[s.0] = true;
        }
        while let Some(n) = stack.pop() {
            if targets.contains(&n) {
                return Ok(false);
            }
            for &c in self.children(n) {
                if !seen[c.0] && !cut.contains(&c) {
                    seen[c.0] = true;
                    stack.push(c);
                }
            }
        }
        Ok(true)
    }
}
