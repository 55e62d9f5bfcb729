use super::{Cid, NodeId, NodeKind, NodeSet, PathWitness, Step};
use crate::error::{Error, Result};

/// Outcome of a d-separation query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DSeparation {
    pub separated: bool,
    /// One active path when the sets are d-connected.
    pub active_path: Option<PathWitness>,
}

impl Cid {
    /// Nodes reachable from `sources` along a path that is active given `zs`
    /// (Bayes-ball traversal over `(node, direction)` states).
    fn active_reachable(&self, sources: &NodeSet, zs: &NodeSet) -> Vec<bool> {
        let z_vec: Vec<_> = zs.iter().copied().collect();
        let anc_z = self.ancestors_of(&z_vec);
        // index 0: arrived from a child (moving up), 1: from a parent (moving down)
        let mut visited = vec![[false; 2]; self.len()];
        let mut reachable = vec![false; self.len()];
        let mut stack: Vec<(NodeId, usize)> = sources.iter().map(|&s| (s, 0)).collect();
        while let Some((n, dir)) = stack.pop() {
            if visited[n.0][dir] {
                continue;
            }
            visited[n.0][dir] = true;
            let in_z = zs.contains(&n);
            if !in_z {
                reachable[n.0] = true;
            }
            if dir == 0 {
                if !in_z {
                    stack.extend(self.parents(n).iter().map(|&p| (p, 0)));
                    stack.extend(self.children(n).iter().map(|&c| (c, 1)));
                }
            } else {
                if !in_z {
                    stack.extend(self.children(n).iter().map(|&c| (c, 1)));
                }
                if anc_z.contains(&n) {
                    stack.extend(self.parents(n).iter().map(|&p| (p, 0)));
                }
            }
        }
        reachable
    }

    /// Whether `zs` d-separates `xs` from `ys`. When they are d-connected
    /// the shortest, then lexicographically smallest, active path is
    /// attached.
    pub fn d_separated(&self, xs: &NodeSet, ys: &NodeSet, zs: &NodeSet) -> Result<DSeparation> {
        self.check(xs.iter().chain(ys).chain(zs).copied())?;
        if !xs.is_disjoint(ys) || !xs.is_disjoint(zs) || !ys.is_disjoint(zs) {
            return Err(Error::NotDisjoint);
        }
        if !self.is_d_connected(xs, ys, zs) {
            return Ok(DSeparation {
                separated: true,
                active_path: None,
            });
        }
        let active_path = self.best_active_path(xs, ys, zs);
        debug_assert!(active_path.is_some());
        Ok(DSeparation {
            separated: false,
            active_path,
        })
    }

    /// Boolean d-connection test without path extraction. Sets need not be
    /// disjoint-checked by callers that already guarantee it.
    pub fn is_d_connected(&self, xs: &NodeSet, ys: &NodeSet, zs: &NodeSet) -> bool {
        let reach = self.active_reachable(xs, zs);
        ys.iter().any(|y| reach[y.0])
    }

    /// One simple path from `x` to `y` that is active given `zs`, chosen as
    /// the shortest and then lexicographically smallest.
    pub fn find_active_path(&self, x: NodeId, y: NodeId, zs: &NodeSet) -> Result<Option<PathWitness>> {
        self.check([x, y].into_iter().chain(zs.iter().copied()))?;
        if zs.contains(&x) || zs.contains(&y) {
            return Err(Error::NotDisjoint);
        }
        let xs = NodeSet::from([x]);
        let ys = NodeSet::from([y]);
        if x == y {
            return Ok(Some(PathWitness::single(x)));
        }
        if !self.is_d_connected(&xs, &ys, zs) {
            return Ok(None);
        }
        Ok(self.best_active_path(&xs, &ys, zs))
    }

    fn best_active_path(&self, xs: &NodeSet, ys: &NodeSet, zs: &NodeSet) -> Option<PathWitness> {
        let z_vec: Vec<_> = zs.iter().copied().collect();
        let anc_z = self.ancestors_of(&z_vec);
        let ctx = Search {
            graph: self,
            zs,
            anc_z: &anc_z,
            ys,
        };
        for depth in 0..self.len() {
            for &x in xs {
                let mut nodes = vec![x];
                let mut steps = Vec::new();
                let mut on_path = vec![false; self.len()];
                on_path[x.0] = true;
                if ctx.dfs(&mut nodes, &mut steps, &mut on_path, depth) {
                    return Some(PathWitness { nodes, steps });
                }
            }
        }
        None
    }

    /// The graph with each information edge `W -> D` removed when `W` has no
    /// observation incentive.
    pub fn reduced_graph(&self) -> Result<Cid> {
        self.ensure_valid()?;
        let d = self.the_decision()?;
        let removed: Vec<_> = self
            .parents(d)
            .iter()
            .filter(|&&w| !self.observation_connected(w))
            .map(|&w| (w, d))
            .collect();
        Ok(self.without_edges(&removed))
    }

    /// Utility nodes that descend from the decision.
    pub fn decision_utilities(&self) -> Result<NodeSet> {
        let d = self.the_decision()?;
        Ok(self
            .descendants_of(&[d])
            .into_iter()
            .filter(|&n| self.kind(n) == NodeKind::Utility)
            .collect())
    }

    /// Conditioning set for observation queries: the decision's family
    /// without `x`.
    pub(crate) fn family_without(&self, x: NodeId) -> NodeSet {
        let d = self.decision().expect("validated graph has a decision");
        let mut fam: NodeSet = self.parents(d).iter().copied().collect();
        fam.insert(d);
        fam.remove(&x);
        fam
    }

    /// `x` is d-connected to some utility descendant of the decision given
    /// `Fa_D \ {x}`.
    pub(crate) fn observation_connected(&self, x: NodeId) -> bool {
        let Ok(utils) = self.decision_utilities() else {
            return false;
        };
        let zs = self.family_without(x);
        self.is_d_connected(&NodeSet::from([x]), &utils, &zs)
    }
}

struct Search<'a> {
    graph: &'a Cid,
    zs: &'a NodeSet,
    anc_z: &'a NodeSet,
    ys: &'a NodeSet,
}

impl Search<'_> {
    /// Whether the interior node `mid` lets the path pass, given the steps
    /// entering and leaving it.
    fn passes(&self, mid: NodeId, into: Step, out: Step) -> bool {
        let collider = into == Step::Forward && out == Step::Backward;
        if collider {
            self.anc_z.contains(&mid)
        } else {
            !self.zs.contains(&mid)
        }
    }

    fn dfs(&self, nodes: &mut Vec<NodeId>, steps: &mut Vec<Step>, on_path: &mut [bool], remaining: usize) -> bool {
        let cur = *nodes.last().unwrap();
        if remaining == 0 {
            return self.ys.contains(&cur);
        }
        if self.ys.contains(&cur) {
            // paths stop at the first target reached
            return false;
        }
        let g = self.graph;
        let mut next: Vec<(NodeId, Step)> = g
            .children(cur)
            .iter()
            .map(|&c| (c, Step::Forward))
            .chain(g.parents(cur).iter().map(|&p| (p, Step::Backward)))
            .collect();
        next.sort_by_key(|(n, _)| *n);
        for (n, step) in next {
            if on_path[n.0] {
                continue;
            }
            if let Some(&prev) = steps.last() {
                if !self.passes(cur, prev, step) {
                    continue;
                }
            }
            nodes.push(n);
            steps.push(step);
            on_path[n.0] = true;
            if self.dfs(nodes, steps, on_path, remaining - 1) {
                return true;
            }
            on_path[n.0] = false;
            nodes.pop();
            steps.pop();
        }
        false
    }
}
