//! Seeded generators for property tests and the `generate` command.

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Cid, NodeId, NodeKind};
use crate::scalar::{ratio, Rational};
use crate::scim::{Domain, ExoDistribution, Scim, StructFn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Size limits for [`random_scim`].
#[derive(Clone, Copy, Debug)]
pub struct ScimShape {
    pub max_domain: usize,
    pub max_exo: usize,
    pub max_decision_exo: usize,
    pub max_denominator: u32,
}

impl Default for ScimShape {
    fn default() -> Self {
        ScimShape {
            max_domain: 3,
            max_exo: 3,
            max_decision_exo: 2,
            max_denominator: 8,
        }
    }
}

/// DAG of chance nodes `V0..` in topological order, each forward edge
/// present with probability `density`.
pub fn random_dag<R: Rng>(rng: &mut R, nodes: usize, density: f64) -> Cid {
    let mut g = Cid::new("random");
    for i in 0..nodes {
        g.add_node(&format!("V{i}"), NodeKind::Chance).expect("fresh name");
    }
    for j in 0..nodes {
        for i in 0..j {
            if rng.gen_bool(density) {
                g.add_edge(NodeId(i), NodeId(j)).expect("fresh edge");
            }
        }
    }
    g
}

/// Valid single-decision diagram with between 3 and `max_nodes` nodes.
/// Chance nodes are `C<i>`, utilities `U<i>`, the decision is `D`.
pub fn random_cid<R: Rng>(rng: &mut R, max_nodes: usize) -> Cid {
    let n = rng.gen_range(3..=max_nodes.max(3));
    let d = rng.gen_range(0..n - 1);
    let mut rest: Vec<usize> = (0..n).filter(|&i| i != d).collect();
    rest.shuffle(rng);
    let n_util = rng.gen_range(1..=rest.len().min(2));
    let mut kinds = vec![NodeKind::Chance; n];
    kinds[d] = NodeKind::Decision;
    for &u in &rest[..n_util] {
        kinds[u] = NodeKind::Utility;
    }
    let mut g = Cid::new("random");
    for (i, &k) in kinds.iter().enumerate() {
        let name = match k {
            NodeKind::Chance => format!("C{i}"),
            NodeKind::Decision => "D".to_string(),
            NodeKind::Utility => format!("U{i}"),
        };
        g.add_node(&name, k).expect("fresh name");
    }
    for j in 0..n {
        for i in 0..j {
            if kinds[i] != NodeKind::Utility && rng.gen_bool(0.45) {
                g.add_edge(NodeId(i), NodeId(j)).expect("fresh edge");
            }
        }
    }
    g
}

/// Distribution over `k` outcomes with a common denominator at most
/// `max_den`. Some outcomes may get probability zero.
pub fn random_distribution<R: Rng>(rng: &mut R, k: usize, max_den: u32) -> Vec<Rational> {
    let den = rng.gen_range(1..=max_den.max(1));
    let mut counts = vec![0i64; k];
    for _ in 0..den {
        counts[rng.gen_range(0..k)] += 1;
    }
    counts.into_iter().map(|c| ratio(c, den as i64)).collect()
}

/// Random model compatible with `graph` (which must be valid).
pub fn random_scim<R: Rng>(rng: &mut R, graph: &Cid, shape: ScimShape) -> Scim<Rational> {
    let d = graph.the_decision().expect("single decision");
    let domains: Vec<Domain<Rational>> = graph
        .node_ids()
        .map(|id| {
            let k = rng.gen_range(2..=shape.max_domain.max(2));
            match graph.kind(id) {
                NodeKind::Utility => Domain::symbolic((0..k).map(|i| format!("u{i}")))
                    .with_numeric((0..k).map(|_| Rational::from_integer(BigInt::from(rng.gen_range(-2..=3)))).collect()),
                _ => Domain::symbolic((0..k).map(|i| format!("v{i}"))),
            }
        })
        .collect();
    let exo: Vec<ExoDistribution<Rational>> = graph
        .node_ids()
        .map(|id| {
            let max = if id == d { shape.max_decision_exo } else { shape.max_exo };
            let k = rng.gen_range(1..=max.max(1));
            ExoDistribution {
                values: (0..k).map(|i| format!("e{i}")).collect(),
                probs: random_distribution(rng, k, shape.max_denominator),
            }
        })
        .collect();
    let fns = graph
        .node_ids()
        .map(|id| {
            if id == d {
                return None;
            }
            let radices: Vec<usize> = graph.parents(id).iter().map(|p| domains[p.0].len()).collect();
            let out = domains[id.0].len() as u32;
            Some(StructFn::tabulate(&radices, exo[id.0].len(), |_, _| rng.gen_range(0..out)))
        })
        .collect();
    Scim::new(graph.clone(), domains, exo, fns).expect("generated model is valid")
}
