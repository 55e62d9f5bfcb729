//! Policies, action values and the set of optimal policies.

use num_bigint::BigUint;
use num_traits::One;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::scim::{decode_mixed, Assignment, Engine, Intervention, Scim};
use crate::scalar::Scalar;

/// Indexing of decision contexts: assignments to `Pa_D` in mixed radix over
/// the decision's parents (graph parent order), paired with `ε_D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextSpace {
    pub parents: Vec<NodeId>,
    pub radices: Vec<usize>,
    pub exo_len: usize,
}

impl ContextSpace {
    pub fn of<T: Scalar>(model: &Scim<T>) -> Self {
        let d = model.decision();
        ContextSpace {
            parents: model.graph().parents(d).to_vec(),
            radices: model.parent_radices(d),
            exo_len: model.exo(d).len(),
        }
    }

    /// Number of `pa_D` assignments.
    pub fn count(&self) -> usize {
        self.radices.iter().product()
    }

    /// Number of `(pa_D, ε_D)` cells of a policy table.
    pub fn cells(&self) -> usize {
        self.count() * self.exo_len
    }

    /// Context index of a full value vector.
    pub fn index(&self, values: &[u32]) -> usize {
        self.parents
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (p, &r)| acc * r + values[p.0] as usize)
    }

    pub fn index_of(&self, a: &Assignment) -> Result<usize> {
        let mut idx = 0;
        for (p, &r) in self.parents.iter().zip(&self.radices) {
            let v = *a
                .get(p)
                .ok_or_else(|| Error::DomainMismatch("context misses a decision parent".into()))?;
            if v as usize >= r {
                return Err(Error::DomainMismatch(format!("context value {v} out of range")));
            }
            idx = idx * r + v as usize;
        }
        Ok(idx)
    }

    pub fn assignment(&self, index: usize) -> Assignment {
        let mut digits = vec![0; self.parents.len()];
        decode_mixed(index, &self.radices, &mut digits);
        self.parents.iter().copied().zip(digits).collect()
    }
}

/// Deterministic decision rule: a total table over `(pa_D, ε_D)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Policy {
    contexts: usize,
    exo_len: usize,
    table: Vec<u32>,
}

impl Policy {
    /// `table[c * exo_len + e]` is the decision in context `c` with `ε_D = e`.
    pub fn new(space: &ContextSpace, table: Vec<u32>) -> Result<Self> {
        if table.len() != space.cells() {
            return Err(Error::DomainMismatch(format!(
                "policy table has {} entries, expected {}",
                table.len(),
                space.cells()
            )));
        }
        Ok(Policy {
            contexts: space.count(),
            exo_len: space.exo_len,
            table,
        })
    }

    pub fn constant(space: &ContextSpace, d: u32) -> Self {
        Policy {
            contexts: space.count(),
            exo_len: space.exo_len,
            table: vec![d; space.cells()],
        }
    }

    /// A policy that ignores `ε_D`.
    pub fn from_contexts(space: &ContextSpace, per_context: &[u32]) -> Result<Self> {
        if per_context.len() != space.count() {
            return Err(Error::DomainMismatch("one decision per context expected".into()));
        }
        let table = per_context
            .iter()
            .flat_map(|&d| std::iter::repeat_n(d, space.exo_len))
            .collect();
        Policy::new(space, table)
    }

    pub fn decide(&self, context: usize, exo: u32) -> u32 {
        self.table[context * self.exo_len + exo as usize]
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn exo_len(&self) -> usize {
        self.exo_len
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn is_constant(&self) -> bool {
        self.table.windows(2).all(|w| w[0] == w[1])
    }
}

/// Context probabilities and action values.
///
/// `weighted[c][d] = E[U · 1{pa_D = c} | do(D = d)]`; `q` divides by
/// `Pr(c)` where that is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<T> {
    pub space: ContextSpace,
    pub prob: Vec<T>,
    pub weighted: Vec<Vec<T>>,
    pub q: Vec<Vec<Option<T>>>,
}

impl<T: Scalar> QTable<T> {
    pub fn compute(engine: &Engine<'_, T>, iv: &Intervention) -> Result<Self> {
        let model = engine.model();
        let d = engine.decision();
        let space = engine.contexts().clone();
        let n_dec = model.domain(d).len() as u32;
        let ovs = (0..n_dec)
            .map(|v| {
                let mut iv = iv.clone();
                iv.hard.retain(|&(n, _)| n != d);
                iv.hard.push((d, v));
                iv
            })
            .collect::<Vec<_>>();
        let columns: Vec<(Vec<T>, Vec<T>)> = ovs
            .par_iter()
            .map(|iv| -> Result<(Vec<T>, Vec<T>)> {
                let ov = engine.compile(iv)?;
                let mut prob = vec![T::zero(); space.count()];
                let mut w = vec![T::zero(); space.count()];
                let mut out = vec![0; model.graph().len()];
                for s in engine.settings() {
                    if s.prob.is_zero() {
                        continue;
                    }
                    engine.eval_into(None, &s.values, &ov, &mut out);
                    let c = space.index(&out);
                    prob[c] = prob[c].clone() + s.prob.clone();
                    w[c] = w[c].clone() + s.prob.clone() * engine.total_utility(&out);
                }
                Ok((prob, w))
            })
            .collect::<Result<_>>()?;
        let prob = columns
            .first()
            .map(|c| c.0.clone())
            .unwrap_or_else(|| vec![T::zero(); space.count()]);
        let weighted: Vec<Vec<T>> = (0..space.count())
            .map(|c| columns.iter().map(|col| col.1[c].clone()).collect())
            .collect();
        let q = weighted
            .iter()
            .zip(&prob)
            .map(|(row, p)| {
                row.iter()
                    .map(|w| (!p.is_zero()).then(|| w.clone() / p.clone()))
                    .collect()
            })
            .collect();
        Ok(QTable {
            space,
            prob,
            weighted,
            q,
        })
    }

    pub fn decisions(&self) -> usize {
        self.weighted.first().map_or(0, Vec::len)
    }

    /// `max_π E_π[U] = Σ_c max_d weighted[c][d]`.
    pub fn optimal_value(&self) -> T {
        self.weighted
            .iter()
            .fold(T::zero(), |acc, row| acc + max_of(row))
    }

    /// Decisions attaining the contextual optimum; `None` for contexts of
    /// probability zero.
    pub fn argmax(&self, c: usize) -> Option<Vec<u32>> {
        if self.prob[c].is_zero() {
            return None;
        }
        let row = &self.weighted[c];
        let best = max_of(row);
        Some(
            row.iter()
                .enumerate()
                .filter(|(_, w)| **w == best)
                .map(|(d, _)| d as u32)
                .collect(),
        )
    }
}

pub(crate) fn max_of<T: Scalar>(row: &[T]) -> T {
    row.iter()
        .skip(1)
        .fold(row.first().cloned().unwrap_or_else(T::zero), |m, w| {
            if *w > m {
                w.clone()
            } else {
                m
            }
        })
}

pub fn q_table<T: Scalar>(model: &Scim<T>) -> Result<QTable<T>> {
    model.ensure_valid()?;
    QTable::compute(&model.engine(), &Intervention::none())
}

/// Allowed decisions for one `(pa_D, ε_D)` cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellOptimum {
    /// True when the cell has probability zero and any decision is optimal.
    pub free: bool,
    pub values: Vec<u32>,
}

/// Compact description of every optimal policy: their set is the product
/// of the per-cell sets.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalPolicySet<T> {
    pub space: ContextSpace,
    pub cells: Vec<CellOptimum>,
    pub value: T,
}

impl<T: Scalar> OptimalPolicySet<T> {
    pub fn from_q(q: &QTable<T>, exo_probs: &[T]) -> Self {
        let space = q.space.clone();
        let all: Vec<u32> = (0..q.decisions() as u32).collect();
        let mut cells = Vec::with_capacity(space.cells());
        for c in 0..space.count() {
            let opt = q.argmax(c);
            for p in exo_probs {
                cells.push(match (&opt, p.is_zero()) {
                    (Some(v), false) => CellOptimum {
                        free: false,
                        values: v.clone(),
                    },
                    _ => CellOptimum {
                        free: true,
                        values: all.clone(),
                    },
                });
            }
        }
        OptimalPolicySet {
            space,
            cells,
            value: q.optimal_value(),
        }
    }

    pub fn count(&self) -> BigUint {
        self.cells
            .iter()
            .fold(BigUint::one(), |acc, c| acc * BigUint::from(c.values.len()))
    }

    pub fn contains(&self, policy: &Policy) -> bool {
        policy.table.len() == self.cells.len()
            && policy
                .table
                .iter()
                .zip(&self.cells)
                .all(|(d, c)| c.values.contains(d))
    }

    /// The policy choosing the first optimal value everywhere.
    pub fn first(&self) -> Policy {
        Policy {
            contexts: self.space.count(),
            exo_len: self.space.exo_len,
            table: self.cells.iter().map(|c| c.values[0]).collect(),
        }
    }

    /// Every optimal policy, in lexicographic order of tables.
    pub fn enumerate(&self, cap: usize) -> Result<Vec<Policy>> {
        let count = self.count();
        if count > BigUint::from(cap) {
            return Err(Error::CapExceeded { count, cap });
        }
        let sizes: Vec<usize> = self.cells.iter().map(|c| c.values.len()).collect();
        let total: usize = sizes.iter().product();
        let mut digits = vec![0u32; sizes.len()];
        Ok((0..total)
            .map(|i| {
                decode_mixed(i, &sizes, &mut digits);
                Policy {
                    contexts: self.space.count(),
                    exo_len: self.space.exo_len,
                    table: digits
                        .iter()
                        .zip(&self.cells)
                        .map(|(&k, c)| c.values[k as usize])
                        .collect(),
                }
            })
            .collect())
    }
}

pub fn optimal_policy_set<T: Scalar>(model: &Scim<T>) -> Result<OptimalPolicySet<T>> {
    let q = q_table(model)?;
    Ok(OptimalPolicySet::from_q(&q, &model.exo(model.decision()).probs))
}

/// All optimal policies; fails with the exact count when above `cap`.
pub fn enumerate_optimal_policies<T: Scalar>(model: &Scim<T>, cap: usize) -> Result<Vec<Policy>> {
    optimal_policy_set(model)?.enumerate(cap)
}

/// `E_π[U]` by direct evaluation.
pub fn expected_utility<T: Scalar>(model: &Scim<T>, policy: &Policy) -> Result<T> {
    Ok(model
        .engine()
        .expected_total_utility(policy, &Assignment::new(), &Intervention::none())?
        .expect("the empty event has probability one"))
}

/// Whether `policy` attains the maximal expected utility. Checked both by
/// value and by membership in the optimal set; the two must agree.
pub fn is_optimal<T: Scalar>(model: &Scim<T>, policy: &Policy) -> Result<bool> {
    let set = optimal_policy_set(model)?;
    let by_value = expected_utility(model, policy)? == set.value;
    let by_cells = set.contains(policy);
    debug_assert_eq!(by_value, by_cells, "optimality routes disagree");
    Ok(by_cells)
}

/// Every deterministic policy of the model, or `CapExceeded`.
pub fn all_policies<T: Scalar>(model: &Scim<T>, cap: usize) -> Result<Vec<Policy>> {
    let space = ContextSpace::of(model);
    let n_dec = model.domain(model.decision()).len();
    let count = BigUint::from(n_dec).pow(space.cells() as u32);
    if count > BigUint::from(cap) {
        return Err(Error::CapExceeded { count, cap });
    }
    let sizes = vec![n_dec; space.cells()];
    let total: usize = sizes.iter().product();
    let mut digits = vec![0u32; sizes.len()];
    Ok((0..total)
        .map(|i| {
            decode_mixed(i, &sizes, &mut digits);
            Policy {
                contexts: space.count(),
                exo_len: space.exo_len,
                table: digits.clone(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use num_traits::Zero;

    use super::*;
    use crate::scalar::{ratio, Rational};
    use crate::scim::fixtures::*;
    use crate::scim::{Domain, ExoDistribution, StructFn};
    use crate::graph::{Cid, NodeKind::*};

    fn brute_force(model: &Scim<Rational>) -> Vec<Policy> {
        let all = all_policies(model, 1 << 16).unwrap();
        let values: Vec<Rational> = all.iter().map(|p| expected_utility(model, p).unwrap()).collect();
        let best = values.iter().max().unwrap().clone();
        all.into_iter()
            .zip(values)
            .filter(|(_, v)| *v == best)
            .map(|(p, _)| p)
            .collect()
    }

    /// `W -> D -> U` where `W` is a coin with an unreachable third value.
    fn with_free_context() -> Scim<Rational> {
        let g = Cid::from_parts(
            "free",
            [("W", Chance), ("D", Decision), ("U", Utility)],
            [("W", "D"), ("D", "U"), ("W", "U")],
        )
        .unwrap();
        Scim::new(
            g,
            vec![
                Domain::symbolic(["a", "b", "c"]),
                Domain::symbolic(["v0", "v1"]),
                Domain::symbolic(["lo", "hi"]).with_numeric(vec![ratio(0, 1), ratio(1, 1)]),
            ],
            vec![
                ExoDistribution::uniform(2),
                ExoDistribution::uniform(2),
                ExoDistribution::uniform(1),
            ],
            vec![
                Some(StructFn::tabulate(&[], 2, |_, e| e)),
                None,
                Some(StructFn::tabulate(&[3, 2], 1, |pa, _| u32::from(pa[0] == pa[1]))),
            ],
        )
        .unwrap()
    }

    #[test]
    fn chain_q_table() {
        let m = chain_copy();
        let q = q_table(&m).unwrap();
        assert_eq!(q.prob, vec![ratio(1, 1)]);
        assert_eq!(q.q[0], vec![Some(ratio(0, 1)), Some(ratio(1, 1))]);
        let set = optimal_policy_set(&m).unwrap();
        assert_eq!(set.cells, vec![CellOptimum { free: false, values: vec![1] }]);
        let all = enumerate_optimal_policies(&m, 10).unwrap();
        assert_eq!(all.len(), 1);
        assert!(is_optimal(&m, &Policy::constant(&set.space, 1)).unwrap());
        assert!(!is_optimal(&m, &Policy::constant(&set.space, 0)).unwrap());
    }

    #[test]
    fn free_contexts_and_cap() {
        let m = with_free_context();
        let set = optimal_policy_set(&m).unwrap();
        // context c never occurs; two ε_D cells each
        assert_eq!(set.cells.iter().filter(|c| c.free).count(), 2);
        assert_eq!(set.count(), BigUint::from(4u32));
        assert_eq!(set.enumerate(10).unwrap().len(), 4);
        match set.enumerate(3) {
            Err(Error::CapExceeded { count, cap }) => {
                assert_eq!(count, BigUint::from(4u32));
                assert_eq!(cap, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut brute = brute_force(&m);
        brute.sort();
        assert_eq!(set.enumerate(10).unwrap(), brute);
    }

    #[test]
    fn constant_utilities_make_everything_optimal() {
        let m = chain_copy();
        let mut fns = m.functions().to_vec();
        fns[2] = Some(StructFn::constant(2, 0));
        let m = Scim::new(m.graph().clone(), m.domains().to_vec(), m.exos().to_vec(), fns).unwrap();
        let q = q_table(&m).unwrap();
        assert!(q.weighted.iter().flatten().all(Zero::is_zero));
        let set = optimal_policy_set(&m).unwrap();
        assert_eq!(set.count(), BigUint::from(2u32));
        for p in all_policies(&m, 100).unwrap() {
            assert!(is_optimal(&m, &p).unwrap());
        }
    }

    #[test]
    fn decomposition_matches_direct_evaluation() {
        let m = with_free_context();
        let q = q_table(&m).unwrap();
        let exo_d = &m.exo(m.decision()).probs;
        for p in all_policies(&m, 1 << 12).unwrap() {
            let mut total = Rational::zero();
            for c in 0..q.space.count() {
                for (e, pe) in exo_d.iter().enumerate() {
                    total += pe * &q.weighted[c][p.decide(c, e as u32) as usize];
                }
            }
            assert_eq!(total, expected_utility(&m, &p).unwrap());
        }
    }

    #[test]
    fn matching_oracle() {
        let m = matching();
        let set = optimal_policy_set(&m).unwrap();
        assert_eq!(set.value, ratio(1, 1));
        assert_eq!(set.enumerate(10).unwrap(), brute_force(&m));
        let space = ContextSpace::of(&m);
        assert_eq!(space.assignment(1), Assignment::from([(NodeId(0), 1)]));
        assert_eq!(space.index_of(&space.assignment(1)).unwrap(), 1);
    }
}
