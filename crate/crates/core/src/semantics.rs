//! Expected-utility incentive definitions on concrete models, decided
//! exactly.
//!
//! Control and response incentives quantify over every optimal policy. The
//! optimal set is a product over `(pa_D, ε_D)` cells and both definitions
//! factor over that product, so the verdict is decided per context without
//! listing policies. Optimal policies are still enumerated, up to a cap, to
//! attach per-policy evidence.

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::criteria::IncentiveKind;
use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeKind};
use crate::policy::{max_of, OptimalPolicySet, Policy, QTable};
use crate::scim::{decode_mixed, Engine, Intervention, Scim};
use crate::scalar::Scalar;

pub const DEFAULT_POLICY_CAP: usize = 4096;
pub const DEFAULT_SOFT_CAP: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Present,
    Absent,
    Undecided { count: BigUint, cap: usize },
}

impl Status {
    pub fn present(&self) -> Option<bool> {
        match self {
            Status::Present => Some(true),
            Status::Absent => Some(false),
            Status::Undecided { .. } => None,
        }
    }

    fn from_bool(b: bool) -> Self {
        if b {
            Status::Present
        } else {
            Status::Absent
        }
    }
}

/// Evidence that one optimal policy has the incentive.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyEvidence<T> {
    /// `E[U_{X_d} | pa_D] ≠ E[U | pa_D]`.
    Control {
        policy: Policy,
        context: usize,
        decision: u32,
        nested: T,
        baseline: T,
    },
    /// `D_x(ε) ≠ D(ε)`.
    Response {
        policy: Policy,
        value: u32,
        exo: Vec<u32>,
        original: u32,
        responded: u32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticVerdict<T> {
    pub node: NodeId,
    pub kind: IncentiveKind,
    pub status: Status,
    /// An optimal policy without the incentive (control, response).
    pub refuting_policy: Option<Policy>,
    /// One entry per optimal policy when their number is within the cap.
    pub per_policy: Vec<PolicyEvidence<T>>,
    /// Number of optimal policies.
    pub optimal_count: Option<BigUint>,
    /// Response only: the verdict when zero-probability settings count too.
    pub all_settings: Option<bool>,
    /// Observation: optimal value without and with the observation.
    /// Intervention: optimal value without and with the best soft
    /// intervention.
    pub values: Option<(T, T)>,
    /// Intervention: first improving replacement table.
    pub soft: Option<Vec<u32>>,
    pub reason: Option<&'static str>,
}

impl<T> SemanticVerdict<T> {
    fn new(node: NodeId, kind: IncentiveKind, status: Status) -> Self {
        SemanticVerdict {
            node,
            kind,
            status,
            refuting_policy: None,
            per_policy: Vec::new(),
            optimal_count: None,
            all_settings: None,
            values: None,
            soft: None,
            reason: None,
        }
    }
}

fn prepare<T: Scalar>(model: &Scim<T>, x: NodeId) -> Result<NodeId> {
    model.ensure_valid()?;
    let g = model.graph();
    if x.0 >= g.len() {
        return Err(Error::UnknownNode(format!("#{}", x.0)));
    }
    let d = model.decision();
    if x == d {
        return Err(Error::DecisionNode(g.name(x).to_string()));
    }
    Ok(d)
}

/// `R[c][d][d'] = E[U · 1{c} | do(D = d', X = X_d)]`.
fn nested_table<T: Scalar>(engine: &Engine<'_, T>, x: NodeId) -> Result<Vec<Vec<Vec<T>>>> {
    let model = engine.model();
    let d = engine.decision();
    let n_dec = model.domain(d).len() as u32;
    let space = engine.contexts();
    let n = model.graph().len();
    let per_d: Vec<Vec<Vec<T>>> = (0..n_dec)
        .into_par_iter()
        .map(|dv| -> Result<Vec<Vec<T>>> {
            let inner = Intervention::hard([(d, dv)]);
            let inner_ov = engine.compile(&inner)?;
            let mut table = vec![vec![T::zero(); n_dec as usize]; space.count()];
            let mut out = vec![0; n];
            for s in engine.settings() {
                if s.prob.is_zero() {
                    continue;
                }
                engine.eval_into(None, &s.values, &inner_ov, &mut out);
                let xv = out[x.0];
                let c = space.index(&out);
                for dp in 0..n_dec {
                    let iv = Intervention::hard([(d, dp), (x, xv)]);
                    let ov = engine.compile(&iv)?;
                    engine.eval_into(None, &s.values, &ov, &mut out);
                    let cell = &mut table[c][dp as usize];
                    *cell = cell.clone() + s.prob.clone() * engine.total_utility(&out);
                }
            }
            Ok(table)
        })
        .collect::<Result<_>>()?;
    Ok((0..space.count())
        .map(|c| per_d.iter().map(|t| t[c].clone()).collect())
        .collect())
}

/// Calls `f` with each map from positive-probability `ε_D` values to
/// allowed decisions until it returns true.
fn any_local_choice(
    exo_positive: &[usize],
    allowed: &[u32],
    mut f: impl FnMut(&[u32]) -> bool,
) -> bool {
    let sizes = vec![allowed.len(); exo_positive.len()];
    let total: usize = sizes.iter().product();
    let mut digits = vec![0u32; sizes.len()];
    let mut choice = vec![0u32; sizes.len()];
    for i in 0..total {
        decode_mixed(i, &sizes, &mut digits);
        for (slot, &k) in choice.iter_mut().zip(&digits) {
            *slot = allowed[k as usize];
        }
        if f(&choice) {
            return true;
        }
    }
    false
}

/// Control incentive on `x`: every optimal policy has a positive-probability
/// context and a decision `d` with `E[U_{X_d} | pa_D] ≠ E[U | pa_D]`.
pub fn has_control_incentive<T: Scalar>(model: &Scim<T>, x: NodeId, cap: usize) -> Result<SemanticVerdict<T>> {
    let d = prepare(model, x)?;
    let engine = model.engine();
    let q = QTable::compute(&engine, &Intervention::none())?;
    let exo_d = &model.exo(d).probs;
    let set = OptimalPolicySet::from_q(&q, exo_d);
    let space = &q.space;
    let positive: Vec<usize> = (0..exo_d.len()).filter(|&e| !exo_d[e].is_zero()).collect();
    let n_dec = model.domain(d).len();

    let descends = model.graph().has_directed_path(d, x);
    let r = if descends { Some(nested_table(&engine, x)?) } else { None };

    // per context: a local optimal choice with no witness, if any
    let mut refuting = set.first().table().to_vec();
    let mut present = false;
    for c in 0..space.count() {
        let Some(opt) = q.argmax(c) else { continue };
        let Some(r) = &r else { continue };
        let quiet = |choice: &[u32]| {
            let base = positive
                .iter()
                .zip(choice)
                .fold(T::zero(), |acc, (&e, &dv)| acc + exo_d[e].clone() * q.weighted[c][dv as usize].clone());
            (0..n_dec).all(|dd| {
                let nested = positive.iter().zip(choice).fold(T::zero(), |acc, (&e, &dv)| {
                    acc + exo_d[e].clone() * r[c][dd][dv as usize].clone()
                });
                nested == base
            })
        };
        let mut found = None;
        any_local_choice(&positive, &opt, |choice| {
            if quiet(choice) {
                found = Some(choice.to_vec());
                true
            } else {
                false
            }
        });
        match found {
            Some(choice) => {
                for (&e, &dv) in positive.iter().zip(&choice) {
                    refuting[c * space.exo_len + e] = dv;
                }
            }
            None => {
                present = true;
                break;
            }
        }
    }

    let mut v = SemanticVerdict::new(x, IncentiveKind::Control, Status::from_bool(present));
    v.optimal_count = Some(set.count());
    if !descends {
        v.reason = Some("not_descendant_of_decision");
    }
    if !present {
        v.refuting_policy = Some(Policy::new(space, refuting)?);
    }
    if let Ok(all) = set.enumerate(cap) {
        for p in all {
            if let Some(ev) = control_evidence(&engine, &p, x)? {
                v.per_policy.push(ev);
            }
        }
    }
    Ok(v)
}

/// Direct check of one policy: the lexicographically first `(pa_D, d)`
/// with `E_π[U_{X_d} | pa_D] ≠ E_π[U | pa_D]`.
pub fn control_evidence<T: Scalar>(engine: &Engine<'_, T>, policy: &Policy, x: NodeId) -> Result<Option<PolicyEvidence<T>>> {
    let model = engine.model();
    let d = engine.decision();
    let space = engine.contexts();
    let n_dec = model.domain(d).len() as u32;
    let empty = Intervention::none();
    let none = engine.compile(&empty)?;
    let mut mass = vec![T::zero(); space.count()];
    let mut base = vec![T::zero(); space.count()];
    let mut nested = vec![vec![T::zero(); n_dec as usize]; space.count()];
    for s in engine.settings() {
        if s.prob.is_zero() {
            continue;
        }
        let values = engine.eval(Some(policy), &s.values, &none);
        let c = space.index(&values);
        mass[c] = mass[c].clone() + s.prob.clone();
        base[c] = base[c].clone() + s.prob.clone() * engine.total_utility(&values);
        for dv in 0..n_dec {
            let nv = engine.nested_values(Some(policy), &s.values, x, dv)?;
            let cell = &mut nested[c][dv as usize];
            *cell = cell.clone() + s.prob.clone() * engine.total_utility(&nv);
        }
    }
    for c in 0..space.count() {
        if mass[c].is_zero() {
            continue;
        }
        let b = base[c].clone() / mass[c].clone();
        for dv in 0..n_dec {
            let n = nested[c][dv as usize].clone() / mass[c].clone();
            if n != b {
                return Ok(Some(PolicyEvidence::Control {
                    policy: policy.clone(),
                    context: c,
                    decision: dv,
                    nested: n,
                    baseline: b,
                }));
            }
        }
    }
    Ok(None)
}

/// Union-find over policy cells.
struct Cells {
    parent: Vec<usize>,
}

impl Cells {
    fn new(n: usize) -> Self {
        Cells {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// An optimal policy that never responds to interventions on `x` at the
/// considered settings, if one exists. Cells a response could connect must
/// agree; each group takes the smallest value allowed in all its cells.
pub(crate) fn non_responsive_policy<T: Scalar>(
    engine: &Engine<'_, T>,
    set: &OptimalPolicySet<T>,
    x: NodeId,
    include_null: bool,
) -> Result<Option<Policy>> {
    let model = engine.model();
    let d = engine.decision();
    let space = engine.contexts();
    let ncells = space.cells();
    let mut uf = Cells::new(ncells);
    let n_x = model.domain(x).len() as u32;
    // contexts do not depend on the decision, so it is pinned to 0
    let pin = Intervention::hard([(d, 0)]);
    let base_ov = engine.compile(&pin)?;
    let x_ovs: Vec<Intervention> = (0..n_x).map(|v| Intervention::hard([(d, 0), (x, v)])).collect();
    let x_ovs = x_ovs
        .iter()
        .map(|iv| engine.compile(iv))
        .collect::<Result<Vec<_>>>()?;
    let n = model.graph().len();
    let mut out = vec![0; n];
    for s in engine.settings() {
        if s.prob.is_zero() && !include_null {
            continue;
        }
        engine.eval_into(None, &s.values, &base_ov, &mut out);
        let e = s.values[d.0] as usize;
        let cell = space.index(&out) * space.exo_len + e;
        for ov in &x_ovs {
            engine.eval_into(None, &s.values, ov, &mut out);
            uf.union(cell, space.index(&out) * space.exo_len + e);
        }
    }
    let n_dec = model.domain(d).len();
    let mut allowed: Vec<Vec<bool>> = vec![vec![true; n_dec]; ncells];
    for cell in 0..ncells {
        let root = uf.find(cell);
        let c = &set.cells[cell];
        if !c.free {
            for dv in 0..n_dec {
                if !c.values.contains(&(dv as u32)) {
                    allowed[root][dv] = false;
                }
            }
        }
    }
    let mut table = Vec::with_capacity(ncells);
    for cell in 0..ncells {
        let root = uf.find(cell);
        match allowed[root].iter().position(|&a| a) {
            Some(dv) => table.push(dv as u32),
            None => return Ok(None),
        }
    }
    Ok(Some(Policy::new(space, table)?))
}

/// Response incentive on `x`: every optimal policy has some value `x'` and
/// positive-probability setting `ε` with `D_{x'}(ε) ≠ D(ε)`.
pub fn has_response_incentive<T: Scalar>(model: &Scim<T>, x: NodeId, cap: usize) -> Result<SemanticVerdict<T>> {
    let d = prepare(model, x)?;
    let engine = model.engine();
    let q = QTable::compute(&engine, &Intervention::none())?;
    let set = OptimalPolicySet::from_q(&q, &model.exo(d).probs);
    let quiet = non_responsive_policy(&engine, &set, x, false)?;
    let quiet_all = non_responsive_policy(&engine, &set, x, true)?;
    let mut v = SemanticVerdict::new(x, IncentiveKind::Response, Status::from_bool(quiet.is_none()));
    v.refuting_policy = quiet;
    v.all_settings = Some(quiet_all.is_none());
    v.optimal_count = Some(set.count());
    if let Ok(all) = set.enumerate(cap) {
        for p in all {
            if let Some(ev) = response_evidence(&engine, &p, x, false)? {
                v.per_policy.push(ev);
            }
        }
    }
    Ok(v)
}

/// Direct check of one policy: the first `(x', ε)` at which the decision
/// responds.
pub fn response_evidence<T: Scalar>(
    engine: &Engine<'_, T>,
    policy: &Policy,
    x: NodeId,
    include_null: bool,
) -> Result<Option<PolicyEvidence<T>>> {
    let model = engine.model();
    let d = engine.decision();
    let empty = Intervention::none();
    let none = engine.compile(&empty)?;
    let n_x = model.domain(x).len() as u32;
    for value in 0..n_x {
        let iv = Intervention::hard([(x, value)]);
        let ov = engine.compile(&iv)?;
        for s in engine.settings() {
            if s.prob.is_zero() && !include_null {
                continue;
            }
            let original = engine.eval(Some(policy), &s.values, &none)[d.0];
            let responded = engine.eval(Some(policy), &s.values, &ov)[d.0];
            if original != responded {
                return Ok(Some(PolicyEvidence::Response {
                    policy: policy.clone(),
                    value,
                    exo: s.values.clone(),
                    original,
                    responded,
                }));
            }
        }
    }
    Ok(None)
}

/// Observation incentive on `x`: the best policy that may read `x` beats
/// the best policy that may not. For a node the decision does not observe,
/// the comparison is against the model with an added edge `x -> D`.
pub fn has_observation_incentive<T: Scalar>(model: &Scim<T>, x: NodeId) -> Result<SemanticVerdict<T>> {
    let d = prepare(model, x)?;
    let g = model.graph();
    let kind = IncentiveKind::Observation;
    if g.has_directed_path(d, x) {
        let mut v = SemanticVerdict::new(x, kind, Status::Absent);
        v.reason = Some("descendant_of_decision");
        return Ok(v);
    }
    let augmented;
    let m = if g.has_edge(x, d) {
        model
    } else {
        augmented = model.with_observation(x)?;
        &augmented
    };
    let q = QTable::compute(&m.engine(), &Intervention::none())?;
    let with = q.optimal_value();
    let space = &q.space;
    let pos = space
        .parents
        .iter()
        .position(|&p| p == x)
        .expect("x observed in the augmented model");
    // contexts that differ only in the x-coordinate share a decision
    let n_dec = q.decisions();
    let mut groups: std::collections::BTreeMap<Vec<u32>, Vec<T>> = Default::default();
    let mut digits = vec![0u32; space.parents.len()];
    for c in 0..space.count() {
        decode_mixed(c, &space.radices, &mut digits);
        let mut key = digits.clone();
        key.remove(pos);
        let row = groups.entry(key).or_insert_with(|| vec![T::zero(); n_dec]);
        for (acc, w) in row.iter_mut().zip(&q.weighted[c]) {
            *acc = acc.clone() + w.clone();
        }
    }
    let without = groups.values().fold(T::zero(), |acc, row| acc + max_of(row));
    let mut v = SemanticVerdict::new(x, kind, Status::from_bool(without < with));
    if !g.has_edge(x, d) {
        v.reason = Some("not_observed");
    }
    v.values = Some((without, with));
    Ok(v)
}

/// Intervention incentive on `x`: some replacement of `x`'s mechanism by a
/// function of its parents raises the optimal expected utility.
pub fn has_intervention_incentive<T: Scalar>(model: &Scim<T>, x: NodeId, cap: usize) -> Result<SemanticVerdict<T>> {
    prepare(model, x)?;
    let kind = IncentiveKind::Intervention;
    let radices = model.parent_radices(x);
    let combos: usize = radices.iter().product();
    let n_x = model.domain(x).len();
    let count = BigUint::from(n_x).pow(combos as u32);
    if count > BigUint::from(cap) {
        return Ok(SemanticVerdict::new(x, kind, Status::Undecided { count, cap }));
    }
    let engine = model.engine();
    let baseline = QTable::compute(&engine, &Intervention::none())?.optimal_value();
    let total = n_x.pow(combos as u32);
    let results: Vec<(Vec<u32>, T)> = (0..total)
        .into_par_iter()
        .map(|i| -> Result<(Vec<u32>, T)> {
            let mut table = vec![0u32; combos];
            decode_mixed(i, &vec![n_x; combos], &mut table);
            let iv = Intervention::soft(x, table.clone());
            let value = QTable::compute(&engine, &iv)?.optimal_value();
            Ok((table, value))
        })
        .collect::<Result<_>>()?;
    let best = max_of(&results.iter().map(|r| r.1.clone()).collect::<Vec<_>>());
    let first = results.iter().find(|r| r.1 > baseline).map(|r| r.0.clone());
    let mut v = SemanticVerdict::new(x, kind, Status::from_bool(first.is_some()));
    v.soft = first;
    v.values = Some((baseline, best));
    Ok(v)
}

pub fn semantic<T: Scalar>(
    model: &Scim<T>,
    x: NodeId,
    kind: IncentiveKind,
    policy_cap: usize,
    soft_cap: usize,
) -> Result<SemanticVerdict<T>> {
    match kind {
        IncentiveKind::Control => has_control_incentive(model, x, policy_cap),
        IncentiveKind::Response => has_response_incentive(model, x, policy_cap),
        IncentiveKind::Observation => has_observation_incentive(model, x),
        IncentiveKind::Intervention => has_intervention_incentive(model, x, soft_cap),
    }
}

/// Every non-decision node times all four kinds, nodes in declaration order.
pub fn semantic_report<T: Scalar>(model: &Scim<T>, policy_cap: usize, soft_cap: usize) -> Result<Vec<SemanticVerdict<T>>> {
    model.ensure_valid()?;
    let g = model.graph();
    let jobs: Vec<(NodeId, IncentiveKind)> = g
        .node_ids()
        .filter(|&n| g.kind(n) != NodeKind::Decision)
        .flat_map(|n| IncentiveKind::ALL.into_iter().map(move |k| (n, k)))
        .collect();
    jobs.into_par_iter()
        .map(|(n, k)| semantic(model, n, k, policy_cap, soft_cap))
        .collect()
}

/// Brute-force oracle: quantifies over the enumerated optimal set.
pub fn control_by_enumeration<T: Scalar>(model: &Scim<T>, x: NodeId, cap: usize) -> Result<bool> {
    prepare(model, x)?;
    let engine = model.engine();
    let all = crate::policy::enumerate_optimal_policies(model, cap)?;
    for p in &all {
        if control_evidence(&engine, p, x)?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Brute-force oracle for the response definition.
pub fn response_by_enumeration<T: Scalar>(model: &Scim<T>, x: NodeId, cap: usize, include_null: bool) -> Result<bool> {
    prepare(model, x)?;
    let engine = model.engine();
    let all = crate::policy::enumerate_optimal_policies(model, cap)?;
    for p in &all {
        if response_evidence(&engine, p, x, include_null)?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}
