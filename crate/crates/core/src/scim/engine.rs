use super::{Assignment, Intervention, Scim};
use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeKind, NodeSet};
use crate::policy::{ContextSpace, Policy};
use crate::scalar::Scalar;

/// One joint setting of all exogenous variables with its probability.
#[derive(Clone, Debug, PartialEq)]
pub struct ExoSetting<T> {
    pub values: Vec<u32>,
    pub prob: T,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Override<'a> {
    Keep,
    Hard(u32),
    Soft(&'a [u32]),
}

/// Precomputed evaluation order and exogenous space of a model. Cheap to
/// share across threads.
pub struct Engine<'a, T> {
    model: &'a Scim<T>,
    order: Vec<NodeId>,
    radices: Vec<Vec<usize>>,
    settings: Vec<ExoSetting<T>>,
    contexts: ContextSpace,
    decision: NodeId,
    utilities: Vec<NodeId>,
}

impl<'a, T: Scalar> Engine<'a, T> {
    pub fn new(model: &'a Scim<T>) -> Self {
        let g = model.graph();
        let order = g
            .topological_order()
            .expect("engine requires an acyclic model");
        let radices = g.node_ids().map(|n| model.parent_radices(n)).collect();
        Engine {
            model,
            order,
            radices,
            settings: enumerate_settings(model),
            contexts: ContextSpace::of(model),
            decision: model.decision(),
            utilities: g.utilities(),
        }
    }

    pub fn model(&self) -> &'a Scim<T> {
        self.model
    }

    pub fn decision(&self) -> NodeId {
        self.decision
    }

    pub fn contexts(&self) -> &ContextSpace {
        &self.contexts
    }

    /// All exogenous settings, lexicographic by node declaration then
    /// domain order.
    pub fn settings(&self) -> &[ExoSetting<T>] {
        &self.settings
    }

    pub(crate) fn compile<'b>(&self, iv: &'b Intervention) -> Result<Vec<Override<'b>>> {
        let g = self.model.graph();
        let mut ov = vec![Override::Keep; g.len()];
        let mut seen = NodeSet::new();
        for &(n, v) in &iv.hard {
            if n.0 >= g.len() {
                return Err(Error::UnknownNode(format!("#{}", n.0)));
            }
            if !seen.insert(n) {
                return Err(Error::DomainMismatch(format!(
                    "`{}` intervened on twice",
                    g.name(n)
                )));
            }
            if v as usize >= self.model.domain(n).len() {
                return Err(Error::DomainMismatch(format!(
                    "value {v} outside domain of `{}`",
                    g.name(n)
                )));
            }
            ov[n.0] = Override::Hard(v);
        }
        for (n, table) in &iv.soft {
            let n = *n;
            if n.0 >= g.len() {
                return Err(Error::UnknownNode(format!("#{}", n.0)));
            }
            if g.kind(n) == NodeKind::Decision {
                return Err(Error::DomainMismatch(
                    "soft interventions on the decision are not allowed".into(),
                ));
            }
            if !seen.insert(n) {
                return Err(Error::DomainMismatch(format!(
                    "`{}` intervened on twice",
                    g.name(n)
                )));
            }
            let expected: usize = self.radices[n.0].iter().product();
            let size = self.model.domain(n).len() as u32;
            if table.len() != expected || table.iter().any(|&v| v >= size) {
                return Err(Error::DomainMismatch(format!(
                    "soft intervention table for `{}` is malformed",
                    g.name(n)
                )));
            }
            ov[n.0] = Override::Soft(table);
        }
        Ok(ov)
    }

    fn check_exo(&self, exo: &[u32]) -> Result<()> {
        let g = self.model.graph();
        if exo.len() != g.len() {
            return Err(Error::DomainMismatch(format!(
                "exogenous assignment has {} values, expected {}",
                exo.len(),
                g.len()
            )));
        }
        for n in g.node_ids() {
            if exo[n.0] as usize >= self.model.exo(n).len() {
                return Err(Error::DomainMismatch(format!(
                    "exogenous value {} outside domain of `{}`",
                    exo[n.0],
                    g.name(n)
                )));
            }
        }
        Ok(())
    }

    fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.contexts() != self.contexts.count() || policy.exo_len() != self.contexts.exo_len {
            return Err(Error::DomainMismatch("policy shape does not match the model".into()));
        }
        let size = self.model.domain(self.decision).len() as u32;
        if policy.table().iter().any(|&v| v >= size) {
            return Err(Error::DomainMismatch("policy output outside the decision domain".into()));
        }
        Ok(())
    }

    fn parent_index(&self, node: NodeId, values: &[u32]) -> usize {
        self.model
            .graph()
            .parents(node)
            .iter()
            .zip(&self.radices[node.0])
            .fold(0, |acc, (p, &r)| acc * r + values[p.0] as usize)
    }

    /// Evaluates every node in topological order. `policy` may be `None`
    /// only when the decision is overridden.
    pub(crate) fn eval_into(&self, policy: Option<&Policy>, exo: &[u32], ov: &[Override<'_>], out: &mut [u32]) {
        for &n in &self.order {
            let v = match ov[n.0] {
                Override::Hard(v) => v,
                Override::Soft(table) => table[self.parent_index(n, out)],
                Override::Keep if n == self.decision => {
                    let ctx = self.contexts.index(out);
                    policy
                        .expect("decision needs a policy or an intervention")
                        .decide(ctx, exo[n.0])
                }
                Override::Keep => {
                    let f = self.model.function(n).expect("validated model");
                    let row = self.parent_index(n, out) * self.model.exo(n).len() + exo[n.0] as usize;
                    f.rows[row].expect("validated model has total tables")
                }
            };
            out[n.0] = v;
        }
    }

    pub(crate) fn eval(&self, policy: Option<&Policy>, exo: &[u32], ov: &[Override<'_>]) -> Vec<u32> {
        let mut out = vec![0; exo.len()];
        self.eval_into(policy, exo, ov, &mut out);
        out
    }

    /// Values of every endogenous node at exogenous setting `exo`.
    pub fn evaluate(&self, policy: &Policy, exo: &[u32], iv: &Intervention) -> Result<Vec<u32>> {
        self.check_exo(exo)?;
        self.check_policy(policy)?;
        let ov = self.compile(iv)?;
        Ok(self.eval(Some(policy), exo, &ov))
    }

    /// Values of every node at every exogenous setting, in setting order.
    pub fn evaluate_all(&self, policy: &Policy, iv: &Intervention) -> Result<Vec<Vec<u32>>> {
        self.check_policy(policy)?;
        let ov = self.compile(iv)?;
        Ok(self.settings.iter().map(|s| self.eval(Some(policy), &s.values, &ov)).collect())
    }

    /// `W_x(ε)` for `W ∈ query`.
    pub fn potential_response(
        &self,
        policy: &Policy,
        exo: &[u32],
        intervention: &[(NodeId, u32)],
        query: &NodeSet,
    ) -> Result<Assignment> {
        let iv = Intervention::hard(intervention.iter().copied());
        let values = self.evaluate(policy, exo, &iv)?;
        Ok(restrict(&values, query))
    }

    /// `W_{X_d}(ε)`: `X` is forced to the value it takes under `do(D = d)`,
    /// everything else (including the policy) runs as usual.
    pub fn nested_potential_response(
        &self,
        policy: &Policy,
        exo: &[u32],
        x: NodeId,
        d: u32,
        query: &NodeSet,
    ) -> Result<Assignment> {
        self.check_exo(exo)?;
        self.check_policy(policy)?;
        let values = self.nested_values(Some(policy), exo, x, d)?;
        Ok(restrict(&values, query))
    }

    pub(crate) fn nested_values(&self, policy: Option<&Policy>, exo: &[u32], x: NodeId, d: u32) -> Result<Vec<u32>> {
        let inner = Intervention::hard([(self.decision, d)]);
        let inner_ov = self.compile(&inner)?;
        let x_star = self.eval(None, exo, &inner_ov)[x.0];
        let outer = Intervention::hard([(x, x_star)]);
        let outer_ov = self.compile(&outer)?;
        Ok(self.eval(policy, exo, &outer_ov))
    }

    /// Sum of the numeric values of all utility nodes.
    pub fn total_utility(&self, values: &[u32]) -> T {
        self.utilities
            .iter()
            .fold(T::zero(), |acc, &u| acc + self.model.utility_value(u, values[u.0]).clone())
    }

    /// `Pr(event)` under the policy and intervention, exactly.
    pub fn joint_probability(&self, policy: &Policy, event: &Assignment, iv: &Intervention) -> Result<T> {
        self.check_policy(policy)?;
        self.check_event(event)?;
        let ov = self.compile(iv)?;
        let mut out = vec![0; self.model.graph().len()];
        let mut total = T::zero();
        for s in &self.settings {
            self.eval_into(Some(policy), &s.values, &ov, &mut out);
            if extends(&out, event) {
                total = total + s.prob.clone();
            }
        }
        Ok(total)
    }

    /// `E[Σ U | given]`, or `None` when `Pr(given) = 0`.
    pub fn expected_total_utility(
        &self,
        policy: &Policy,
        given: &Assignment,
        iv: &Intervention,
    ) -> Result<Option<T>> {
        self.check_policy(policy)?;
        self.check_event(given)?;
        let ov = self.compile(iv)?;
        Ok(self.conditional_utility(Some(policy), given, &ov))
    }

    pub(crate) fn conditional_utility(
        &self,
        policy: Option<&Policy>,
        given: &Assignment,
        ov: &[Override<'_>],
    ) -> Option<T> {
        let mut out = vec![0; self.model.graph().len()];
        let mut mass = T::zero();
        let mut weighted = T::zero();
        for s in &self.settings {
            if s.prob.is_zero() {
                continue;
            }
            self.eval_into(policy, &s.values, ov, &mut out);
            if extends(&out, given) {
                mass = mass + s.prob.clone();
                weighted = weighted + s.prob.clone() * self.total_utility(&out);
            }
        }
        (!mass.is_zero()).then(|| weighted / mass)
    }

    fn check_event(&self, event: &Assignment) -> Result<()> {
        let g = self.model.graph();
        for (&n, &v) in event {
            if n.0 >= g.len() {
                return Err(Error::UnknownNode(format!("#{}", n.0)));
            }
            if v as usize >= self.model.domain(n).len() {
                return Err(Error::DomainMismatch(format!(
                    "value {v} outside domain of `{}`",
                    g.name(n)
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn extends(values: &[u32], event: &Assignment) -> bool {
    event.iter().all(|(n, &v)| values[n.0] == v)
}

fn restrict(values: &[u32], query: &NodeSet) -> Assignment {
    query.iter().map(|&n| (n, values[n.0])).collect()
}

fn enumerate_settings<T: Scalar>(model: &Scim<T>) -> Vec<ExoSetting<T>> {
    let sizes: Vec<usize> = model.exos().iter().map(|e| e.len()).collect();
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0u32; sizes.len()];
    for i in 0..total {
        super::decode_mixed(i, &sizes, &mut digits);
        let prob = digits
            .iter()
            .enumerate()
            .fold(T::one(), |acc, (n, &e)| acc * model.exos()[n].probs[e as usize].clone());
        out.push(ExoSetting {
            values: digits.clone(),
            prob,
        });
    }
    out
}
