//! Counterfactual fairness of decisions with respect to a protected
//! attribute.

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeKind};
use crate::policy::{optimal_policy_set, ContextSpace, OptimalPolicySet, Policy};
use crate::scim::{engine::extends as engine_extends, Assignment, Intervention, Scim};
use crate::scalar::Scalar;
use crate::semantics::{has_response_incentive, SemanticVerdict, Status};

/// `Pr(D_{a'} = d | observed)` for every `d`, by exact abduction over the
/// exogenous settings followed by `do(A = a')`.
pub fn counterfactual_decision_distribution<T: Scalar>(
    model: &Scim<T>,
    policy: &Policy,
    observed: &Assignment,
    attribute: NodeId,
    intervene: u32,
) -> Result<Vec<T>> {
    let engine = model.engine();
    check_attribute(model, attribute)?;
    let factual = engine.evaluate_all(policy, &Intervention::none())?;
    let iv = Intervention::hard([(attribute, intervene)]);
    let counter = engine.evaluate_all(policy, &iv)?;
    let d = model.decision();
    let mut mass = T::zero();
    let mut dist = vec![T::zero(); model.domain(d).len()];
    for (i, s) in engine.settings().iter().enumerate() {
        if s.prob.is_zero() || !engine_extends(&factual[i], observed) {
            continue;
        }
        mass = mass + s.prob.clone();
        let dv = counter[i][d.0] as usize;
        dist[dv] = dist[dv].clone() + s.prob.clone();
    }
    if mass.is_zero() {
        return Err(Error::ZeroProbability);
    }
    Ok(dist.into_iter().map(|p| p / mass.clone()).collect())
}

fn check_attribute<T: Scalar>(model: &Scim<T>, attribute: NodeId) -> Result<()> {
    let g = model.graph();
    if attribute.0 >= g.len() {
        return Err(Error::UnknownNode(format!("#{}", attribute.0)));
    }
    if g.kind(attribute) == NodeKind::Decision {
        return Err(Error::DecisionNode(g.name(attribute).to_string()));
    }
    Ok(())
}

/// A tuple at which the two sides of the fairness equation differ.
#[derive(Clone, Debug, PartialEq)]
pub struct FairnessViolation<T> {
    pub decision: u32,
    pub context: usize,
    pub observed: u32,
    pub intervened: u32,
    pub factual: T,
    pub counterfactual: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyFairness<T> {
    pub attribute: NodeId,
    pub fair: bool,
    /// First violation in the order (context, a, a', d).
    pub violation: Option<FairnessViolation<T>>,
}

/// Sweeps every `(pa_D, a)` of positive probability, every `a'` and every
/// decision value.
pub fn is_counterfactually_fair<T: Scalar>(model: &Scim<T>, policy: &Policy, attribute: NodeId) -> Result<PolicyFairness<T>> {
    model.ensure_valid()?;
    check_attribute(model, attribute)?;
    let engine = model.engine();
    let space = engine.contexts();
    let d = model.decision();
    let n_a = model.domain(attribute).len();
    let n_d = model.domain(d).len();
    let factual = engine.evaluate_all(policy, &Intervention::none())?;
    let counter = (0..n_a as u32)
        .map(|a| engine.evaluate_all(policy, &Intervention::hard([(attribute, a)])))
        .collect::<Result<Vec<_>>>()?;
    // mass[c][a] and dist[c][a][a'][d]
    let mut mass = vec![vec![T::zero(); n_a]; space.count()];
    let mut dist = vec![vec![vec![vec![T::zero(); n_d]; n_a]; n_a]; space.count()];
    for (i, s) in engine.settings().iter().enumerate() {
        if s.prob.is_zero() {
            continue;
        }
        let c = space.index(&factual[i]);
        let a = factual[i][attribute.0] as usize;
        mass[c][a] = mass[c][a].clone() + s.prob.clone();
        for (ap, cf) in counter.iter().enumerate() {
            let cell = &mut dist[c][a][ap][cf[i][d.0] as usize];
            *cell = cell.clone() + s.prob.clone();
        }
    }
    for c in 0..space.count() {
        for a in 0..n_a {
            if mass[c][a].is_zero() {
                continue;
            }
            // intervening on the observed value reproduces the factual world
            let base = &dist[c][a][a];
            for ap in 0..n_a {
                for dv in 0..n_d {
                    if dist[c][a][ap][dv] != base[dv] {
                        let m = mass[c][a].clone();
                        return Ok(PolicyFairness {
                            attribute,
                            fair: false,
                            violation: Some(FairnessViolation {
                                decision: dv as u32,
                                context: c,
                                observed: a as u32,
                                intervened: ap as u32,
                                factual: base[dv].clone() / m.clone(),
                                counterfactual: dist[c][a][ap][dv].clone() / m,
                            }),
                        });
                    }
                }
            }
        }
    }
    Ok(PolicyFairness {
        attribute,
        fair: true,
        violation: None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFairness<T> {
    pub attribute: NodeId,
    /// Whether some optimal policy is counterfactually fair; `None` when
    /// undecided.
    pub exists: Option<bool>,
    /// A fair optimal policy when one exists.
    pub policy: Option<Policy>,
    /// The response verdict on the attribute.
    pub response: SemanticVerdict<T>,
    /// Whether the minimal-element construction, applied to the fair
    /// optimal policy, is again optimal and fair.
    pub minimal_element_ok: Option<bool>,
}

/// Decides whether a fair optimal policy exists through the absence of a
/// response incentive on the attribute, and builds one.
pub fn exists_fair_optimal_policy<T: Scalar>(model: &Scim<T>, attribute: NodeId, cap: usize) -> Result<ModelFairness<T>> {
    check_attribute(model, attribute)?;
    let response = has_response_incentive(model, attribute, cap)?;
    let exists = match response.status {
        Status::Present => Some(false),
        Status::Absent => Some(true),
        Status::Undecided { .. } => None,
    };
    let policy = response.refuting_policy.clone();
    let mut minimal_element_ok = None;
    if let Some(p) = &policy {
        let fair = is_counterfactually_fair(model, p, attribute)?;
        debug_assert!(fair.fair, "non-responsive optimal policy must be fair");
        let set = optimal_policy_set(model)?;
        let star = minimal_element_policy(model, p)?;
        minimal_element_ok = Some(set.contains(&star) && is_counterfactually_fair(model, &star, attribute)?.fair);
    }
    Ok(ModelFairness {
        attribute,
        exists,
        policy,
        response,
        minimal_element_ok,
    })
}

/// `π*(pa_D) = min supp_π(D | pa_D)` in domain order. Applied to every
/// context, since one unreachable factually may still be reached under
/// `do(A = a')`.
pub fn minimal_element_policy<T: Scalar>(model: &Scim<T>, policy: &Policy) -> Result<Policy> {
    let space = ContextSpace::of(model);
    let exo_d = &model.exo(model.decision()).probs;
    let per_context: Vec<u32> = (0..space.count())
        .map(|c| {
            (0..space.exo_len)
                .filter(|&e| !exo_d[e].is_zero())
                .map(|e| policy.decide(c, e as u32))
                .min()
                .unwrap_or(0)
        })
        .collect();
    Policy::from_contexts(&space, &per_context)
}

/// Exhaustive route: the first fair policy among the enumerated optimal
/// set.
pub fn fair_optimal_by_enumeration<T: Scalar>(
    model: &Scim<T>,
    set: &OptimalPolicySet<T>,
    attribute: NodeId,
    cap: usize,
) -> Result<Option<Policy>> {
    for p in set.enumerate(cap)? {
        if is_counterfactually_fair(model, &p, attribute)?.fair {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::accident;
    use crate::scalar::{ratio, Rational};
    use crate::scim::fixtures::*;
    use crate::witness::build_response_witness;

    #[test]
    fn abduct_act_is_consistent() {
        let m = matching();
        let c = m.graph().node("C").unwrap();
        let space = ContextSpace::of(&m);
        let copy = Policy::from_contexts(&space, &[0, 1]).unwrap();
        let obs = Assignment::from([(c, 1)]);
        let same = counterfactual_decision_distribution(&m, &copy, &obs, c, 1).unwrap();
        assert_eq!(same, vec![ratio(0, 1), ratio(1, 1)]);
        let flipped = counterfactual_decision_distribution(&m, &copy, &obs, c, 0).unwrap();
        assert_eq!(flipped, vec![ratio(1, 1), ratio(0, 1)]);
        let constant = Policy::constant(&space, 1);
        let f = counterfactual_decision_distribution(&m, &constant, &obs, c, 0).unwrap();
        assert_eq!(f, vec![ratio(0, 1), ratio(1, 1)]);
    }

    #[test]
    fn matching_has_no_fair_optimal_policy() {
        let m = matching();
        let c = m.graph().node("C").unwrap();
        let space = ContextSpace::of(&m);
        let copy = Policy::from_contexts(&space, &[0, 1]).unwrap();
        let v = is_counterfactually_fair(&m, &copy, c).unwrap();
        assert!(!v.fair);
        let viol = v.violation.unwrap();
        assert_eq!((viol.decision, viol.context, viol.observed, viol.intervened), (0, 0, 0, 1));
        assert!(is_counterfactually_fair(&m, &Policy::constant(&space, 0), c).unwrap().fair);
        let mf = exists_fair_optimal_policy(&m, c, 100).unwrap();
        assert_eq!(mf.exists, Some(false));
        let set = optimal_policy_set(&m).unwrap();
        assert_eq!(fair_optimal_by_enumeration(&m, &set, c, 100).unwrap(), None);
    }

    #[test]
    fn zero_probability_observation() {
        let m = matching();
        let c = m.graph().node("C").unwrap();
        let d = m.decision();
        let space = ContextSpace::of(&m);
        let p = Policy::constant(&space, 0);
        let obs = Assignment::from([(c, 1), (d, 1)]);
        assert_eq!(
            counterfactual_decision_distribution(&m, &p, &obs, c, 0),
            Err(Error::ZeroProbability)
        );
    }

    #[test]
    fn race_witness_is_unfair_age_is_not() {
        let g = accident();
        let race = g.node("Race").unwrap();
        let w = build_response_witness::<Rational>(&g, race).unwrap();
        let mf = exists_fair_optimal_policy(&w.model, race, 0).unwrap();
        assert_eq!(mf.exists, Some(false));
        let m: Scim<Rational> = Scim::promote(g.clone()).unwrap();
        let age = g.node("Age").unwrap();
        let mf = exists_fair_optimal_policy(&m, age, 100).unwrap();
        assert_eq!(mf.exists, Some(true));
        assert_eq!(mf.minimal_element_ok, Some(true));
    }
}
