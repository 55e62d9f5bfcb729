//! Models that exhibit an incentive whenever the graphical criterion holds.

use std::collections::{BTreeMap, BTreeSet};

use crate::criteria::{control_criterion, response_criterion, IncentiveKind};
use crate::error::{Error, Result};
use crate::graph::{Cid, NodeId, NodeKind, PathWitness, Step};
use crate::scalar::{ratio, Scalar};
use crate::scim::{Domain, ExoDistribution, Scim, StructFn};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlWitnessPlan {
    /// `D = Z_0 -> … -> Z_n = U`.
    pub path: PathWitness,
    /// Position of `X` on the path.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseWitnessPlan {
    pub x: NodeId,
    pub observed: NodeId,
    pub utility: NodeId,
    /// `X ⤳ W`, possibly of length zero.
    pub to_observed: PathWitness,
    /// `D ⤳ U`.
    pub to_utility: PathWitness,
    /// `W … U`, active given `Fa_D \ {W}`.
    pub active: PathWitness,
    pub sources: Vec<NodeId>,
    pub colliders: Vec<NodeId>,
    /// `O_l ⤳ D` for each collider.
    pub collider_paths: Vec<PathWitness>,
}

impl ResponseWitnessPlan {
    /// Total number of edges over all chosen paths.
    pub fn size(&self) -> usize {
        self.to_observed.len()
            + self.to_utility.len()
            + self.active.len()
            + self.collider_paths.iter().map(PathWitness::len).sum::<usize>()
    }

    /// Number of coordinates of non-scalar nodes.
    pub fn dims(&self) -> usize {
        self.colliders.len() + 4
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessPlan {
    Control(ControlWitnessPlan),
    Response(ResponseWitnessPlan),
}

impl WitnessPlan {
    /// Human-readable lines describing the chosen paths.
    pub fn describe(&self, g: &Cid) -> Vec<String> {
        match self {
            WitnessPlan::Control(p) => vec![
                format!("control witness for {}", g.name(p.path.nodes[p.index])),
                format!("path: {}", p.path.render(g)),
            ],
            WitnessPlan::Response(p) => {
                let mut out = vec![
                    format!("response witness for {}", g.name(p.x)),
                    format!("observed parent: {}", g.name(p.observed)),
                    format!("utility: {}", g.name(p.utility)),
                    format!("to observed: {}", p.to_observed.render(g)),
                    format!("to utility: {}", p.to_utility.render(g)),
                    format!("active path: {}", p.active.render(g)),
                    format!("sources: {}", names(g, &p.sources)),
                    format!("colliders: {}", names(g, &p.colliders)),
                ];
                for path in &p.collider_paths {
                    out.push(format!("collider path: {}", path.render(g)));
                }
                out.push(format!("coordinates: {}", p.dims()));
                out
            }
        }
    }
}

fn names(g: &Cid, ids: &[NodeId]) -> String {
    if ids.is_empty() {
        return "-".into();
    }
    ids.iter().map(|&n| g.name(n)).collect::<Vec<_>>().join(", ")
}

/// A constructed model together with the choices that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness<T> {
    pub model: Scim<T>,
    pub plan: WitnessPlan,
}

fn not_satisfied(g: &Cid, x: NodeId, kind: IncentiveKind) -> Error {
    Error::CriterionNotSatisfied {
        node: g.name(x).to_string(),
        kind: kind.keyword().to_string(),
    }
}

/// Binary model in which every node on a path `D ⤳ X ⤳ U` copies its
/// predecessor and everything else is constantly `v0`.
pub fn build_control_witness<T: Scalar>(g: &Cid, x: NodeId) -> Result<Witness<T>> {
    let verdict = control_criterion(g, x)?;
    let Some(crate::criteria::Evidence::Control { path }) = verdict.evidence else {
        return Err(not_satisfied(g, x, IncentiveKind::Control));
    };
    let index = path
        .nodes
        .iter()
        .position(|&n| n == x)
        .expect("path passes through x");
    let pred: BTreeMap<NodeId, NodeId> = path.nodes.windows(2).map(|w| (w[1], w[0])).collect();
    let zero = T::zero();
    let one = T::one();
    let mut domains = Vec::new();
    let mut fns = Vec::new();
    for n in g.node_ids() {
        let dom = Domain::symbolic(["v0", "v1"]);
        domains.push(if g.kind(n) == NodeKind::Utility {
            dom.with_numeric(vec![zero.clone(), one.clone()])
        } else {
            dom
        });
        if g.kind(n) == NodeKind::Decision {
            fns.push(None);
            continue;
        }
        let parents = g.parents(n);
        let radices = vec![2; parents.len()];
        let source = pred
            .get(&n)
            .map(|p| parents.iter().position(|q| q == p).expect("path edge"));
        fns.push(Some(StructFn::tabulate(&radices, 1, |pa, _| {
            source.map_or(0, |k| pa[k])
        })));
    }
    let exo = vec![ExoDistribution::uniform(1); g.len()];
    let model = Scim::new(g.clone(), domains, exo, fns)?;
    Ok(Witness {
        model,
        plan: WitnessPlan::Control(ControlWitnessPlan { path, index }),
    })
}

/// Chooses the response plan with the fewest total path edges, ties broken
/// by observed parent then utility index.
pub fn response_plan(g: &Cid, x: NodeId) -> Result<ResponseWitnessPlan> {
    if !response_criterion(g, x)?.compatible {
        return Err(not_satisfied(g, x, IncentiveKind::Response));
    }
    let d = g.the_decision()?;
    let utils = g.decision_utilities()?;
    let mut best: Option<ResponseWitnessPlan> = None;
    for &w in g.parents(d) {
        let Some(to_observed) = g.find_directed_path(x, w, None)? else {
            continue;
        };
        let zs = g.family_without(w);
        for &u in &utils {
            let Some(active) = g.find_active_path(w, u, &zs)? else {
                continue;
            };
            let to_utility = g
                .find_directed_path(d, u, None)?
                .expect("utility descends from the decision");
            let plan = label(g, x, w, u, to_observed.clone(), to_utility, active)?;
            if best.as_ref().is_none_or(|b| plan.size() < b.size()) {
                best = Some(plan);
            }
        }
    }
    best.ok_or_else(|| not_satisfied(g, x, IncentiveKind::Response))
}

fn label(
    g: &Cid,
    x: NodeId,
    w: NodeId,
    u: NodeId,
    to_observed: PathWitness,
    to_utility: PathWitness,
    active: PathWitness,
) -> Result<ResponseWitnessPlan> {
    let d = g.the_decision()?;
    let mut sources = Vec::new();
    let mut colliders = Vec::new();
    if active.steps.first() == Some(&Step::Forward) {
        sources.push(w);
    }
    for i in 1..active.nodes.len() - 1 {
        match (active.steps[i - 1], active.steps[i]) {
            (Step::Backward, Step::Forward) => sources.push(active.nodes[i]),
            (Step::Forward, Step::Backward) => colliders.push(active.nodes[i]),
            _ => {}
        }
    }
    if active.steps.last() != Some(&Step::Forward) {
        return Err(Error::PlanFailure(format!(
            "active path {} does not enter the utility",
            active.render(g)
        )));
    }
    if sources.len() != colliders.len() + 1 {
        return Err(Error::PlanFailure(format!(
            "active path {} does not alternate sources and colliders",
            active.render(g)
        )));
    }
    let collider_paths = colliders
        .iter()
        .map(|&o| {
            g.find_directed_path(o, d, None)?.ok_or_else(|| {
                Error::PlanFailure(format!("collider {} does not reach the decision", g.name(o)))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResponseWitnessPlan {
        x,
        observed: w,
        utility: u,
        to_observed,
        to_utility,
        active,
        sources,
        colliders,
        collider_paths,
    })
}

/// One coordinate of a structural function.
#[derive(Clone, Debug)]
enum Rule {
    Zero,
    One,
    Exo,
    /// Coordinate of a parent; scalar parents ignore the index.
    Read(NodeId, usize),
    Mul(Box<Rule>, Box<Rule>),
}

impl Rule {
    fn eval(&self, parents: &BTreeMap<NodeId, &[i8]>, eps: i8) -> i8 {
        match self {
            Rule::Zero => 0,
            Rule::One => 1,
            Rule::Exo => eps,
            Rule::Read(p, k) => {
                let v = parents[p];
                if v.len() == 1 {
                    v[0]
                } else {
                    v[*k]
                }
            }
            Rule::Mul(a, b) => a.eval(parents, eps) * b.eval(parents, eps),
        }
    }

    fn reads(&self, out: &mut Vec<NodeId>) {
        match self {
            Rule::Read(p, _) => out.push(*p),
            Rule::Mul(a, b) => {
                a.reads(out);
                b.reads(out);
            }
            _ => {}
        }
    }
}

fn mul(a: Rule, b: Rule) -> Rule {
    Rule::Mul(Box::new(a), Box::new(b))
}

/// Coordinate `k` of `v` along the directed path `Y_0 ⤳ Y_n`: `Y_1` reads
/// coordinate `src` of `Y_0`, later nodes copy their predecessor.
fn directed_rule(path: &PathWitness, src: usize, k: usize, v: NodeId) -> Option<Rule> {
    let i = path.nodes.iter().position(|&n| n == v)?;
    match i {
        0 => None,
        1 => Some(Rule::Read(path.nodes[0], src)),
        _ => Some(Rule::Read(path.nodes[i - 1], k)),
    }
}

const PATH: usize = 3;

/// Coordinate of `v` along the undirected path: chains copy along the edge
/// direction, colliders multiply both neighbours, sources read their noise.
fn undirected_rule(active: &PathWitness, v: NodeId) -> Option<Rule> {
    let i = active.nodes.iter().position(|&n| n == v)?;
    let n = active.nodes.len() - 1;
    let before = (i > 0).then(|| active.steps[i - 1]);
    let after = (i < n).then(|| active.steps[i]);
    let prev = || Rule::Read(active.nodes[i - 1], PATH);
    let next = || Rule::Read(active.nodes[i + 1], PATH);
    Some(match (before, after) {
        (None, Some(Step::Forward)) => Rule::Exo,
        (None, Some(Step::Backward)) => next(),
        (Some(Step::Forward), None) => prev(),
        (Some(Step::Forward), Some(Step::Forward)) => prev(),
        (Some(Step::Backward), Some(Step::Backward)) => next(),
        (Some(Step::Forward), Some(Step::Backward)) => mul(prev(), next()),
        (Some(Step::Backward), Some(Step::Forward)) => Rule::Exo,
        (Some(Step::Backward), None) | (None, None) => Rule::Zero,
    })
}

fn value_name(v: &[i8]) -> String {
    let ch = |x: i8| match x {
        -1 => 'n',
        0 => 'z',
        _ => 'p',
    };
    if v.len() == 1 {
        match v[0] {
            -1 => "neg".into(),
            0 => "zero".into(),
            _ => "pos".into(),
        }
    } else {
        std::iter::once('t').chain(v.iter().map(|&x| ch(x))).collect()
    }
}

/// Model over `{-1, 0, 1}` tuples in which the decision earns 1 only by
/// reading information that flows from `X`, and nothing under `do(X = 0)`.
///
/// Coordinates: 0 canonical, 1 the path `X ⤳ W`, 2 the path `D ⤳ U`, 3 the
/// active path `W … U`, then one per collider path `O_l ⤳ D`. A collider
/// path carries the collider's coordinate 3. The observed parent's
/// coordinate 3 is gated by its coordinate 1, so without `X` the decision
/// cannot read the path's first source.
///
/// Domains are the values actually reachable (plus the all-zero value of
/// `X`), rather than every tuple.
pub fn build_response_witness<T: Scalar>(g: &Cid, x: NodeId) -> Result<Witness<T>> {
    let plan = response_plan(g, x)?;
    let d = g.the_decision()?;
    let dims = plan.dims();
    let w = plan.observed;
    let u = plan.utility;
    let scalar = |n: NodeId| g.kind(n) != NodeKind::Chance;

    let mut rules: Vec<Vec<Rule>> = Vec::with_capacity(g.len());
    for v in g.node_ids() {
        if v == d {
            rules.push(Vec::new());
            continue;
        }
        if scalar(v) {
            rules.push(vec![if v == u {
                let du = directed_rule(&plan.to_utility, 0, 2, v).expect("utility on its path");
                let wu = undirected_rule(&plan.active, v).expect("utility on the active path");
                mul(du, wu)
            } else {
                Rule::Zero
            }]);
            continue;
        }
        let mut r = vec![Rule::Zero; dims];
        let xw = directed_rule(&plan.to_observed, 0, 1, v);
        if let Some(rule) = &xw {
            r[1] = rule.clone();
        }
        if let Some(rule) = directed_rule(&plan.to_utility, 0, 2, v) {
            r[2] = rule;
        }
        if let Some(rule) = undirected_rule(&plan.active, v) {
            r[PATH] = match (&xw, v == w) {
                (Some(gate), true) => mul(rule, gate.clone()),
                _ => rule,
            };
        }
        for (l, path) in plan.collider_paths.iter().enumerate() {
            if let Some(rule) = directed_rule(path, PATH, 4 + l, v) {
                r[4 + l] = rule;
            }
        }
        if v == w {
            r[0] = r[PATH].clone();
        } else if v == x {
            r[0] = Rule::One;
        }
        rules.push(r);
    }

    for v in g.node_ids() {
        let mut read = Vec::new();
        for r in &rules[v.0] {
            r.reads(&mut read);
        }
        if let Some(p) = read.iter().find(|p| !g.parents(v).contains(p)) {
            return Err(Error::PlanFailure(format!(
                "{} reads {}, which is not its parent",
                g.name(v),
                g.name(*p)
            )));
        }
    }

    // reachable values, in topological order
    let order = g.topological_order().expect("valid graph");
    let mut values: Vec<Vec<Vec<i8>>> = vec![Vec::new(); g.len()];
    let mut outputs: Vec<Vec<Vec<i8>>> = vec![Vec::new(); g.len()];
    values[d.0] = vec![vec![-1], vec![0], vec![1]];
    for &v in &order {
        if v == d {
            continue;
        }
        let parents = g.parents(v);
        let radices: Vec<usize> = parents.iter().map(|p| values[p.0].len()).collect();
        let combos: usize = radices.iter().product();
        let mut digits = vec![0u32; parents.len()];
        let mut outs = Vec::with_capacity(combos * 2);
        for c in 0..combos {
            crate::scim::decode_mixed(c, &radices, &mut digits);
            let pa: BTreeMap<NodeId, &[i8]> = parents
                .iter()
                .zip(&digits)
                .map(|(&p, &k)| (p, values[p.0][k as usize].as_slice()))
                .collect();
            for eps in [-1i8, 1] {
                outs.push(rules[v.0].iter().map(|r| r.eval(&pa, eps)).collect::<Vec<i8>>());
            }
        }
        let mut dom: BTreeSet<Vec<i8>> = outs.iter().cloned().collect();
        if v == x {
            dom.insert(vec![0; rules[v.0].len()]);
        }
        values[v.0] = dom.into_iter().collect();
        outputs[v.0] = outs;
    }

    let mut domains = Vec::with_capacity(g.len());
    let mut fns = Vec::with_capacity(g.len());
    for v in g.node_ids() {
        let names: Vec<String> = values[v.0].iter().map(|t| value_name(t)).collect();
        let mut dom = Domain::symbolic(names);
        if g.kind(v) == NodeKind::Utility {
            dom = dom.with_numeric(values[v.0].iter().map(|t| T::from_i64(t[0] as i64)).collect());
        }
        domains.push(dom);
        if v == d {
            fns.push(None);
            continue;
        }
        let index: BTreeMap<&Vec<i8>, u32> = values[v.0]
            .iter()
            .enumerate()
            .map(|(i, t)| (t, i as u32))
            .collect();
        fns.push(Some(StructFn {
            rows: outputs[v.0].iter().map(|o| Some(index[o])).collect(),
        }));
    }
    let half = T::from_rational(&ratio(1, 2));
    let exo = ExoDistribution {
        values: vec!["neg".into(), "pos".into()],
        probs: vec![half.clone(), half],
    };
    let model = Scim::new(g.clone(), domains, vec![exo; g.len()], fns)?;
    Ok(Witness {
        model,
        plan: WitnessPlan::Response(plan),
    })
}

/// The all-zero value of `x` in a response witness.
pub fn zero_value<T: Scalar>(model: &Scim<T>, x: NodeId) -> Option<u32> {
    model
        .domain(x)
        .values
        .iter()
        .position(|v| v.chars().skip(1).all(|c| c == 'z') || v == "zero")
        .map(|i| i as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::NodeKind::*;
    use crate::policy::{enumerate_optimal_policies, optimal_policy_set, QTable};
    use crate::scalar::Rational;
    use crate::scim::{Assignment, Intervention};
    use crate::semantics::{has_control_incentive, has_response_incentive, Status};

    fn id(g: &Cid, n: &str) -> NodeId {
        g.node(n).unwrap()
    }

    #[test]
    fn chain_control_witness() {
        let g = Cid::from_parts(
            "chain",
            [("D", Decision), ("X", Chance), ("U", Utility)],
            [("D", "X"), ("X", "U")],
        )
        .unwrap();
        let w: Witness<Rational> = build_control_witness(&g, id(&g, "X")).unwrap();
        let m = &w.model;
        let set = optimal_policy_set(m).unwrap();
        assert_eq!(set.value, ratio(1, 1));
        let all = enumerate_optimal_policies(m, 10).unwrap();
        assert_eq!(all.len(), 1);
        assert!(all[0].table().iter().all(|&d| d == 1));
        let e = m.engine();
        let given = Assignment::new();
        let nested = crate::semantics::control_evidence(&e, &all[0], id(&g, "X")).unwrap();
        assert!(matches!(
            nested,
            Some(crate::semantics::PolicyEvidence::Control { decision: 0, .. })
        ));
        assert_eq!(
            e.expected_total_utility(&all[0], &given, &Intervention::none()).unwrap(),
            Some(ratio(1, 1))
        );
    }

    #[test]
    fn lecture_attendance_control() {
        let g = lecture();
        let x = id(&g, "Attendance");
        let w: Witness<Rational> = build_control_witness(&g, x).unwrap();
        assert_eq!(has_control_incentive(&w.model, x, 64).unwrap().status, Status::Present);
        assert!(matches!(
            build_control_witness::<Rational>(&g, id(&g, "StudentIllness")),
            Err(Error::CriterionNotSatisfied { .. })
        ));
    }

    fn check_response(g: &Cid, x: NodeId) {
        let w: Witness<Rational> = build_response_witness(g, x).unwrap();
        let m = &w.model;
        let q = QTable::compute(&m.engine(), &Intervention::none()).unwrap();
        assert_eq!(q.optimal_value(), ratio(1, 1));
        let zero = zero_value(m, x).unwrap();
        let qx = QTable::compute(&m.engine(), &Intervention::hard([(x, zero)])).unwrap();
        assert!(qx.weighted.iter().flatten().all(|v| *v == ratio(0, 1)));
        let v = has_response_incentive(m, x, 0).unwrap();
        assert_eq!(v.status, Status::Present, "{}", g.name(x));
    }

    #[test]
    fn accident_race_response() {
        let g = accident();
        check_response(&g, id(&g, "Race"));
        check_response(&g, id(&g, "Address"));
    }

    #[test]
    fn fork_into_utility() {
        let g = Cid::from_parts(
            "fork",
            [("X", Chance), ("Z", Chance), ("W", Chance), ("D", Decision), ("U", Utility)],
            [("X", "W"), ("W", "D"), ("D", "U"), ("Z", "W"), ("Z", "U")],
        )
        .unwrap();
        let plan = response_plan(&g, id(&g, "X")).unwrap();
        assert_eq!(plan.active.names(&g), ["W", "Z", "U"]);
        assert_eq!(plan.sources, [id(&g, "Z")]);
        check_response(&g, id(&g, "X"));
        check_response(&g, id(&g, "W"));
    }

    #[test]
    fn collider_on_path() {
        // W -> O <- S -> U with O observed
        let g = Cid::from_parts(
            "collider",
            [
                ("X", Chance),
                ("W", Chance),
                ("S", Chance),
                ("O", Chance),
                ("D", Decision),
                ("U", Utility),
            ],
            [
                ("X", "W"),
                ("W", "D"),
                ("W", "O"),
                ("S", "O"),
                ("O", "D"),
                ("S", "U"),
                ("D", "U"),
            ],
        )
        .unwrap();
        // the cheapest plan observes O directly
        let plan = response_plan(&g, id(&g, "X")).unwrap();
        assert_eq!(plan.observed, id(&g, "O"));
        check_response(&g, id(&g, "X"));
        let (w, d, u) = (id(&g, "W"), id(&g, "D"), id(&g, "U"));
        let active = g.find_active_path(w, u, &g.family_without(w)).unwrap().unwrap();
        assert_eq!(active.names(&g), ["W", "O", "S", "U"]);
        let forced = label(
            &g,
            id(&g, "X"),
            w,
            u,
            g.find_directed_path(id(&g, "X"), w, None).unwrap().unwrap(),
            g.find_directed_path(d, u, None).unwrap().unwrap(),
            active,
        )
        .unwrap();
        assert_eq!(forced.colliders, [id(&g, "O")]);
        assert_eq!(forced.sources, [w, id(&g, "S")]);
        assert_eq!(forced.dims(), 5);
    }

    #[test]
    fn response_precondition() {
        let g = lecture();
        assert!(matches!(
            build_response_witness::<Rational>(&g, id(&g, "PaperReviews")),
            Err(Error::CriterionNotSatisfied { .. })
        ));
    }
}
