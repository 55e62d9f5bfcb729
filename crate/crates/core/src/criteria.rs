//! Graphical incentive criteria on bare diagrams.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Cid, NodeId, PathWitness};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncentiveKind {
    Control,
    Response,
    Observation,
    Intervention,
}

impl IncentiveKind {
    pub const ALL: [IncentiveKind; 4] = [
        IncentiveKind::Control,
        IncentiveKind::Response,
        IncentiveKind::Observation,
        IncentiveKind::Intervention,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            IncentiveKind::Control => "control",
            IncentiveKind::Response => "response",
            IncentiveKind::Observation => "observation",
            IncentiveKind::Intervention => "intervention",
        }
    }
}

impl fmt::Display for IncentiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for IncentiveKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        IncentiveKind::ALL
            .into_iter()
            .find(|k| k.keyword() == s)
            .ok_or_else(|| format!("unknown incentive kind `{s}`"))
    }
}

/// Graphical evidence for a compatible verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Evidence {
    /// `D ⤳ X ⤳ U`.
    Control { path: PathWitness },
    /// `X ⤳ W`, `D ⤳ U` and an active path `W … U` given `Fa_D \ {W}`.
    Response {
        observed: NodeId,
        utility: NodeId,
        to_observed: PathWitness,
        to_utility: PathWitness,
        active: PathWitness,
    },
    /// Active path `X … U` given `Fa_D \ {X}`.
    Observation { utility: NodeId, active: PathWitness },
    /// `X ⤳ U` in the reduced graph.
    Intervention { path: PathWitness },
}

impl Evidence {
    pub fn render(&self, g: &Cid) -> String {
        match self {
            Evidence::Control { path } | Evidence::Intervention { path } => path.render(g),
            Evidence::Response {
                to_observed,
                to_utility,
                active,
                ..
            } => format!(
                "{}; {}; {}",
                to_observed.render(g),
                to_utility.render(g),
                active.render(g)
            ),
            Evidence::Observation { active, .. } => active.render(g),
        }
    }
}

/// Why a verdict is negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    NoPath,
    NoUtilityDescendant,
    DescendantOfDecision,
    Separated,
}

impl Reason {
    pub fn keyword(self) -> &'static str {
        match self {
            Reason::NoPath => "no_path",
            Reason::NoUtilityDescendant => "no_utility_descendant",
            Reason::DescendantOfDecision => "descendant_of_decision",
            Reason::Separated => "separated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriterionVerdict {
    pub node: NodeId,
    pub kind: IncentiveKind,
    pub compatible: bool,
    /// Present iff `compatible`.
    pub evidence: Option<Evidence>,
    /// Present iff not `compatible`.
    pub reason: Option<Reason>,
}

impl CriterionVerdict {
    fn yes(node: NodeId, kind: IncentiveKind, evidence: Evidence) -> Self {
        CriterionVerdict {
            node,
            kind,
            compatible: true,
            evidence: Some(evidence),
            reason: None,
        }
    }

    fn no(node: NodeId, kind: IncentiveKind, reason: Reason) -> Self {
        CriterionVerdict {
            node,
            kind,
            compatible: false,
            evidence: None,
            reason: Some(reason),
        }
    }
}

fn non_decision(g: &Cid, x: NodeId) -> Result<NodeId> {
    g.check([x])?;
    g.ensure_valid()?;
    let d = g.the_decision()?;
    if x == d {
        return Err(Error::DecisionNode(g.name(x).to_string()));
    }
    Ok(d)
}

/// Shortest directed path from `x` to any utility, ties broken by utility
/// index.
fn path_to_utility(g: &Cid, x: NodeId, via: Option<NodeId>) -> Option<PathWitness> {
    g.utilities()
        .into_iter()
        .filter_map(|u| g.find_directed_path(x, u, via).ok().flatten())
        .min_by_key(|p| (p.len(), p.last()))
}

/// Compatible iff some directed path `D ⤳ X ⤳ U` exists.
pub fn control_criterion(g: &Cid, x: NodeId) -> Result<CriterionVerdict> {
    let d = non_decision(g, x)?;
    let kind = IncentiveKind::Control;
    Ok(match path_to_utility(g, d, Some(x)) {
        Some(path) => CriterionVerdict::yes(x, kind, Evidence::Control { path }),
        None => CriterionVerdict::no(x, kind, Reason::NoPath),
    })
}

/// Compatible iff some `W ∈ Pa_D` with `X ⤳ W` and some utility `U` with
/// `D ⤳ U` are d-connected given `Fa_D \ {W}`. Among the candidates the one
/// with the fewest total path edges is reported.
pub fn response_criterion(g: &Cid, x: NodeId) -> Result<CriterionVerdict> {
    let d = non_decision(g, x)?;
    let kind = IncentiveKind::Response;
    let utils = g.decision_utilities()?;
    if utils.is_empty() {
        return Ok(CriterionVerdict::no(x, kind, Reason::NoUtilityDescendant));
    }
    let mut best: Option<(usize, Evidence)> = None;
    let mut reached = false;
    for &w in g.parents(d) {
        let Some(to_observed) = g.find_directed_path(x, w, None)? else {
            continue;
        };
        reached = true;
        let zs = g.family_without(w);
        for &u in &utils {
            let Some(active) = g.find_active_path(w, u, &zs)? else {
                continue;
            };
            let to_utility = g
                .find_directed_path(d, u, None)?
                .expect("utility descends from the decision");
            let size = to_observed.len() + to_utility.len() + active.len();
            if best.as_ref().is_none_or(|(s, _)| size < *s) {
                best = Some((
                    size,
                    Evidence::Response {
                        observed: w,
                        utility: u,
                        to_observed: to_observed.clone(),
                        to_utility,
                        active,
                    },
                ));
            }
        }
    }
    Ok(match best {
        Some((_, ev)) => CriterionVerdict::yes(x, kind, ev),
        None if reached => CriterionVerdict::no(x, kind, Reason::Separated),
        None => CriterionVerdict::no(x, kind, Reason::NoPath),
    })
}

/// Compatible iff `X` is d-connected to a utility descendant of `D` given
/// `Fa_D \ {X}`. Applied to every non-descendant of the decision; for a
/// node the decision does not observe this is the value of adding the
/// observation.
pub fn observation_criterion(g: &Cid, x: NodeId) -> Result<CriterionVerdict> {
    let d = non_decision(g, x)?;
    let kind = IncentiveKind::Observation;
    if g.has_directed_path(d, x) {
        return Ok(CriterionVerdict::no(x, kind, Reason::DescendantOfDecision));
    }
    let utils = g.decision_utilities()?;
    if utils.is_empty() {
        return Ok(CriterionVerdict::no(x, kind, Reason::NoUtilityDescendant));
    }
    let zs = g.family_without(x);
    let mut best: Option<(NodeId, PathWitness)> = None;
    for &u in &utils {
        if let Some(p) = g.find_active_path(x, u, &zs)? {
            if best.as_ref().is_none_or(|(_, b)| p.len() < b.len()) {
                best = Some((u, p));
            }
        }
    }
    Ok(match best {
        Some((utility, active)) => {
            CriterionVerdict::yes(x, kind, Evidence::Observation { utility, active })
        }
        None => CriterionVerdict::no(x, kind, Reason::Separated),
    })
}

/// Compatible iff `X ⤳ U` for some utility in the reduced graph.
pub fn intervention_criterion(g: &Cid, x: NodeId) -> Result<CriterionVerdict> {
    non_decision(g, x)?;
    let kind = IncentiveKind::Intervention;
    let reduced = g.reduced_graph()?;
    Ok(match path_to_utility(&reduced, x, None) {
        Some(path) => CriterionVerdict::yes(x, kind, Evidence::Intervention { path }),
        None => CriterionVerdict::no(x, kind, Reason::NoPath),
    })
}

pub fn criterion(g: &Cid, x: NodeId, kind: IncentiveKind) -> Result<CriterionVerdict> {
    match kind {
        IncentiveKind::Control => control_criterion(g, x),
        IncentiveKind::Response => response_criterion(g, x),
        IncentiveKind::Observation => observation_criterion(g, x),
        IncentiveKind::Intervention => intervention_criterion(g, x),
    }
}

/// Every non-decision node, in declaration order, times all four kinds.
pub fn full_report(g: &Cid) -> Result<Vec<CriterionVerdict>> {
    g.ensure_valid()?;
    let d = g.the_decision()?;
    let mut out = Vec::new();
    for x in g.node_ids().filter(|&n| n != d) {
        for kind in IncentiveKind::ALL {
            out.push(criterion(g, x, kind)?);
        }
    }
    Ok(out)
}

/// Nodes marked compatible for `kind`.
pub fn marked(g: &Cid, report: &[CriterionVerdict], kind: IncentiveKind) -> Vec<String> {
    report
        .iter()
        .filter(|v| v.kind == kind && v.compatible)
        .map(|v| g.name(v.node).to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::NodeKind::*;

    fn recsys(clicks: &str, model_sees_utility: bool) -> Cid {
        let mut edges = vec![
            ("OriginalUserOpinions", "ModelOfOriginalOpinions"),
            ("ModelOfOriginalOpinions", "PostsToShow"),
            ("OriginalUserOpinions", "InfluencedUserOpinions"),
            ("PostsToShow", "InfluencedUserOpinions"),
            ("PostsToShow", clicks),
        ];
        if model_sees_utility {
            edges.push(("ModelOfOriginalOpinions", clicks));
        } else {
            edges.push(("InfluencedUserOpinions", clicks));
        }
        Cid::from_parts(
            "recsys",
            [
                ("OriginalUserOpinions", Chance),
                ("ModelOfOriginalOpinions", Chance),
                ("PostsToShow", Decision),
                ("InfluencedUserOpinions", Chance),
                (clicks, Utility),
            ],
            edges,
        )
        .unwrap()
    }

    #[test]
    fn lecture_marks() {
        let g = lecture();
        let r = full_report(&g).unwrap();
        assert_eq!(marked(&g, &r, IncentiveKind::Control), ["Attendance", "TestPerformance"]);
        assert_eq!(marked(&g, &r, IncentiveKind::Response), ["GraduateClass"]);
        let v = control_criterion(&g, g.node("StudentIllness").unwrap()).unwrap();
        assert!(!v.compatible && v.evidence.is_none());
    }

    #[test]
    fn accident_marks() {
        let g = accident();
        let r = full_report(&g).unwrap();
        assert_eq!(marked(&g, &r, IncentiveKind::Response), ["Race", "Address"]);
        assert_eq!(
            marked(&g, &r, IncentiveKind::Observation),
            ["Address", "Age", "Accident", "RecordedAccident"]
        );
        let age = response_criterion(&g, g.node("Age").unwrap()).unwrap();
        assert_eq!(age.reason, Some(Reason::NoPath));
        let race = response_criterion(&g, g.node("Race").unwrap()).unwrap();
        match race.evidence.unwrap() {
            Evidence::Response { observed, active, .. } => {
                assert_eq!(g.name(observed), "Address");
                assert_eq!(active.names(&g), ["Address", "RecordedAccident", "Accuracy"]);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn recsys_marks() {
        let a = recsys("Clicks", false);
        let r = full_report(&a).unwrap();
        assert_eq!(marked(&a, &r, IncentiveKind::Control), ["InfluencedUserOpinions", "Clicks"]);
        let b = recsys("PredictedClicks", true);
        let r = full_report(&b).unwrap();
        assert_eq!(marked(&b, &r, IncentiveKind::Control), ["PredictedClicks"]);
    }

    #[test]
    fn intervention_examples() {
        let g = lecture();
        assert!(intervention_criterion(&g, g.node("StudentIllness").unwrap()).unwrap().compatible);
        assert!(!intervention_criterion(&g, g.node("PaperReviews").unwrap()).unwrap().compatible);
    }

    #[test]
    fn decision_is_rejected() {
        let g = lecture();
        let d = g.node("LectureOnline").unwrap();
        for kind in IncentiveKind::ALL {
            assert!(matches!(criterion(&g, d, kind), Err(Error::DecisionNode(_))));
        }
    }

    #[test]
    fn no_utility_descendant() {
        let g = Cid::from_parts(
            "g",
            [("X", Chance), ("D", Decision), ("U", Utility)],
            [("X", "D"), ("X", "U")],
        )
        .unwrap();
        let x = g.node("X").unwrap();
        let v = observation_criterion(&g, x).unwrap();
        assert_eq!(v.reason, Some(Reason::NoUtilityDescendant));
    }

    #[test]
    fn kind_parsing() {
        for k in IncentiveKind::ALL {
            assert_eq!(k.keyword().parse::<IncentiveKind>().unwrap(), k);
        }
        assert!("bogus".parse::<IncentiveKind>().is_err());
    }
}
