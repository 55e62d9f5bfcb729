//! DOT diagrams and JSON reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::criteria::{CriterionVerdict, IncentiveKind};
use crate::graph::{Cid, NodeKind};
use crate::scalar::Scalar;
use crate::semantics::{SemanticVerdict, Status};

pub const SCHEMA: &str = "incent/1";

const CONTROL_FILL: &str = "#f4a582";
const RESPONSE_FILL: &str = "#92c5de";
const OBSERVATION_PEN: &str = "#1b7837";

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz digraph. Decisions are boxes, utilities diamonds, chance nodes
/// ellipses; edges into the decision are dashed. Positive verdicts in
/// `report` fill the node (control, response), thicken its outline
/// (observation) or double it (intervention).
pub fn export_dot(g: &Cid, report: &[CriterionVerdict]) -> String {
    let marked = |n, k| report.iter().any(|v| v.node == n && v.kind == k && v.compatible);
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(g.graph_name()));
    out.push_str("  node [fontname=\"Helvetica\"];\n");
    for n in g.node_ids() {
        let shape = match g.kind(n) {
            NodeKind::Chance => "ellipse",
            NodeKind::Decision => "box",
            NodeKind::Utility => "diamond",
        };
        let mut attrs = vec![format!("shape={shape}")];
        let fills: Vec<&str> = [
            (IncentiveKind::Control, CONTROL_FILL),
            (IncentiveKind::Response, RESPONSE_FILL),
        ]
        .into_iter()
        .filter(|&(k, _)| marked(n, k))
        .map(|(_, c)| c)
        .collect();
        let mut style = Vec::new();
        match fills.as_slice() {
            [] => {}
            [one] => {
                style.push("filled");
                attrs.push(format!("fillcolor={}", quote(one)));
            }
            many => {
                style.push("striped");
                attrs.push(format!("fillcolor={}", quote(&many.join(":"))));
            }
        }
        if marked(n, IncentiveKind::Observation) {
            attrs.push(format!("color={}", quote(OBSERVATION_PEN)));
            attrs.push("penwidth=3".to_string());
        }
        if marked(n, IncentiveKind::Intervention) {
            attrs.push("peripheries=2".to_string());
        }
        if !style.is_empty() {
            attrs.push(format!("style={}", quote(&style.join(","))));
        }
        let _ = writeln!(out, "  {} [{}];", quote(g.name(n)), attrs.join(", "));
    }
    for &(a, b) in g.edges() {
        let style = if g.kind(b) == NodeKind::Decision { " [style=dashed]" } else { "" };
        let _ = writeln!(out, "  {} -> {}{style};", quote(g.name(a)), quote(g.name(b)));
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize)]
struct Report<'a> {
    schema: &'static str,
    model: &'a str,
    nodes: Vec<NodeEntry<'a>>,
}

#[derive(Serialize)]
struct NodeEntry<'a> {
    name: &'a str,
    kind: &'static str,
    incentives: Incentives,
}

#[derive(Serialize, Default)]
struct Incentives {
    #[serde(skip_serializing_if = "Option::is_none")]
    control: Option<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    observation: Option<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intervention: Option<Entry>,
}

impl Incentives {
    fn slot(&mut self, k: IncentiveKind) -> &mut Option<Entry> {
        match k {
            IncentiveKind::Control => &mut self.control,
            IncentiveKind::Response => &mut self.response,
            IncentiveKind::Observation => &mut self.observation,
            IncentiveKind::Intervention => &mut self.intervention,
        }
    }
}

#[derive(Serialize, Default)]
struct Entry {
    #[serde(skip_serializing_if = "Option::is_none")]
    graphical: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    evidence: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blocked: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    semantic: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimal_policies: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refuting_policy: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    all_settings: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<[String; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    soft: Option<Vec<u32>>,
}

/// Stable-key JSON report. Scalars are rendered as strings (`"p/q"` for
/// exact ones).
pub fn export_report_json<T: Scalar>(
    g: &Cid,
    graphical: &[CriterionVerdict],
    semantic: Option<&[SemanticVerdict<T>]>,
) -> String {
    let nodes = g
        .node_ids()
        .map(|n| {
            let mut inc = Incentives::default();
            for v in graphical.iter().filter(|v| v.node == n) {
                let e = inc.slot(v.kind).get_or_insert_with(Entry::default);
                e.graphical = Some(v.compatible);
                e.evidence = v.evidence.as_ref().map(|ev| ev.render(g));
                e.blocked = v.reason.map(|r| r.keyword());
            }
            for v in semantic.unwrap_or(&[]).iter().filter(|v| v.node == n) {
                let e = inc.slot(v.kind).get_or_insert_with(Entry::default);
                match &v.status {
                    Status::Undecided { cap, .. } => {
                        e.semantic = Some("undecided".into());
                        e.reason = Some("cap_exceeded");
                        e.cap = Some(*cap);
                    }
                    s => {
                        e.semantic = Some(s.present().unwrap().into());
                        e.reason = v.reason;
                    }
                }
                e.optimal_policies = v.optimal_count.as_ref().map(|c| c.to_string());
                e.refuting_policy = v.refuting_policy.as_ref().map(|p| p.table().to_vec());
                e.all_settings = v.all_settings;
                e.values = v.values.as_ref().map(|(a, b)| [a.render(), b.render()]);
                e.soft = v.soft.clone();
            }
            NodeEntry {
                name: g.name(n),
                kind: g.kind(n).keyword(),
                incentives: inc,
            }
        })
        .collect();
    let report = Report {
        schema: SCHEMA,
        model: g.graph_name(),
        nodes,
    };
    let mut s = serde_json::to_string_pretty(&report).expect("plain data");
    s.push('\n');
    s
}
