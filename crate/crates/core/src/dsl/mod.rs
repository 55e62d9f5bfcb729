//! Text format for diagrams (`.cid`) and full models (`.scim`).
//!
//! ```text
//! cid example {
//!   chance X;
//!   decision D;
//!   utility U;
//!   edge X -> D, X -> U, D -> U;
//! }
//! scim {
//!   domain X = {lo, hi};
//!   exo X = {e0: 1/2, e1: 1/2};
//!   fn X: (exo=e0) -> lo; (exo=e1) -> hi;
//!   ...
//! }
//! ```
//!
//! Parsing reports every error it can find, each with a span; it never
//! returns a partial model.

mod lexer;
mod parser;

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::graph::{Cid, NodeId, NodeKind, Violation};
use crate::scalar::{render_rational, Rational};
use crate::scim::{decode_mixed, encode_mixed, Domain, ExoDistribution, ModelViolation, Scim, StructFn};
use parser::{Ast, Name, Parser, Row, ScimDecl};

/// 1-based position of a token or declaration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    fn new(span: SourceSpan, message: String) -> Self {
        ParseError {
            span,
            message,
            expected: Vec::new(),
        }
    }

    /// Multi-line rendering with the offending source line underlined.
    pub fn render(&self, source: &str) -> String {
        let mut out = self.to_string();
        if let Some(line) = source.lines().nth(self.span.line.saturating_sub(1)) {
            let pad = " ".repeat(self.span.column.saturating_sub(1));
            let marks = "^".repeat(self.span.length.max(1));
            let _ = write!(out, "\n  | {line}\n  | {pad}{marks}");
        }
        out
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.span;
        write!(f, "{}:{}:{}: {}", s.file, s.line, s.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// A parsed file: a bare diagram or a full model.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Cid(Cid),
    Scim(Scim<Rational>),
}

impl Model {
    pub fn graph(&self) -> &Cid {
        match self {
            Model::Cid(g) => g,
            Model::Scim(m) => m.graph(),
        }
    }

    pub fn scim(&self) -> Option<&Scim<Rational>> {
        match self {
            Model::Scim(m) => Some(m),
            Model::Cid(_) => None,
        }
    }
}

pub fn parse_model(text: &str) -> Result<Model, Vec<ParseError>> {
    parse_named("<input>", text)
}

/// Like [`parse_model`], with `file` recorded in every span.
pub fn parse_named(file: &str, text: &str) -> Result<Model, Vec<ParseError>> {
    let mut errors = Vec::new();
    let toks = lexer::lex(file, text, &mut errors);
    let mut p = Parser::new(&toks);
    let ast = p.model();
    errors.extend(p.errors);
    let model = Builder::default().build(ast, &mut errors);
    match model {
        Some(m) if errors.is_empty() => Ok(m),
        _ => Err(errors),
    }
}

#[derive(Default)]
struct Builder {
    node_span: HashMap<String, SourceSpan>,
    edge_span: HashMap<(String, String), SourceSpan>,
    decl_span: HashMap<(&'static str, String), SourceSpan>,
}

fn err(errors: &mut Vec<ParseError>, span: &SourceSpan, message: String) {
    errors.push(ParseError::new(span.clone(), message));
}

impl Builder {
    fn build(mut self, ast: Ast, errors: &mut Vec<ParseError>) -> Option<Model> {
        let name = ast.name.clone()?;
        let graph = self.graph(&name, &ast, errors)?;
        let Some((kw, decls)) = ast.scim else {
            return Some(Model::Cid(graph));
        };
        self.scim(graph, &kw, decls, errors).map(Model::Scim)
    }

    fn graph(&mut self, name: &Name, ast: &Ast, errors: &mut Vec<ParseError>) -> Option<Cid> {
        let mut g = Cid::new(name.text.clone());
        let before = errors.len();
        for n in &ast.nodes {
            if n.name.text == "exo" {
                err(errors, &n.name.span, "`exo` is reserved and cannot name a node".into());
            } else if self.node_span.contains_key(&n.name.text) {
                err(errors, &n.name.span, format!("duplicate node `{}`", n.name.text));
            } else {
                g.add_node(&n.name.text, n.kind).expect("lexer yields identifiers");
                self.node_span.insert(n.name.text.clone(), n.name.span.clone());
            }
        }
        for e in &ast.edges {
            let (Some(a), Some(b)) = (self.lookup(&g, &e.from, errors), self.lookup(&g, &e.to, errors)) else {
                continue;
            };
            if a == b {
                err(errors, &e.span, format!("self-loop on `{}`", e.from.text));
            } else if g.add_edge(a, b).is_err() {
                err(errors, &e.span, format!("duplicate edge {} -> {}", e.from.text, e.to.text));
            } else {
                self.edge_span.insert((e.from.text.clone(), e.to.text.clone()), e.span.clone());
            }
        }
        for v in g.validate() {
            let span = match &v {
                Violation::Cycle(nodes) => {
                    let key = (nodes[nodes.len() - 1].clone(), nodes[0].clone());
                    self.edge_span.get(&key).unwrap_or(&name.span)
                }
                Violation::UtilityHasChild { utility, child } => {
                    self.edge_span.get(&(utility.clone(), child.clone())).unwrap_or(&name.span)
                }
                Violation::SelfLoop(_) | Violation::DecisionCount(_) => &name.span,
            };
            err(errors, span, v.to_string());
        }
        (errors.len() == before).then_some(g)
    }

    fn lookup(&self, g: &Cid, n: &Name, errors: &mut Vec<ParseError>) -> Option<NodeId> {
        match g.node(&n.text) {
            Ok(id) => Some(id),
            Err(_) => {
                err(errors, &n.span, format!("unknown node `{}`", n.text));
                None
            }
        }
    }

    fn scim(
        &mut self,
        g: Cid,
        kw: &SourceSpan,
        decls: Vec<(ScimDecl, SourceSpan)>,
        errors: &mut Vec<ParseError>,
    ) -> Option<Scim<Rational>> {
        let before = errors.len();
        let n = g.len();
        let mut domains: Vec<Option<Vec<String>>> = vec![None; n];
        let mut exos: Vec<Option<(Vec<String>, Vec<Rational>)>> = vec![None; n];
        let mut values: Vec<Option<Vec<(Name, Rational)>>> = vec![None; n];
        let mut fns: Vec<Option<Vec<Row>>> = (0..n).map(|_| None).collect();
        for (decl, span) in decls {
            let (key, node) = match &decl {
                ScimDecl::Domain { node, .. } => ("domain", node.clone()),
                ScimDecl::Exo { node, .. } => ("exo", node.clone()),
                ScimDecl::Fn { node, .. } => ("fn", node.clone()),
                ScimDecl::Value { node, .. } => ("value", node.clone()),
            };
            let node = &node;
            let Some(id) = self.lookup(&g, node, errors) else { continue };
            if self.decl_span.contains_key(&(key, node.text.clone())) {
                err(errors, &span, format!("duplicate `{key}` declaration for `{}`", node.text));
                continue;
            }
            self.decl_span.insert((key, node.text.clone()), span.clone());
            match decl {
                ScimDecl::Domain { values: vs, .. } => {
                    domains[id.0] = Some(vs.into_iter().map(|v| v.text).collect());
                }
                ScimDecl::Exo { entries, .. } => {
                    exos[id.0] = Some(entries.into_iter().map(|(k, p)| (k.text, p)).unzip());
                }
                ScimDecl::Value { entries, .. } => {
                    if g.kind(id) != NodeKind::Utility {
                        err(errors, &span, format!("`value` applies to utility nodes only, `{}` is not one", node.text));
                    }
                    values[id.0] = Some(entries);
                }
                ScimDecl::Fn { rows, .. } => {
                    if g.kind(id) == NodeKind::Decision {
                        err(errors, &span, ModelViolation::DecisionHasFunction(node.text.clone()).to_string());
                    }
                    fns[id.0] = Some(rows);
                }
            }
        }
        for id in g.node_ids() {
            let name = g.name(id);
            if domains[id.0].is_none() {
                err(errors, kw, format!("missing `domain` for `{name}`"));
            }
            if exos[id.0].is_none() {
                err(errors, kw, format!("missing `exo` for `{name}`"));
            }
            if g.kind(id) != NodeKind::Decision && fns[id.0].is_none() {
                err(errors, kw, format!("missing `fn` for `{name}`"));
            }
            if g.kind(id) == NodeKind::Utility && values[id.0].is_none() {
                err(errors, kw, format!("missing `value` for `{name}`"));
            }
        }
        if errors.len() > before {
            return None;
        }
        let domains: Vec<Vec<String>> = domains.into_iter().map(Option::unwrap).collect();
        let exos: Vec<(Vec<String>, Vec<Rational>)> = exos.into_iter().map(Option::unwrap).collect();

        let mut doms: Vec<Domain<Rational>> = domains.iter().map(|d| Domain::symbolic(d.clone())).collect();
        for id in g.node_ids() {
            let Some(entries) = &values[id.0] else { continue };
            let mut numeric: Vec<Option<Rational>> = vec![None; doms[id.0].len()];
            for (k, v) in entries {
                match doms[id.0].index_of(&k.text) {
                    None => err(errors, &k.span, format!("`{}` is not a value of `{}`", k.text, g.name(id))),
                    Some(i) if numeric[i as usize].is_some() => {
                        err(errors, &k.span, format!("duplicate numeric value for `{}`", k.text))
                    }
                    Some(i) => numeric[i as usize] = Some(v.clone()),
                }
            }
            if let Some(i) = numeric.iter().position(Option::is_none) {
                let span = &self.decl_span[&("value", g.name(id).to_string())];
                err(errors, span, format!("no numeric value for `{}` of `{}`", domains[id.0][i], g.name(id)));
                continue;
            }
            doms[id.0].numeric = Some(numeric.into_iter().map(Option::unwrap).collect());
        }

        let mut tables: Vec<Option<StructFn>> = vec![None; n];
        for id in g.node_ids() {
            let Some(rows) = &fns[id.0] else { continue };
            if g.kind(id) == NodeKind::Decision {
                continue;
            }
            let fn_span = self.decl_span[&("fn", g.name(id).to_string())].clone();
            tables[id.0] = Some(self.table(&g, id, rows, &domains, &exos[id.0].0, &fn_span, errors));
        }
        if errors.len() > before {
            return None;
        }
        let exo = exos
            .into_iter()
            .map(|(values, probs)| ExoDistribution { values, probs })
            .collect();
        let model = Scim::from_parts(g, doms, exo, tables);
        for v in model.validate() {
            let span = self.violation_span(&v).unwrap_or(kw).clone();
            err(errors, &span, v.to_string());
        }
        (errors.len() == before).then_some(model)
    }

    #[allow(clippy::too_many_arguments)]
    fn table(
        &self,
        g: &Cid,
        id: NodeId,
        rows: &[Row],
        domains: &[Vec<String>],
        exo: &[String],
        fn_span: &SourceSpan,
        errors: &mut Vec<ParseError>,
    ) -> StructFn {
        let parents = g.parents(id);
        let radices: Vec<usize> = parents.iter().map(|p| domains[p.0].len()).collect();
        let combos: usize = radices.iter().product();
        let mut table = vec![None; combos * exo.len()];
        let index_in = |vals: &[String], v: &Name| vals.iter().position(|x| *x == v.text);
        'rows: for row in rows {
            let mut digits = vec![None; parents.len()];
            for (k, v) in &row.assigns {
                let Some(slot) = parents.iter().position(|&p| g.name(p) == k.text) else {
                    err(errors, &k.span, format!("`{}` is not a parent of `{}`", k.text, g.name(id)));
                    continue 'rows;
                };
                if digits[slot].is_some() {
                    err(errors, &k.span, format!("parent `{}` assigned twice", k.text));
                    continue 'rows;
                }
                match index_in(&domains[parents[slot].0], v) {
                    Some(i) => digits[slot] = Some(i),
                    None => {
                        err(errors, &v.span, format!("`{}` is not a value of `{}`", v.text, k.text));
                        continue 'rows;
                    }
                }
            }
            if let Some(missing) = digits.iter().position(Option::is_none) {
                err(errors, &row.span, format!("row does not assign parent `{}`", g.name(parents[missing])));
                continue;
            }
            let Some(e) = index_in(exo, &row.exo) else {
                err(errors, &row.exo.span, format!("`{}` is not an exogenous value of `{}`", row.exo.text, g.name(id)));
                continue;
            };
            let Some(out) = index_in(&domains[id.0], &row.out) else {
                err(errors, &row.out.span, format!("`{}` is not a value of `{}`", row.out.text, g.name(id)));
                continue;
            };
            let combo = encode_mixed(digits.iter().map(|d| d.unwrap() as u32), &radices);
            let slot = &mut table[combo * exo.len() + e];
            if slot.is_some() {
                err(errors, &row.span, "duplicate row".into());
                continue;
            }
            *slot = Some(out as u32);
        }
        let missing = table.iter().filter(|r| r.is_none()).count();
        if missing > 0 {
            let first = table.iter().position(Option::is_none).unwrap();
            let mut vals = vec![0u32; parents.len()];
            decode_mixed(first / exo.len(), &radices, &mut vals);
            let mut desc: Vec<String> = parents
                .iter()
                .zip(&vals)
                .map(|(p, &v)| format!("{}={}", g.name(*p), domains[p.0][v as usize]))
                .collect();
            desc.push(format!("exo={}", exo[first % exo.len()]));
            err(
                errors,
                fn_span,
                format!(
                    "{}, first missing row ({})",
                    ModelViolation::PartialFunction {
                        node: g.name(id).to_string(),
                        missing
                    },
                    desc.join(", ")
                ),
            );
        }
        StructFn { rows: table }
    }

    fn violation_span(&self, v: &ModelViolation) -> Option<&SourceSpan> {
        use ModelViolation::*;
        let (key, node) = match v {
            EmptyDomain(n) | DuplicateValue { node: n, .. } => ("domain", n),
            MissingNumeric(n) => ("value", n),
            EmptyExogenous(n) | NegativeProbability(n) | NotNormalized { node: n, .. } => ("exo", n),
            MissingFunction(n) | DecisionHasFunction(n) => ("fn", n),
            TableShape { node, .. } | PartialFunction { node, .. } | OutputOutsideDomain { node, .. } => ("fn", node),
            Graph(_) | ShapeMismatch(_) => return None,
        };
        self.decl_span.get(&(key, node.clone())).or_else(|| self.node_span.get(node))
    }
}

/// Canonical text of a bare diagram.
pub fn serialize_cid(g: &Cid) -> String {
    let mut out = String::new();
    write_cid(&mut out, g);
    out
}

fn write_cid(out: &mut String, g: &Cid) {
    let _ = writeln!(out, "cid {} {{", g.graph_name());
    let ids: Vec<NodeId> = g.node_ids().collect();
    for run in ids.chunk_by(|a, b| g.kind(*a) == g.kind(*b)) {
        let names: Vec<&str> = run.iter().map(|&n| g.name(n)).collect();
        let _ = writeln!(out, "  {} {};", g.kind(run[0]).keyword(), names.join(", "));
    }
    for run in g.edges().chunk_by(|a, b| a.0 == b.0) {
        let items: Vec<String> = run
            .iter()
            .map(|&(a, b)| format!("{} -> {}", g.name(a), g.name(b)))
            .collect();
        let _ = writeln!(out, "  edge {};", items.join(", "));
    }
    out.push_str("}\n");
}

/// Canonical text of a model. Parsing it back yields an equal model.
pub fn serialize_scim(m: &Scim<Rational>) -> String {
    let g = m.graph();
    let mut out = String::new();
    write_cid(&mut out, g);
    out.push_str("scim {\n");
    for id in g.node_ids() {
        let name = g.name(id);
        let dom = m.domain(id);
        let _ = writeln!(out, "  domain {name} = {{{}}};", dom.values.join(", "));
        let exo = m.exo(id);
        let entries: Vec<String> = exo
            .values
            .iter()
            .zip(&exo.probs)
            .map(|(v, p)| format!("{v}: {}", render_rational(p)))
            .collect();
        let _ = writeln!(out, "  exo {name} = {{{}}};", entries.join(", "));
        if let Some(numeric) = &dom.numeric {
            let entries: Vec<String> = dom
                .values
                .iter()
                .zip(numeric)
                .map(|(v, x)| format!("{v}: {}", render_rational(x)))
                .collect();
            let _ = writeln!(out, "  value {name} {{{}}};", entries.join(", "));
        }
        if let Some(f) = m.function(id) {
            let _ = writeln!(out, "  fn {name}:");
            let parents = g.parents(id);
            let radices = m.parent_radices(id);
            let mut vals = vec![0u32; parents.len()];
            for (r, v) in f.rows.iter().enumerate() {
                let Some(v) = v else { continue };
                decode_mixed(r / exo.len(), &radices, &mut vals);
                let mut items: Vec<String> = parents
                    .iter()
                    .zip(&vals)
                    .map(|(&p, &x)| format!("{}={}", g.name(p), m.value_name(p, x)))
                    .collect();
                items.push(format!("exo={}", exo.values[r % exo.len()]));
                let _ = writeln!(out, "    ({}) -> {};", items.join(", "), m.value_name(id, *v));
            }
        }
    }
    out.push_str("}\n");
    out
}

pub fn serialize_model(model: &Model) -> String {
    match model {
        Model::Cid(g) => serialize_cid(g),
        Model::Scim(m) => serialize_scim(m),
    }
}

/// Prefixes `text` with `# `-comment lines.
pub fn with_header(header: &[String], text: &str) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str(text);
    out
}
