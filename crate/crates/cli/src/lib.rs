//! Command implementations behind the `incent` binary. Every command
//! returns its exit code and output instead of touching the process, so
//! tests can drive it in-process.

use std::fmt::Write as _;
use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use incent_core::criteria::{criterion, full_report, CriterionVerdict};
use incent_core::dsl::{parse_named, serialize_cid, serialize_scim, with_header, Model};
use incent_core::export::{export_dot, export_report_json, SCHEMA};
use incent_core::fairness::{exists_fair_optimal_policy, is_counterfactually_fair};
use incent_core::policy::{optimal_policy_set, q_table, ContextSpace};
use incent_core::random::{random_cid, random_scim, rng, ScimShape};
use incent_core::scalar::Scalar;
use incent_core::semantics::{semantic, semantic_report, SemanticVerdict, Status, DEFAULT_POLICY_CAP, DEFAULT_SOFT_CAP};
use incent_core::witness::{build_control_witness, build_response_witness};
use incent_core::{Cid, Error, ExactScim, IncentiveKind, NodeId, Policy, Rational};

pub const EXIT_ABSENT: i32 = 0;
pub const EXIT_PRESENT: i32 = 10;
pub const EXIT_UNDECIDED: i32 = 11;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CRITERION: i32 = 12;

#[derive(Parser, Debug)]
#[command(name = "incent", version, about = "Incentive analysis for causal influence diagrams")]
pub struct Cli {
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide one incentive for one node.
    Check {
        input: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long)]
        incentive: Kind,
        /// Defaults to `both` for models and `graphical` for diagrams.
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        caps: Caps,
    },
    /// Every incentive for every node.
    Analyze {
        input: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        caps: Caps,
    },
    /// Build a model exhibiting a control or response incentive.
    Witness {
        input: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long)]
        incentive: Kind,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Counterfactual fairness of optimal policies towards an attribute.
    Fair {
        input: PathBuf,
        #[arg(long)]
        attribute: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        caps: Caps,
    },
    /// Q-table and optimal policies.
    OptimalPolicy {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Turn a diagram into a model with binary domains and uniform noise.
    Promote {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Seeded random diagram or model.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        max_nodes: usize,
        /// Emit a full model instead of a bare diagram.
        #[arg(long)]
        scim: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Caps {
    /// Upper bound on enumerated policies.
    #[arg(long, default_value_t = DEFAULT_POLICY_CAP, value_parser = positive)]
    pub policy_cap: usize,
    /// Upper bound on enumerated soft interventions.
    #[arg(long, default_value_t = DEFAULT_SOFT_CAP, value_parser = positive)]
    pub soft_cap: usize,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Control,
    Response,
    Observation,
    Intervention,
}

impl From<Kind> for IncentiveKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Control => IncentiveKind::Control,
            Kind::Response => IncentiveKind::Response,
            Kind::Observation => IncentiveKind::Observation,
            Kind::Intervention => IncentiveKind::Intervention,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Graphical,
    Semantic,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Dot,
}

/// Result of one invocation.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(code: i32, stdout: String) -> Self {
        Outcome {
            code,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Outcome {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

type Run = Result<Outcome, Outcome>;

fn usage(message: impl Into<String>) -> Outcome {
    Outcome::fail(EXIT_USAGE, format!("error: {}", message.into()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome::fail(code, text)
            } else {
                Outcome::ok(code, text)
            };
        }
    };
    let color = std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stdout().is_terminal();
    let style = Style { color };
    let threads = cli.threads;
    let go = move || execute(cli.command, style).unwrap_or_else(|e| e);
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(go),
        Err(e) => usage(format!("cannot start thread pool: {e}")),
    }
}

#[derive(Clone, Copy)]
struct Style {
    color: bool,
}

impl Style {
    fn paint(&self, present: Option<bool>, text: &str) -> String {
        if !self.color {
            return text.to_string();
        }
        let code = match present {
            Some(true) => "32",
            Some(false) => "2",
            None => "33",
        };
        format!("\x1b[{code}m{text}\x1b[0m")
    }
}

fn execute(command: Command, style: Style) -> Run {
    match command {
        Command::Check {
            input,
            node,
            incentive,
            mode,
            format,
            caps,
        } => check(&input, &node, incentive.into(), mode, format, caps, style),
        Command::Analyze {
            input,
            mode,
            format,
            output,
            caps,
        } => {
            let out = analyze(&input, mode, format, caps, style)?;
            write_or_print(out, output.as_deref())
        }
        Command::Witness {
            input,
            node,
            incentive,
            output,
        } => {
            let out = witness(&input, &node, incentive.into())?;
            write_or_print(out, output.as_deref())
        }
        Command::Fair {
            input,
            attribute,
            format,
            caps,
        } => fair(&input, &attribute, format, caps, style),
        Command::OptimalPolicy { input, format } => optimal(&input, format),
        Command::Promote { input, output } => {
            let model = load(&input)?;
            let m = ExactScim::promote(model.graph().clone()).map_err(core)?;
            write_or_print(Outcome::ok(0, serialize_scim(&m)), output.as_deref())
        }
        Command::Generate {
            seed,
            max_nodes,
            scim,
            output,
        } => {
            if max_nodes < 3 {
                return Err(usage("--max-nodes must be at least 3"));
            }
            let g = random_cid(&mut rng(seed), max_nodes);
            let text = if scim {
                serialize_scim(&random_scim(&mut rng(seed.wrapping_add(1)), &g, ScimShape::default()))
            } else {
                serialize_cid(&g)
            };
            write_or_print(Outcome::ok(0, with_header(&[format!("seed {seed}")], &text)), output.as_deref())
        }
    }
}

fn write_or_print(out: Outcome, path: Option<&Path>) -> Run {
    match path {
        None => Ok(out),
        Some(p) => {
            fs::write(p, &out.stdout).map_err(|e| usage(format!("cannot write {}: {e}", p.display())))?;
            Ok(Outcome {
                stdout: String::new(),
                ..out
            })
        }
    }
}

fn load(path: &Path) -> Result<Model, Outcome> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_named(&path.display().to_string(), &text).map_err(|errors| {
        let mut msg = String::new();
        for e in &errors {
            let _ = writeln!(msg, "error: {}", e.render(&text));
        }
        Outcome::fail(EXIT_USAGE, msg)
    })
}

fn require_scim(model: Model) -> Result<ExactScim, Outcome> {
    match model {
        Model::Scim(m) => Ok(m),
        Model::Cid(_) => Err(usage("this command requires a scim")),
    }
}

fn node(g: &Cid, name: &str) -> Result<NodeId, Outcome> {
    let id = g.node(name).map_err(|e| usage(e.to_string()))?;
    if Some(id) == g.decision() {
        return Err(usage(Error::DecisionNode(name.to_string()).to_string()));
    }
    Ok(id)
}

fn core(e: Error) -> Outcome {
    usage(e.to_string())
}

fn status_word(s: &Status) -> &'static str {
    match s {
        Status::Present => "present",
        Status::Absent => "absent",
        Status::Undecided { .. } => "undecided",
    }
}

fn semantic_json<T: Scalar>(v: &SemanticVerdict<T>) -> serde_json::Value {
    let mut o = serde_json::Map::new();
    match &v.status {
        Status::Undecided { count, cap } => {
            o.insert("semantic".into(), json!("undecided"));
            o.insert("reason".into(), json!("cap_exceeded"));
            o.insert("count".into(), json!(count.to_string()));
            o.insert("cap".into(), json!(cap));
        }
        s => {
            o.insert("semantic".into(), json!(s.present().unwrap()));
            if let Some(r) = v.reason {
                o.insert("reason".into(), json!(r));
            }
        }
    }
    if let Some(c) = &v.optimal_count {
        o.insert("optimal_policies".into(), json!(c.to_string()));
    }
    if let Some(p) = &v.refuting_policy {
        o.insert("refuting_policy".into(), json!(p.table()));
    }
    if let Some(a) = v.all_settings {
        o.insert("all_settings".into(), json!(a));
    }
    if let Some((a, b)) = &v.values {
        o.insert("values".into(), json!([a.render(), b.render()]));
    }
    if let Some(s) = &v.soft {
        o.insert("soft".into(), json!(s));
    }
    serde_json::Value::Object(o)
}

fn semantic_text<T: Scalar>(v: &SemanticVerdict<T>) -> Vec<String> {
    let mut out = Vec::new();
    match &v.status {
        Status::Undecided { count, cap } => {
            out.push(format!("undecided: {count} candidates exceed the cap of {cap}"));
        }
        _ => {
            if let Some(r) = v.reason {
                out.push(format!("reason: {}", r.replace('_', " ")));
            }
        }
    }
    if let Some(c) = &v.optimal_count {
        out.push(format!("optimal policies: {c}"));
    }
    if let Some(p) = &v.refuting_policy {
        out.push(format!("optimal policy without the incentive: {:?}", p.table()));
    }
    if let Some((a, b)) = &v.values {
        out.push(format!("optimal value without/with: {} / {}", a.render(), b.render()));
    }
    if let Some(s) = &v.soft {
        out.push(format!("improving replacement table: {s:?}"));
    }
    out
}

fn resolve_mode(mode: Option<Mode>, model: &Model) -> Result<Mode, Outcome> {
    match (mode, model) {
        (Some(Mode::Semantic | Mode::Both), Model::Cid(_)) => Err(usage("semantic mode requires a scim")),
        (Some(m), _) => Ok(m),
        (None, Model::Cid(_)) => Ok(Mode::Graphical),
        (None, Model::Scim(_)) => Ok(Mode::Both),
    }
}

fn check(
    input: &Path,
    name: &str,
    kind: IncentiveKind,
    mode: Option<Mode>,
    format: Format,
    caps: Caps,
    style: Style,
) -> Run {
    if format == Format::Dot {
        return Err(usage("check supports text and json"));
    }
    let model = load(input)?;
    let mode = resolve_mode(mode, &model)?;
    let g = model.graph();
    let x = node(g, name)?;
    let graphical = (mode != Mode::Semantic).then(|| criterion(g, x, kind)).transpose().map_err(core)?;
    let sem = match (mode, model.scim()) {
        (Mode::Graphical, _) | (_, None) => None,
        (_, Some(m)) => Some(semantic(m, x, kind, caps.policy_cap, caps.soft_cap).map_err(core)?),
    };
    let verdict = match (&sem, &graphical) {
        (Some(s), _) => s.status.present(),
        (None, Some(c)) => Some(c.compatible),
        (None, None) => unreachable!(),
    };
    let code = match verdict {
        Some(true) => EXIT_PRESENT,
        Some(false) => EXIT_ABSENT,
        None => EXIT_UNDECIDED,
    };
    let word = match verdict {
        Some(true) => "present",
        Some(false) => "absent",
        None => "undecided",
    };
    let stdout = match format {
        Format::Json => {
            let mut o = json!({
                "schema": SCHEMA,
                "model": g.graph_name(),
                "node": name,
                "incentive": kind.keyword(),
                "verdict": word,
            });
            if let Some(c) = &graphical {
                o["graphical"] = graphical_json(g, c);
            }
            if let Some(s) = &sem {
                o["semantic"] = semantic_json(s);
            }
            pretty(&o)
        }
        _ => {
            let mut out = format!("{name}: {kind} incentive {}\n", style.paint(verdict, word));
            if let Some(c) = &graphical {
                let _ = writeln!(out, "  graphical: {}", if c.compatible { "satisfied" } else { "not satisfied" });
                if let Some(e) = &c.evidence {
                    let _ = writeln!(out, "    evidence: {}", e.render(g));
                }
                if let Some(r) = c.reason {
                    let _ = writeln!(out, "    reason: {}", r.keyword().replace('_', " "));
                }
            }
            if let Some(s) = &sem {
                let _ = writeln!(out, "  semantic: {}", status_word(&s.status));
                for line in semantic_text(s) {
                    let _ = writeln!(out, "    {line}");
                }
            }
            out
        }
    };
    Ok(Outcome::ok(code, stdout))
}

fn graphical_json(g: &Cid, c: &CriterionVerdict) -> serde_json::Value {
    let mut o = json!({ "satisfied": c.compatible });
    if let Some(e) = &c.evidence {
        o["evidence"] = json!(e.render(g));
    }
    if let Some(r) = c.reason {
        o["reason"] = json!(r.keyword());
    }
    o
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data");
    s.push('\n');
    s
}

fn analyze(input: &Path, mode: Option<Mode>, format: Format, caps: Caps, style: Style) -> Run {
    let model = load(input)?;
    let mode = resolve_mode(mode, &model)?;
    let g = model.graph();
    let graphical = if mode == Mode::Semantic { Vec::new() } else { full_report(g).map_err(core)? };
    let sem = match (mode, model.scim()) {
        (Mode::Graphical, _) | (_, None) => None,
        (_, Some(m)) => Some(semantic_report(m, caps.policy_cap, caps.soft_cap).map_err(core)?),
    };
    let stdout = match format {
        Format::Dot => export_dot(g, &graphical),
        Format::Json => export_report_json(g, &graphical, sem.as_deref()),
        Format::Text => analyze_text(g, &graphical, sem.as_deref(), style),
    };
    Ok(Outcome::ok(EXIT_ABSENT, stdout))
}

fn analyze_text(g: &Cid, graphical: &[CriterionVerdict], sem: Option<&[SemanticVerdict<Rational>]>, style: Style) -> String {
    let width = g.node_ids().map(|n| g.name(n).len()).max().unwrap_or(4).max(4);
    let mut out = format!("model {}\n", g.graph_name());
    let _ = write!(out, "{:width$}  {:8}", "node", "kind");
    for k in IncentiveKind::ALL {
        let _ = write!(out, "  {:14}", k.keyword());
    }
    let trimmed = out.trim_end_matches(' ').len();
    out.truncate(trimmed);
    out.push('\n');
    for n in g.node_ids() {
        let _ = write!(out, "{:width$}  {:8}", g.name(n), g.kind(n).keyword());
        for k in IncentiveKind::ALL {
            let gr = graphical.iter().find(|v| v.node == n && v.kind == k).map(|v| v.compatible);
            let se = sem.and_then(|s| s.iter().find(|v| v.node == n && v.kind == k));
            let mut cell = Vec::new();
            if let Some(b) = gr {
                cell.push(if b { "yes" } else { "no" }.to_string());
            }
            if let Some(v) = se {
                cell.push(match v.status.present() {
                    Some(true) => "yes".into(),
                    Some(false) => "no".into(),
                    None => "?".into(),
                });
            }
            let text = if cell.is_empty() { "-".to_string() } else { cell.join("/") };
            let verdict = se.map_or(gr, |v| v.status.present());
            let pad = " ".repeat(14usize.saturating_sub(text.len()));
            let shown = if cell.is_empty() { text } else { style.paint(verdict, &text) };
            let _ = write!(out, "  {shown}{pad}");
        }
        let trimmed = out.trim_end_matches(' ').len();
        out.truncate(trimmed);
        out.push('\n');
    }
    let legend = match (graphical.is_empty(), sem.is_some()) {
        (false, true) => "cells: graphical/semantic; ? = undecided within caps",
        (false, false) => "cells: graphical criterion",
        _ => "cells: semantic; ? = undecided within caps",
    };
    let _ = writeln!(out, "{legend}");
    out
}

fn witness(input: &Path, name: &str, kind: IncentiveKind) -> Run {
    let model = load(input)?;
    let g = model.graph();
    let x = node(g, name)?;
    let built = match kind {
        IncentiveKind::Control => build_control_witness::<Rational>(g, x),
        IncentiveKind::Response => build_response_witness::<Rational>(g, x),
        _ => return Err(usage("witnesses exist for control and response incentives only")),
    };
    match built {
        Ok(w) => {
            let text = with_header(&w.plan.describe(g), &serialize_scim(&w.model));
            Ok(Outcome::ok(0, text))
        }
        Err(e @ Error::CriterionNotSatisfied { .. }) => Err(Outcome::fail(EXIT_CRITERION, format!("error: {e}"))),
        Err(e) => Err(core(e)),
    }
}

fn render_policy(m: &ExactScim, p: &Policy) -> Vec<String> {
    let space = ContextSpace::of(m);
    let d = m.decision();
    let exo = m.exo(d);
    (0..space.count())
        .map(|c| {
            let ctx = m.render_assignment(&space.assignment(c));
            let ctx = if ctx.is_empty() { "(no parents)".to_string() } else { ctx };
            let choice = if space.exo_len == 1 {
                m.value_name(d, p.decide(c, 0)).to_string()
            } else {
                let parts: Vec<String> = (0..space.exo_len)
                    .map(|e| format!("{}: {}", exo.values[e], m.value_name(d, p.decide(c, e as u32))))
                    .collect();
                format!("[{}]", parts.join(", "))
            };
            format!("{ctx} -> {choice}")
        })
        .collect()
}

fn fair(input: &Path, attribute: &str, format: Format, caps: Caps, style: Style) -> Run {
    if format == Format::Dot {
        return Err(usage("fair supports text and json"));
    }
    let m = require_scim(load(input)?)?;
    let a = node(m.graph(), attribute)?;
    let verdict = exists_fair_optimal_policy(&m, a, caps.policy_cap).map_err(core)?;
    let set = optimal_policy_set(&m).map_err(core)?;
    let listed = set.enumerate(caps.policy_cap).ok();
    let mut per_policy = Vec::new();
    for p in listed.iter().flatten() {
        per_policy.push((p.clone(), is_counterfactually_fair(&m, p, a).map_err(core)?));
    }
    let code = match verdict.exists {
        Some(true) => EXIT_ABSENT,
        Some(false) => EXIT_PRESENT,
        None => EXIT_UNDECIDED,
    };
    let d = m.decision();
    let space = ContextSpace::of(&m);
    let stdout = match format {
        Format::Json => {
            let policies: Vec<serde_json::Value> = per_policy
                .iter()
                .map(|(p, f)| {
                    let mut o = json!({ "table": p.table(), "fair": f.fair });
                    if let Some(v) = &f.violation {
                        o["violation"] = json!({
                            "context": m.render_assignment(&space.assignment(v.context)),
                            "observed": m.value_name(a, v.observed),
                            "intervened": m.value_name(a, v.intervened),
                            "decision": m.value_name(d, v.decision),
                            "factual": v.factual.render(),
                            "counterfactual": v.counterfactual.render(),
                        });
                    }
                    o
                })
                .collect();
            let mut o = json!({
                "schema": SCHEMA,
                "model": m.graph().graph_name(),
                "attribute": attribute,
                "response": semantic_json(&verdict.response),
                "fair_optimal_exists": verdict.exists,
                "optimal_policies": set.count().to_string(),
            });
            if listed.is_some() {
                o["policies"] = json!(policies);
            }
            if let Some(p) = &verdict.policy {
                o["fair_policy"] = json!(p.table());
            }
            if let Some(ok) = verdict.minimal_element_ok {
                o["minimal_element_ok"] = json!(ok);
            }
            pretty(&o)
        }
        _ => {
            let mut out = format!("attribute {attribute}\n");
            let _ = writeln!(out, "response incentive: {}", status_word(&verdict.response.status));
            match verdict.exists {
                Some(true) => {
                    let _ = writeln!(out, "{}", style.paint(Some(false), "fair optimal policy exists"));
                    for line in render_policy(&m, verdict.policy.as_ref().expect("constructed")) {
                        let _ = writeln!(out, "  {line}");
                    }
                }
                Some(false) => {
                    let _ = writeln!(out, "{}", style.paint(Some(true), "no fair optimal policy"));
                }
                None => {
                    let _ = writeln!(out, "{}", style.paint(None, "undecided within the policy cap"));
                }
            }
            let _ = writeln!(out, "optimal policies: {}", set.count());
            if listed.is_none() {
                let _ = writeln!(out, "  (not listed: more than {} policies)", caps.policy_cap);
            }
            for (i, (p, f)) in per_policy.iter().enumerate() {
                let _ = writeln!(out, "policy {i}: {}", if f.fair { "fair" } else { "unfair" });
                for line in render_policy(&m, p) {
                    let _ = writeln!(out, "  {line}");
                }
                if let Some(v) = &f.violation {
                    let _ = writeln!(
                        out,
                        "  violation: given {}{}{}={}, Pr({}={}) = {} but after do({}={}) it is {}",
                        m.render_assignment(&space.assignment(v.context)),
                        if space.parents.is_empty() { "" } else { ", " },
                        attribute,
                        m.value_name(a, v.observed),
                        m.graph().name(d),
                        m.value_name(d, v.decision),
                        v.factual.render(),
                        attribute,
                        m.value_name(a, v.intervened),
                        v.counterfactual.render(),
                    );
                }
            }
            out
        }
    };
    Ok(Outcome::ok(code, stdout))
}

fn optimal(input: &Path, format: Format) -> Run {
    if format == Format::Dot {
        return Err(usage("optimal-policy supports text and json"));
    }
    let m = require_scim(load(input)?)?;
    let q = q_table(&m).map_err(core)?;
    let exo_probs = &m.exo(m.decision()).probs;
    let set = incent_core::policy::OptimalPolicySet::from_q(&q, exo_probs);
    let d = m.decision();
    let dom = m.domain(d);
    let total = num_pow(dom.len(), q.space.cells());
    let contexts: Vec<(String, Option<Vec<u32>>)> = (0..q.space.count())
        .map(|c| (m.render_assignment(&q.space.assignment(c)), q.argmax(c)))
        .collect();
    let stdout = match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = contexts
                .iter()
                .enumerate()
                .map(|(c, (ctx, best))| {
                    json!({
                        "context": ctx,
                        "probability": q.prob[c].render(),
                        "q": q.q[c].iter().map(|v| v.as_ref().map(Scalar::render)).collect::<Vec<_>>(),
                        "optimal": best.as_ref().map(|b| b.iter().map(|&v| m.value_name(d, v)).collect::<Vec<_>>()),
                    })
                })
                .collect();
            pretty(&json!({
                "schema": SCHEMA,
                "model": m.graph().graph_name(),
                "decision": m.graph().name(d),
                "decisions": dom.values,
                "contexts": rows,
                "optimal_value": q.optimal_value().render(),
                "optimal_policies": set.count().to_string(),
                "total_policies": total,
            }))
        }
        _ => {
            let mut out = format!("decision {} over {{{}}}\n", m.graph().name(d), dom.values.join(", "));
            for (c, (ctx, best)) in contexts.iter().enumerate() {
                let ctx = if ctx.is_empty() { "(no parents)" } else { ctx };
                let _ = writeln!(out, "context {ctx}: Pr = {}", q.prob[c].render());
                for (dv, v) in q.q[c].iter().enumerate() {
                    let shown = v.as_ref().map_or("undefined".to_string(), Scalar::render);
                    let _ = writeln!(out, "  Q({}) = {shown}", dom.values[dv]);
                }
                let best = match best {
                    Some(b) => b.iter().map(|&v| dom.values[v as usize].as_str()).collect::<Vec<_>>().join(", "),
                    None => "any (probability zero)".to_string(),
                };
                let _ = writeln!(out, "  optimal: {best}");
            }
            let _ = writeln!(out, "optimal value: {}", q.optimal_value().render());
            let count = set.count();
            if count.to_string() == total {
                let _ = writeln!(out, "all {total} policies optimal");
            } else {
                let _ = writeln!(out, "optimal policies: {count} of {total}");
            }
            out
        }
    };
    Ok(Outcome::ok(0, stdout))
}

fn num_pow(base: usize, exp: usize) -> String {
    num_bigint::BigUint::from(base).pow(exp as u32).to_string()
}
