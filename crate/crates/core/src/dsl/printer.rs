use std::fmt::Write;

use itertools::Itertools;

use crate::dbnet::{DbNet, PlaceKind, Transition};
use crate::fresh::{FreshPolicy, SampleDomains};
use crate::marking::{ArcInscription, Marking};
use crate::nucpn::{NuCpn, Priority};
use crate::query::Conjunct;
use crate::relational::{Constraint, Schema};
use crate::term::Guard;
use crate::value::{Name, TypeDomain, Value};

fn types(out: &mut String, types: &TypeDomain) {
    for t in types.iter().filter(|t| !TypeDomain::builtin(&t.name)) {
        writeln!(out, "type {}: {};", t.name, t.kind.keyword()).unwrap();
    }
}

fn cols(schema: &Schema, rel: &Name, idx: &[usize]) -> String {
    let r = &schema.relations[rel];
    idx.iter().map(|&i| &r.columns[i].name).join(", ")
}

fn schema(out: &mut String, schema: &Schema) {
    for r in schema.relations.values() {
        let cols = r.columns.iter().map(|c| format!("{}: {}", c.name, c.ty)).join(", ");
        writeln!(out, "relation {}({cols});", r.name).unwrap();
    }
    for c in &schema.constraints {
        match c {
            Constraint::PrimaryKey { relation, cols: idx } => writeln!(out, "key {relation}({});", cols(schema, relation, idx)),
            Constraint::ForeignKey { from, from_cols, to, to_cols } => writeln!(
                out,
                "foreign key {from}({}) references {to}({});",
                cols(schema, from, from_cols),
                cols(schema, to, to_cols)
            ),
            Constraint::Domain { relation, col, allowed } => {
                writeln!(out, "domain {relation}({}) in {};", cols(schema, relation, &[*col]), set(allowed))
            }
        }
        .unwrap();
    }
}

fn set(vals: &[Value]) -> String {
    format!("{{{}}}", vals.iter().join(", "))
}

fn typed(vars: &[(Name, Name)]) -> String {
    vars.iter().map(|(v, t)| format!("{v}: {t}")).join(", ")
}

fn conjunct(c: &Conjunct) -> String {
    let mut parts: Vec<String> = c.atoms.iter().map(|a| a.to_string()).collect();
    parts.extend(c.filters.iter().map(|l| l.to_string()));
    if c.existential.is_empty() {
        parts.join(", ")
    } else {
        format!("exists ({}) {}", typed(&c.existential), parts.join(", "))
    }
}

fn arcs(out: &mut String, kw: &str, list: &[ArcInscription]) {
    for a in list {
        writeln!(out, "  {kw} {}({});", a.place, a.terms.iter().join(", ")).unwrap();
    }
}

fn transition_body(out: &mut String, t: &Transition, priority: Option<Priority>) {
    if !t.fresh.is_empty() {
        writeln!(out, "  fresh {};", t.fresh.iter().join(", ")).unwrap();
    }
    arcs(out, "in", &t.inputs);
    arcs(out, "read", &t.reads);
    arcs(out, "out", &t.outputs);
    arcs(out, "rollback", &t.rollbacks);
    if t.guard != Guard::True {
        writeln!(out, "  guard {};", t.guard).unwrap();
    }
    if let Some(a) = &t.action {
        writeln!(out, "  action {}({});", a.action, a.args.iter().join(", ")).unwrap();
    }
    if let Some(p) = priority {
        writeln!(out, "  priority {p};").unwrap();
    }
}

fn initial_tokens(out: &mut String, m: &Marking) {
    for (p, tok, n) in m.entries() {
        let mult = if n == 1 { String::new() } else { format!(" * {n}") };
        writeln!(out, "  token {p}({}){mult};", tok.iter().join(", ")).unwrap();
    }
}

fn policy(out: &mut String, samples: &SampleDomains, fresh: &FreshPolicy) {
    out.push_str("policy {\n");
    match fresh.mode {
        crate::fresh::FreshMode::Bounded(k) => writeln!(out, "  fresh bounded: {k};"),
        m => writeln!(out, "  fresh {m};"),
    }
    .unwrap();
    for (ty, vals) in &fresh.reservoirs {
        writeln!(out, "  reservoir {ty} = {};", set(vals)).unwrap();
    }
    for (ty, vals) in &samples.by_type {
        writeln!(out, "  sample type {ty} = {};", set(vals)).unwrap();
    }
    for (var, vals) in &samples.by_var {
        let ty = vals.first().map(|v| v.ty.to_string()).unwrap_or_else(|| crate::value::STRING.to_string());
        writeln!(out, "  sample var {var}: {ty} = {};", set(vals)).unwrap();
    }
    out.push_str("}\n");
}

/// Canonical text of a DB-net model; parsing it yields an equal model.
pub fn print_dbnet(n: &DbNet) -> String {
    let mut out = format!("dbnet {};\n\n", n.name);
    types(&mut out, &n.schema.types);
    schema(&mut out, &n.schema);
    out.push('\n');
    for q in n.queries.values() {
        let body = q.disjuncts.iter().map(conjunct).join("\n  | ");
        writeln!(out, "query {}({}) :=\n  {body};", q.name, typed(&q.free)).unwrap();
    }
    for a in n.actions.values() {
        writeln!(out, "action {}({}) {{", a.name, typed(&a.params)).unwrap();
        for d in &a.dels {
            writeln!(out, "  del {d};").unwrap();
        }
        for f in &a.adds {
            writeln!(out, "  add {f};").unwrap();
        }
        out.push_str("}\n");
    }
    out.push('\n');
    for p in &n.places {
        let color = p.color.iter().join(", ");
        match &p.kind {
            PlaceKind::Control => writeln!(out, "place {}: ({color});", p.name),
            PlaceKind::View { query } => writeln!(out, "view {}: ({color}) = {query};", p.name),
        }
        .unwrap();
    }
    out.push('\n');
    for t in &n.transitions {
        writeln!(out, "transition {} {{", t.name).unwrap();
        transition_body(&mut out, t, None);
        out.push_str("}\n");
    }
    out.push_str("\ninitial {\n");
    for (rel, tuple) in n.initial.instance.facts() {
        writeln!(out, "  fact {rel}({});", tuple.iter().join(", ")).unwrap();
    }
    initial_tokens(&mut out, &n.initial.marking);
    out.push_str("}\n\n");
    policy(&mut out, &n.samples, &n.fresh);
    out
}

/// Canonical text of a ν-CPN; the same grammar without persistence sections.
pub fn print_cpn(n: &NuCpn) -> String {
    let mut out = format!("cpn {};\n\n", n.name);
    types(&mut out, &n.types);
    for p in &n.places {
        writeln!(out, "place {}: ({});", p.name, p.color.iter().join(", ")).unwrap();
    }
    out.push('\n');
    for t in &n.transitions {
        let as_db = Transition {
            name: t.name.clone(),
            inputs: t.inputs.clone(),
            reads: t.reads.clone(),
            outputs: t.outputs.clone(),
            rollbacks: vec![],
            guard: t.guard.clone(),
            action: None,
            fresh: t.fresh.clone(),
        };
        writeln!(out, "transition {} {{", t.name).unwrap();
        transition_body(&mut out, &as_db, Some(t.priority));
        out.push_str("}\n");
    }
    out.push_str("\ninitial {\n");
    initial_tokens(&mut out, &n.initial);
    out.push_str("}\n\n");
    policy(&mut out, &n.samples, &n.fresh);
    out
}
