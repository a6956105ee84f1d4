//! Graphviz export for DB-nets, ν-CPNs and labeled transition systems.

use std::fmt::Write;

use itertools::Itertools;

use crate::dbnet::{DbNet, PlaceKind};
use crate::lts::{state_hash, Lts, State};
use crate::marking::ArcInscription;
use crate::nucpn::NuCpn;
use crate::translate::{PlaceClass, TranslationOutput};

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

fn inscription(a: &ArcInscription) -> String {
    format!("<{}>", a.terms.iter().join(","))
}

fn arc(out: &mut String, from: &str, to: &str, label: &str, style: &str) {
    writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"{style}];", esc(from), esc(to), esc(label)).unwrap();
}

pub fn dbnet_to_dot(n: &DbNet) -> String {
    let mut out = format!("digraph \"{}\" {{\n  rankdir=LR;\n", esc(&n.name));
    for p in &n.places {
        let color = p.color.iter().join(",");
        match &p.kind {
            PlaceKind::Control => writeln!(out, "  \"{}\" [shape=ellipse, label=\"{}\\n({color})\"];", esc(&p.name), esc(&p.name)),
            PlaceKind::View { query } => writeln!(
                out,
                "  \"{}\" [shape=ellipse, style=dashed, label=\"{}\\n({color})\\n= {}\"];",
                esc(&p.name),
                esc(&p.name),
                esc(query)
            ),
        }
        .unwrap();
    }
    for t in &n.transitions {
        let mut label = t.name.to_string();
        if t.guard != crate::term::Guard::True {
            label.push_str(&format!("\n[{}]", t.guard));
        }
        if let Some(a) = &t.action {
            label.push_str(&format!("\n{}({})", a.action, a.args.iter().join(",")));
        }
        writeln!(out, "  \"t:{}\" [shape=box, label=\"{}\"];", esc(&t.name), esc(&label)).unwrap();
        let tid = format!("t:{}", t.name);
        for a in &t.inputs {
            arc(&mut out, &a.place, &tid, &inscription(a), "");
        }
        for a in &t.reads {
            arc(&mut out, &a.place, &tid, &inscription(a), ", style=dashed, arrowhead=none");
        }
        for a in &t.outputs {
            arc(&mut out, &tid, &a.place, &inscription(a), "");
        }
        for a in &t.rollbacks {
            arc(&mut out, &tid, &a.place, &inscription(a), ", color=red, fontcolor=red");
        }
    }
    out.push_str("}\n");
    out
}

/// Relation places are drawn as cylinders, the lock as a double circle and gadget places in grey.
pub fn cpn_to_dot(n: &NuCpn, classes: Option<&TranslationOutput>) -> String {
    let mut out = format!("digraph \"{}\" {{\n  rankdir=LR;\n", esc(&n.name));
    for p in &n.places {
        let style = match classes.and_then(|c| c.class(&p.name)) {
            Some(PlaceClass::Relation) => "shape=cylinder",
            Some(PlaceClass::Lock) => "shape=doublecircle",
            Some(PlaceClass::Auxiliary(_)) => "shape=ellipse, style=filled, fillcolor=lightgrey",
            _ => "shape=ellipse",
        };
        let label = format!("{}\n({})", p.name, p.color.iter().join(","));
        writeln!(out, "  \"{}\" [{style}, label=\"{}\"];", esc(&p.name), esc(&label)).unwrap();
    }
    for t in &n.transitions {
        let mut label = format!("{}\n{}", t.name, t.priority);
        if t.guard != crate::term::Guard::True {
            label.push_str(&format!("\n[{}]", t.guard));
        }
        writeln!(out, "  \"t:{}\" [shape=box, label=\"{}\"];", esc(&t.name), esc(&label)).unwrap();
        let tid = format!("t:{}", t.name);
        for a in &t.inputs {
            arc(&mut out, &a.place, &tid, &inscription(a), "");
        }
        for a in &t.reads {
            arc(&mut out, &a.place, &tid, &inscription(a), ", style=dashed, arrowhead=none");
        }
        for a in &t.outputs {
            arc(&mut out, &tid, &a.place, &inscription(a), "");
        }
    }
    out.push_str("}\n");
    out
}

/// Nodes are named by state hash; the initial state is drawn bold, silent edges dashed.
pub fn lts_to_dot<S: State>(lts: &Lts<S>) -> String {
    let mut out = String::from("digraph lts {\n");
    let hashes: Vec<String> = lts.states.iter().map(|s| state_hash(&s.canonical())).collect();
    for (i, s) in lts.states.iter().enumerate() {
        let bold = if i as u32 == lts.initial { ", style=bold" } else { "" };
        writeln!(out, "  \"{}\" [shape=box, label=\"{}\"{bold}];", hashes[i], esc(&s.canonical().replace(';', "\n"))).unwrap();
    }
    for e in &lts.edges {
        let style = if e.label.is_silent() { ", style=dashed" } else { "" };
        arc(&mut out, &hashes[e.src as usize], &hashes[e.dst as usize], &e.label.to_string(), style);
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::bonus_desk;
    use crate::lts::Limits;
    use crate::translate::translate;

    #[test]
    fn dbnet_graph_mentions_every_element() {
        let n = bonus_desk();
        let d = dbnet_to_dot(&n);
        assert!(d.starts_with("digraph"));
        for p in &n.places {
            assert!(d.contains(&format!("\"{}\" [", p.name)));
        }
        assert!(d.contains("color=red"), "rollback arcs are highlighted");
    }

    #[test]
    fn cpn_graph_styles_place_classes() {
        let n = bonus_desk();
        let out = translate(&n, &n.initial).unwrap();
        let d = cpn_to_dot(&out.net, Some(&out));
        assert!(d.contains("\"sys.Lock\" [shape=doublecircle"));
        assert!(d.contains("\"rel.User\" [shape=cylinder"));
    }

    #[test]
    fn lts_graph_has_one_node_per_state() {
        let n = bonus_desk();
        let l = n.build_lts(&n.initial, &n.fresh, &Limits::default());
        let d = lts_to_dot(&l);
        assert_eq!(d.matches("shape=box").count(), l.num_states());
        assert_eq!(d.matches(" -> ").count(), l.num_edges());
        assert_eq!(d.matches("style=bold").count(), 1);
    }
}
