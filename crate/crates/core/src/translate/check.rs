//! Constraint check net: one stage per constraint, each either passing the carried token on or
//! diverting it to the shared violation place.

use crate::marking::ArcInscription;
use crate::nucpn::{CpnTransition, Priority};
use crate::relational::Constraint;
use crate::term::{Guard, Term};
use crate::value::{Name, Pred};

use super::{fresh_names, AuxRole, Emitter, Gadget, LabelRole, Phase};

pub(crate) fn build_check_net(g: &Gadget, e: &mut Emitter, stages: &[&Constraint], from: &Name, ok: &Name, viol: &Name) {
    let mut prev = from.clone();
    for (j, c) in stages.iter().enumerate() {
        let i = j + 1;
        let next = if i == stages.len() { ok.clone() } else { g.name(&format!("C{i}Ok")) };
        if i < stages.len() {
            g.aux(e, &next, g.z_color(), AuxRole::CheckStage, Phase::Check);
        }
        match c {
            Constraint::PrimaryKey { relation, cols } => primary_key(g, e, i, relation, cols, &prev, &next, viol),
            Constraint::ForeignKey { from, from_cols, to, to_cols } => {
                foreign_key(g, e, i, (from, from_cols), (to, to_cols), &prev, &next, viol)
            }
            Constraint::Domain { relation, col, allowed } => domain(g, e, i, relation, *col, allowed, &prev, &next, viol),
        }
        prev = next;
    }
}

fn arity(g: &Gadget, relation: &str) -> usize {
    g.net.schema.relations[relation].arity()
}

fn pass(g: &Gadget, name: String, priority: Priority, from: &Name, to: &Name) -> CpnTransition {
    let mut t = CpnTransition::new(&g.name(&name), priority);
    t.inputs = vec![ArcInscription { place: from.clone(), terms: g.z() }];
    t.outputs = vec![ArcInscription { place: to.clone(), terms: g.z() }];
    t
}

/// RepeatedKey reads two facts agreeing on the key and differing elsewhere.
#[allow(clippy::too_many_arguments)]
fn primary_key(g: &Gadget, e: &mut Emitter, i: usize, relation: &Name, cols: &[usize], from: &Name, to: &Name, viol: &Name) {
    let n = arity(g, relation);
    let y = fresh_names("chk.y", n);
    let w: Vec<Term> = fresh_names("chk.w", n).into_iter().enumerate().map(|(j, t)| if cols.contains(&j) { y[j].clone() } else { t }).collect();
    let rest_equal = (0..n).filter(|j| !cols.contains(j)).map(|j| Guard::Atom(Pred::Eq, [y[j].clone(), w[j].clone()])).collect();
    let place = g.rel_place(relation);
    let mut bad = pass(g, format!("RepeatedKey{i}"), Priority::HIGH, from, viol);
    bad.reads = vec![ArcInscription { place: place.clone(), terms: y }, ArcInscription { place, terms: w }];
    bad.guard = Guard::negate(Guard::conj(rest_equal));
    e.transition(bad, LabelRole::Silent, g.source(), Phase::Check);
    e.transition(pass(g, format!("NoRepeatedKey{i}"), Priority::LOW, from, to), LabelRole::Silent, g.source(), Phase::Check);
}

/// Exhaustive scan: every source fact with a matching target is parked in a scratch place; a
/// remaining source fact is a violation. Parked facts are restored before the stage exits.
#[allow(clippy::too_many_arguments)]
fn foreign_key(
    g: &Gadget,
    e: &mut Emitter,
    i: usize,
    (src, src_cols): (&Name, &Vec<usize>),
    (dst, dst_cols): (&Name, &Vec<usize>),
    from: &Name,
    to: &Name,
    viol: &Name,
) {
    let src_place = g.rel_place(src);
    let dst_place = g.rel_place(dst);
    let n = arity(g, src);
    let y = fresh_names("chk.y", n);
    let mut w = fresh_names("chk.w", arity(g, dst));
    for (a, b) in src_cols.iter().zip(dst_cols) {
        w[*b] = y[*a].clone();
    }
    let color = g.net.schema.relations[&**src].column_types();
    let scratch = g.name(&format!("C{i}Scratch"));
    let restore_ok = g.name(&format!("C{i}RestoreOk"));
    let restore_viol = g.name(&format!("C{i}RestoreViol"));
    g.aux(e, &scratch, color, AuxRole::Scratch, Phase::Check);
    g.aux(e, &restore_ok, g.z_color(), AuxRole::CheckStage, Phase::Check);
    g.aux(e, &restore_viol, g.z_color(), AuxRole::CheckStage, Phase::Check);
    let y_arc = |place: &Name| ArcInscription { place: place.clone(), terms: y.clone() };

    let mut targets = vec![dst_place.clone()];
    if src == dst {
        targets.push(scratch.clone());
    }
    for (k, target) in targets.iter().enumerate() {
        let name = if k == 0 { format!("FKMatch{i}") } else { format!("FKMatchParked{i}") };
        let mut t = pass(g, name, Priority::HIGH, from, from);
        t.inputs.push(y_arc(&src_place));
        t.reads = vec![ArcInscription { place: target.clone(), terms: w.clone() }];
        t.outputs.push(y_arc(&scratch));
        e.transition(t, LabelRole::Silent, g.source(), Phase::Check);
    }
    let mut missing = pass(g, format!("FKNotExists{i}"), Priority::NORMAL, from, &restore_viol);
    missing.reads = vec![y_arc(&src_place)];
    e.transition(missing, LabelRole::Silent, g.source(), Phase::Check);
    e.transition(pass(g, format!("FKExists{i}"), Priority::LOW, from, &restore_ok), LabelRole::Silent, g.source(), Phase::Check);

    for (stage, exit, label) in [(&restore_ok, to, "Ok"), (&restore_viol, viol, "Viol")] {
        let mut back = pass(g, format!("FKRestore{label}{i}"), Priority::HIGH, stage, stage);
        back.inputs.push(y_arc(&scratch));
        back.outputs.push(y_arc(&src_place));
        e.transition(back, LabelRole::Silent, g.source(), Phase::Check);
        e.transition(pass(g, format!("FKLeave{label}{i}"), Priority::LOW, stage, exit), LabelRole::Silent, g.source(), Phase::Check);
    }
}

/// WrongValue reads a fact whose column differs from every allowed constant.
#[allow(clippy::too_many_arguments)]
fn domain(
    g: &Gadget,
    e: &mut Emitter,
    i: usize,
    relation: &Name,
    col: usize,
    allowed: &[crate::value::Value],
    from: &Name,
    to: &Name,
    viol: &Name,
) {
    let y = fresh_names("chk.y", arity(g, relation));
    let mut bad = pass(g, format!("WrongValue{i}"), Priority::HIGH, from, viol);
    bad.guard = Guard::conj(
        allowed.iter().map(|c| Guard::negate(Guard::Atom(Pred::Eq, [y[col].clone(), Term::Const(c.clone())]))).collect(),
    );
    bad.reads = vec![ArcInscription { place: g.rel_place(relation), terms: y }];
    e.transition(bad, LabelRole::Silent, g.source(), Phase::Check);
    e.transition(pass(g, format!("NoWrongValue{i}"), Priority::LOW, from, to), LabelRole::Silent, g.source(), Phase::Check);
}
