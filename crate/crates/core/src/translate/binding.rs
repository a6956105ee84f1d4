//! Entry, view binding, guard and cancel stages.

use std::collections::BTreeMap;

use crate::marking::ArcInscription;
use crate::nucpn::{CpnTransition, Priority};
use crate::query::Conjunct;
use crate::term::{Guard, Term};
use crate::value::Name;

use super::{AuxRole, Emitter, Gadget, GadgetCounts, LabelRole, Mutation, Phase};

/// Emits `T.enter`, one compute stage per view read and a cancel per pre-guard stage.
/// Returns the place holding fully bound tokens.
pub(crate) fn build_binding_net(g: &Gadget, e: &mut Emitter, lock: &Name, counts: &mut GadgetCounts) -> Name {
    let m = g.t.reads.len();
    let stage_vars: Vec<Vec<(Name, Name)>> = (0..=m).map(|k| g.vars.carried_upto_view(k)).collect();
    let stage_place = |k: usize| -> Name {
        if k == 0 {
            g.name("Entered")
        } else if k == m {
            g.name("Bound")
        } else {
            g.name(&format!("V{k}Computed"))
        }
    };
    for (k, vars) in stage_vars.iter().enumerate() {
        let role = match k {
            0 => AuxRole::Entered,
            k if k == m => AuxRole::Bound,
            _ => AuxRole::Computed,
        };
        g.aux(e, &stage_place(k), Gadget::types_of(vars), role, Phase::Binding);
    }

    let mut enter = CpnTransition::new(&g.name("enter"), Priority::NORMAL);
    enter.inputs = g.t.inputs.clone();
    enter.inputs.push(ArcInscription { place: lock.clone(), terms: vec![] });
    enter.outputs = vec![ArcInscription { place: stage_place(0), terms: Gadget::terms_of(&stage_vars[0]) }];
    enter.fresh = g.t.fresh.clone();
    e.transition(enter, LabelRole::Silent, g.source(), Phase::Enter);

    for (i, read) in g.t.reads.iter().enumerate() {
        let q = g.net.view_query(&read.place).expect("validated view");
        let free: BTreeMap<&Name, &Term> = q.free.iter().map(|(v, _)| v).zip(&read.terms).collect();
        for (d, conj) in q.disjuncts.iter().enumerate() {
            let suffix = if q.disjuncts.len() == 1 { format!("ComputeV{}", i + 1) } else { format!("ComputeV{}_{}", i + 1, d + 1) };
            let mut t = CpnTransition::new(&g.name(&suffix), Priority::NORMAL);
            let (reads, guard) = compile_conjunct(g, conj, &free, i + 1);
            t.inputs = vec![ArcInscription { place: stage_place(i), terms: Gadget::terms_of(&stage_vars[i]) }];
            t.reads = reads;
            t.guard = guard;
            t.outputs = vec![ArcInscription { place: stage_place(i + 1), terms: Gadget::terms_of(&stage_vars[i + 1]) }];
            e.transition(t, LabelRole::Silent, g.source(), Phase::Binding);
            counts.compute += 1;
        }
    }

    for (k, vars) in stage_vars.iter().enumerate() {
        let mut cancel = CpnTransition::new(&g.name(&format!("cancel{k}")), Priority::NORMAL);
        cancel.inputs = vec![ArcInscription { place: stage_place(k), terms: Gadget::terms_of(vars) }];
        cancel.outputs = g.t.inputs.clone();
        if g.mutation != Some(Mutation::ForgetCancelLockReturn) {
            cancel.outputs.push(ArcInscription { place: lock.clone(), terms: vec![] });
        }
        e.transition(cancel, LabelRole::Silent, g.source(), Phase::Cancel);
        counts.cancels += 1;
    }
    stage_place(m)
}

/// Read arcs and filter guard for one disjunct: free variables become the view inscription's
/// terms, existentials are renamed into a stage-private namespace.
fn compile_conjunct(g: &Gadget, conj: &Conjunct, free: &BTreeMap<&Name, &Term>, stage: usize) -> (Vec<ArcInscription>, Guard) {
    let rename = |term: &Term| -> Term {
        match term {
            Term::Const(_) => term.clone(),
            Term::Var(v) => match free.get(v) {
                Some(t) => (*t).clone(),
                None => Term::Var(format!("v{stage}.{v}").into()),
            },
        }
    };
    let reads = conj
        .atoms
        .iter()
        .map(|a| ArcInscription { place: g.rel_place(&a.relation), terms: a.terms.iter().map(rename).collect() })
        .collect();
    let guard = Guard::conj(conj.filters.iter().map(|l| Guard::from_literal(&l.rename(&rename))).collect());
    (reads, guard)
}

/// `T.cond`: the observable step, enabled when the transition guard holds.
pub(crate) fn build_guard_stage(g: &Gadget, e: &mut Emitter, bound: &Name, guard_ok: &Name) {
    let mut cond = CpnTransition::new(&g.name("cond"), Priority::NORMAL);
    cond.inputs = vec![ArcInscription { place: bound.clone(), terms: g.z() }];
    cond.guard = g.t.guard.clone();
    cond.outputs = vec![ArcInscription { place: guard_ok.clone(), terms: g.z() }];
    let carried = g.carried().into_iter().map(|(v, _)| v).collect();
    e.transition(cond, LabelRole::Observable { source: g.source().clone(), carried }, g.source(), Phase::Guard);
}
