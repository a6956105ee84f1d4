//! Undo net: reverts additions, then deletions, in reverse update order.

use crate::marking::ArcInscription;
use crate::nucpn::{CpnTransition, Priority};
use crate::value::Name;

use super::{bool_term, AuxRole, DoneRecord, Emitter, Gadget, LabelRole, Mutation, Phase};

/// Components in the order they are undone.
pub(crate) fn revert_plan(dones: &[DoneRecord]) -> Vec<DoneRecord> {
    let adds = dones.iter().rev().filter(|d| d.is_add);
    let dels = dones.iter().rev().filter(|d| !d.is_add);
    adds.chain(dels).cloned().collect()
}

pub(crate) fn build_undo_net(g: &Gadget, e: &mut Emitter, plan: &[DoneRecord], from: &Name, to: &Name) {
    let mut prev = from.clone();
    for (j, rec) in plan.iter().enumerate() {
        let next = if j + 1 == plan.len() { to.clone() } else { g.name(&format!("R{}", j + 1)) };
        if j + 1 < plan.len() {
            g.aux(e, &next, g.z_color(), AuxRole::UndoStage, Phase::Undo);
        }
        let kind = if rec.is_add { "A" } else { "D" };
        let fact = ArcInscription { place: rec.relation.clone(), terms: rec.fact.clone() };
        let flag = |b: bool| ArcInscription { place: rec.place.clone(), terms: vec![bool_term(b)] };
        let mut revert = CpnTransition::new(&g.name(&format!("DoRevert{kind}{}", rec.index)), Priority::NORMAL);
        revert.inputs = vec![ArcInscription { place: prev.clone(), terms: g.z() }, flag(true)];
        revert.outputs = vec![ArcInscription { place: next.clone(), terms: g.z() }];
        // the mutant keeps the stage but leaves the first component's fact untouched
        let dropped = j == 0 && g.mutation == Some(Mutation::DropRevertComponent);
        if !dropped {
            if rec.is_add {
                revert.inputs.push(fact);
            } else {
                revert.outputs.push(fact);
            }
        }
        let mut skip = CpnTransition::new(&g.name(&format!("SkipRevert{kind}{}", rec.index)), Priority::NORMAL);
        skip.inputs = vec![ArcInscription { place: prev.clone(), terms: g.z() }, flag(false)];
        skip.outputs = vec![ArcInscription { place: next.clone(), terms: g.z() }];
        e.transition(revert, LabelRole::Silent, g.source(), Phase::Undo);
        e.transition(skip, LabelRole::Silent, g.source(), Phase::Undo);
        prev = next;
    }
}
