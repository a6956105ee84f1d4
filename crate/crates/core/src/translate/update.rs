//! Update net: deletion components, then addition components.

use crate::marking::ArcInscription;
use crate::nucpn::{CpnTransition, Priority};
use crate::value::Name;

use super::{bool_term, AuxRole, DoneRecord, Emitter, Gadget, GadgetCounts, LabelRole, Mutation, Phase};

pub(crate) fn build_update_net(g: &Gadget, e: &mut Emitter, from: &Name, to: &Name, counts: &mut GadgetCounts) -> Vec<DoneRecord> {
    let (act, _) = g.action.expect("update net needs an action");
    let dels = act.dels.iter().enumerate().map(|(i, tpl)| (false, i + 1, tpl));
    let adds = act.adds.iter().enumerate().map(|(i, tpl)| (true, i + 1, tpl));
    let order: Vec<_> = if g.mutation == Some(Mutation::ReorderDelAdd) { adds.chain(dels).collect() } else { dels.chain(adds).collect() };
    counts.deletions = act.dels.len();
    counts.additions = act.adds.len();

    let mut records = Vec::new();
    let mut prev = from.clone();
    for (j, (is_add, i, tpl)) in order.iter().enumerate() {
        let next = if j + 1 == order.len() { to.clone() } else { g.name(&format!("U{}", j + 1)) };
        if j + 1 < order.len() {
            g.aux(e, &next, g.z_color(), AuxRole::UpdateStage, Phase::Update);
        }
        let kind = if *is_add { "A" } else { "D" };
        let done = g.name(&format!("Done{kind}{i}"));
        g.aux(e, &done, Gadget::done_color(), AuxRole::Done, Phase::Update);
        let rec = DoneRecord { is_add: *is_add, index: *i, place: done, relation: g.rel_place(&tpl.relation), fact: g.instantiate(tpl) };
        if *is_add {
            addition(g, e, &rec, &prev, &next);
        } else {
            deletion(g, e, &rec, &prev, &next);
        }
        records.push(rec);
        prev = next;
    }
    records
}

fn step(g: &Gadget, name: &str, priority: Priority, from: &Name, to: &Name) -> CpnTransition {
    let mut t = CpnTransition::new(&g.name(name), priority);
    t.inputs = vec![ArcInscription { place: from.clone(), terms: g.z() }];
    t.outputs = vec![ArcInscription { place: to.clone(), terms: g.z() }];
    t
}

/// ExistsD consumes a present fact and records ⟨true⟩; NotExistsD records ⟨false⟩.
fn deletion(g: &Gadget, e: &mut Emitter, rec: &DoneRecord, from: &Name, to: &Name) {
    let i = rec.index;
    let fact = ArcInscription { place: rec.relation.clone(), terms: rec.fact.clone() };
    let mut exists = step(g, &format!("ExistsD{i}"), Priority::HIGH, from, to);
    exists.inputs.push(fact);
    exists.outputs.push(ArcInscription { place: rec.place.clone(), terms: vec![bool_term(true)] });
    let mut absent = step(g, &format!("NotExistsD{i}"), Priority::LOW, from, to);
    absent.outputs.push(ArcInscription { place: rec.place.clone(), terms: vec![bool_term(false)] });
    e.transition(exists, LabelRole::Silent, g.source(), Phase::Update);
    e.transition(absent, LabelRole::Silent, g.source(), Phase::Update);
}

/// ExistsA only reads a present fact and records ⟨false⟩; NotExistsA inserts it and records ⟨true⟩.
fn addition(g: &Gadget, e: &mut Emitter, rec: &DoneRecord, from: &Name, to: &Name) {
    let i = rec.index;
    let swapped = g.mutation == Some(Mutation::SwapAddPriorities);
    let (hi, lo) = if swapped { (Priority::LOW, Priority::HIGH) } else { (Priority::HIGH, Priority::LOW) };
    let fact = ArcInscription { place: rec.relation.clone(), terms: rec.fact.clone() };
    let mut exists = step(g, &format!("ExistsA{i}"), hi, from, to);
    if g.mutation == Some(Mutation::ConsumeOnReadArc) {
        exists.inputs.push(fact.clone());
    } else {
        exists.reads.push(fact.clone());
    }
    exists.outputs.push(ArcInscription { place: rec.place.clone(), terms: vec![bool_term(false)] });
    let mut absent = step(g, &format!("NotExistsA{i}"), lo, from, to);
    absent.outputs.push(fact);
    absent.outputs.push(ArcInscription { place: rec.place.clone(), terms: vec![bool_term(true)] });
    e.transition(exists, LabelRole::Silent, g.source(), Phase::Update);
    e.transition(absent, LabelRole::Silent, g.source(), Phase::Update);
}
