//! Consume, commit and rollback: the gadget hands back the lock and produces the source
//! transition's normal or rollback postset.

use crate::marking::ArcInscription;
use crate::nucpn::{CpnTransition, Priority};
use crate::term::Term;
use crate::value::Name;

use super::{AuxRole, DoneRecord, Emitter, Gadget, LabelRole, Phase};

pub(crate) fn build_finish(g: &Gadget, e: &mut Emitter, lock: &Name, ok: &Name, rollback: Option<&Name>, dones: &[DoneRecord]) {
    let do_commit = g.name("DoCommit");
    g.aux(e, &do_commit, g.z_color(), AuxRole::DoCommit, Phase::Finish);
    let mut consume = CpnTransition::new(&g.name("consume"), Priority::NORMAL);
    consume.inputs = vec![ArcInscription { place: ok.clone(), terms: g.z() }];
    for d in dones {
        let b = Term::Var(format!("b.{}{}", if d.is_add { "a" } else { "d" }, d.index).into());
        consume.inputs.push(ArcInscription { place: d.place.clone(), terms: vec![b] });
    }
    consume.outputs = vec![ArcInscription { place: do_commit.clone(), terms: g.z() }];
    e.transition(consume, LabelRole::Silent, g.source(), Phase::Finish);

    let lock_arc = ArcInscription { place: lock.clone(), terms: vec![] };
    let mut commit = CpnTransition::new(&g.name("commit"), Priority::NORMAL);
    commit.inputs = vec![ArcInscription { place: do_commit, terms: g.z() }];
    commit.outputs = g.t.outputs.clone();
    commit.outputs.push(lock_arc.clone());
    e.transition(commit, LabelRole::Silent, g.source(), Phase::Finish);

    if let Some(rb) = rollback {
        let mut t = CpnTransition::new(&g.name("rollback"), Priority::NORMAL);
        t.inputs = vec![ArcInscription { place: rb.clone(), terms: g.z() }];
        t.outputs = g.t.rollbacks.clone();
        t.outputs.push(lock_arc);
        e.transition(t, LabelRole::Silent, g.source(), Phase::Finish);
    }
}
