use dbnet::corpus::{bonus_desk_with, shopping_cart, CartParams};
use dbnet::dbnet::DbNet;
use dbnet::lts::{Limits, Lts};
use dbnet::marking::Marking;
use dbnet::translate::{translate_with, Mutation, PlaceClass, TranslationOutput};

fn explore(n: &DbNet, m: Option<Mutation>) -> (TranslationOutput, Lts<Marking>) {
    let t = translate_with(n, &n.initial, m).unwrap();
    let lts = t.net.cpn_build_lts(&n.fresh, &Limits { max_states: 50_000, ..Limits::default() }).lts;
    (t, lts)
}

fn lock_breaches(t: &TranslationOutput, lts: &Lts<Marking>) -> usize {
    lts.states.iter().filter(|m| (m.place_size(&t.lock) == 1) == t.is_interior(m) || m.place_size(&t.lock) > 1).count()
}

fn duplicate_facts(t: &TranslationOutput, lts: &Lts<Marking>) -> usize {
    lts.states.iter().flat_map(|m| m.entries()).filter(|(p, _, n)| t.class(p) == Some(PlaceClass::Relation) && *n > 1).count()
}

fn stuck_interiors(t: &TranslationOutput, lts: &Lts<Marking>) -> usize {
    let adj = lts.adjacency();
    (0..lts.num_states()).filter(|&i| t.is_interior(&lts.states[i]) && adj[i].is_empty()).count()
}

#[test]
fn correct_translation_keeps_gadget_invariants() {
    for n in [shopping_cart(CartParams { users: 2, products: 1, sessions: 1 }), bonus_desk_with(&[1, 5])] {
        let (t, lts) = explore(&n, None);
        assert!(!lts.truncated);
        assert_eq!(lock_breaches(&t, &lts), 0);
        assert_eq!(duplicate_facts(&t, &lts), 0);
        assert_eq!(stuck_interiors(&t, &lts), 0);
    }
}

#[test]
fn lost_lock_breaks_exclusion() {
    let (t, lts) = explore(&bonus_desk_with(&[1]), Some(Mutation::ForgetCancelLockReturn));
    assert!(lock_breaches(&t, &lts) > 0);
}

#[test]
fn swapped_add_priorities_duplicate_facts() {
    let (t, lts) = explore(&bonus_desk_with(&[1]), Some(Mutation::SwapAddPriorities));
    assert!(duplicate_facts(&t, &lts) > 0);
}
