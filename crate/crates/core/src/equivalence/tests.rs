use super::*;
use crate::corpus::{bonus_desk, bonus_desk_with, shopping_cart, CartParams};
use crate::term::Substitution;

fn node(content: &str, stable: bool) -> FlatNode {
    FlatNode { state: FlatState { facts: vec![content.to_string()], control: vec![] }, stable }
}

fn fire(t: &str) -> Label {
    Label::Fire { transition: t.into(), binding: Substitution::new(), outcome: Some(Outcome::Commit) }
}

fn lts(states: Vec<FlatNode>, edges: &[(u32, Option<&str>, u32)]) -> Lts<FlatNode> {
    let edges = edges
        .iter()
        .map(|&(src, l, dst)| Edge { src, label: l.map(fire).unwrap_or(Label::Silent), dst })
        .collect();
    Lts { states, initial: 0, edges, truncated: false }
}

fn two_state() -> Lts<FlatNode> {
    lts(vec![node("a", true), node("b", true)], &[(0, Some("l"), 1)])
}

#[test]
fn lts_is_bisimilar_to_itself() {
    let l = two_state();
    let r = check_weak_bisim(&l, &l).unwrap();
    assert_eq!(r.verdict, Verdict::Bisimilar);
    assert!(r.related(0, 0) && r.related(1, 1) && !r.related(0, 1));
    assert_eq!(verify_relation(&l, &l, &r), Ok(()));
}

#[test]
fn silent_prefix_with_same_content_is_absorbed() {
    let l = two_state();
    let r = lts(vec![node("a", true), node("a", true), node("b", true)], &[(0, None, 1), (1, Some("l"), 2)]);
    let res = check_weak_bisim(&l, &r).unwrap();
    assert_eq!(res.verdict, Verdict::Bisimilar);
    assert!(res.related(0, 1));
    assert_eq!(verify_relation(&l, &r, &res), Ok(()));
}

#[test]
fn interior_node_takes_the_content_it_must_reach() {
    let l = two_state();
    let r = lts(
        vec![node("a", true), node("x", false), node("y", false), node("b", true)],
        &[(0, Some("l"), 1), (1, None, 2), (2, None, 3)],
    );
    let res = check_weak_bisim(&l, &r).unwrap();
    assert_eq!(res.verdict, Verdict::Bisimilar);
    assert!(res.related(1, 1) && res.related(1, 2));
}

#[test]
fn interior_node_that_can_end_in_two_contents_is_not_related() {
    let l = lts(vec![node("a", true), node("b", true), node("c", true)], &[(0, Some("l"), 1), (0, Some("l"), 2)]);
    let r = lts(
        vec![node("a", true), node("i", false), node("b", true), node("c", true)],
        &[(0, Some("l"), 1), (1, None, 2), (1, None, 3)],
    );
    let res = check_weak_bisim(&l, &r).unwrap();
    assert_eq!(res.verdict, Verdict::NotBisimilar);
}

#[test]
fn label_mismatch_yields_witness() {
    let l = two_state();
    let r = lts(vec![node("a", true), node("b", true)], &[(0, Some("m"), 1)]);
    let res = check_weak_bisim(&l, &r).unwrap();
    assert_eq!(res.verdict, Verdict::NotBisimilar);
    let w = res.witness.unwrap();
    assert_eq!(w.steps.len(), 1);
    assert!(w.steps[0].answer.is_none());
    let text = render_witness(&w, &l, &r);
    assert!(text.contains("REASON"), "{text}");
}

#[test]
fn content_mismatch_is_reported_at_depth() {
    let l = lts(vec![node("a", true), node("b", true)], &[(0, Some("l"), 1)]);
    let r = lts(vec![node("a", true), node("c", true)], &[(0, Some("l"), 1)]);
    let res = check_weak_bisim(&l, &r).unwrap();
    let w = res.witness.unwrap();
    assert_eq!(w.steps.len(), 1);
    assert!(w.steps[0].answer.is_some());
    assert!(w.reason.starts_with("content differs"), "{}", w.reason);
}

#[test]
fn verdict_is_symmetric() {
    let l = two_state();
    let r = lts(vec![node("a", true), node("b", true), node("b", true)], &[(0, Some("l"), 1), (1, None, 2), (2, Some("l"), 0)]);
    let a = check_weak_bisim(&l, &r).unwrap().verdict;
    let b = check_weak_bisim(&r, &l).unwrap().verdict;
    assert_eq!(a, b);
    assert_eq!(a, Verdict::NotBisimilar);
}

#[test]
fn single_state_spaces() {
    let l = lts(vec![node("a", true)], &[]);
    assert_eq!(check_weak_bisim(&l, &l).unwrap().verdict, Verdict::Bisimilar);
    let r = lts(vec![node("b", true)], &[]);
    assert_eq!(check_weak_bisim(&l, &r).unwrap().verdict, Verdict::NotBisimilar);
}

#[test]
fn truncated_input_is_refused() {
    let mut l = two_state();
    l.truncated = true;
    assert_eq!(check_weak_bisim(&l, &two_state()).unwrap_err(), EquivError::Truncated("left"));
}

#[test]
fn flattening_is_idempotent() {
    let n = bonus_desk();
    let l = n.build_lts(&n.initial, &n.fresh, &Limits::default());
    let once = flatten(&l, &SnapshotProjection);
    let twice = flatten(&once, &FlatIdentity);
    assert_eq!(once.to_canonical_text(), twice.to_canonical_text());
    assert_eq!(once.states[0].canonical(), l.states[0].canonical());
}

#[test]
fn translated_initial_marking_flattens_to_snapshot() {
    let n = shopping_cart(CartParams::default());
    let out = crate::translate::translate(&n, &n.initial).unwrap();
    assert_eq!(out.node(&out.net.initial), SnapshotProjection.node(&n.initial));
}

#[test]
fn bonus_desk_translation_is_certified() {
    let n = bonus_desk();
    let c = certify_translation(&n, &n.initial, &n.fresh, &Limits::default()).unwrap();
    assert_eq!(c.result.verdict, Verdict::Bisimilar, "{:?}", c.result.witness);
    assert_eq!(c.verified, Some(Ok(())));
    assert_eq!(c.audit.violations, 0);
    assert!(c.cpn_lts.num_states() > c.db_lts.num_states());
}

#[test]
fn small_cart_translation_is_certified() {
    let n = shopping_cart(CartParams::default());
    let c = certify_translation(&n, &n.initial, &n.fresh, &Limits::default()).unwrap();
    assert_eq!(c.result.verdict, Verdict::Bisimilar, "{:?}", c.result.witness.map(|w| render_witness(&w, &c.db_flat, &c.cpn_flat)));
    assert_eq!(c.verified, Some(Ok(())));
}

#[test]
fn every_mutation_is_killed_by_some_single_ticket_desk() {
    let stages = crate::translate::check_order(&bonus_desk().schema.constraints).len();
    for m in Mutation::all(stages) {
        let killed = [1, 2, 5].into_iter().any(|uid| {
            let n = bonus_desk_with(&[uid]);
            let c = certify_with(&n, &n.initial, &n.fresh, &Limits::default(), Some(m)).unwrap_or_else(|e| panic!("{m}: {e}"));
            c.result.verdict == Verdict::NotBisimilar && c.result.witness.is_some()
        });
        assert!(killed, "{m} survived");
    }
}

#[test]
fn truncated_exploration_is_refused() {
    let n = bonus_desk();
    let limits = Limits { max_states: 3, ..Limits::default() };
    assert!(matches!(certify_translation(&n, &n.initial, &n.fresh, &limits), Err(EquivError::Truncated(_))));
}

#[test]
fn prefix_refutation_finds_unmatched_content() {
    let l = two_state();
    let mut r = lts(vec![node("a", true), node("i", false), node("c", true)], &[(0, Some("l"), 1), (1, None, 2)]);
    r.truncated = true;
    let w = refute_by_content(&l, &r).unwrap();
    assert_eq!(w.steps[0].challenge.len(), 2);
    assert_eq!(w.steps[0].label, fire("l"));
    assert!(refute_by_content(&l, &two_state()).is_none());
}
