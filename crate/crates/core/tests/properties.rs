use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use dbnet::dbnet::{DbNet, Snapshot};
use dbnet::dsl::{parse_dbnet, print_dbnet};
use dbnet::equivalence::{check_weak_bisim, verify_relation, FlatNode, FlatState, Verdict};
use dbnet::fresh::{FreshPolicy, SampleDomains};
use dbnet::lts::{Edge, Label, Lts};
use dbnet::marking::Marking;
use dbnet::nucpn::{CpnTransition, NuCpn, Priority};
use dbnet::oracle::{eval_fo_oracle, from_constraint, from_ucq, sentence_holds};
use dbnet::query::eval_ucq;
use dbnet::random::{random_instance, random_query, random_schema};
use dbnet::relational::{Action, Constraint, FactTemplate, Instance, Outcome, Schema};
use dbnet::term::{Substitution, Term};
use dbnet::value::TypeDomain;

fn keyed_schema(rng: &mut StdRng) -> Schema {
    let mut s = random_schema(rng, 3);
    let keyed: Vec<_> = s.relations.values().filter(|r| r.arity() >= 2).map(|r| r.name.clone()).collect();
    for r in keyed {
        s.constraints.push(Constraint::PrimaryKey { relation: r, cols: vec![0] });
    }
    s
}

type Fact = (dbnet::value::Name, Vec<dbnet::value::Value>);

fn facts(inst: &Instance) -> Vec<Fact> {
    inst.facts().map(|(r, t)| (r.clone(), t.clone())).collect()
}

fn template((r, t): &Fact) -> FactTemplate {
    FactTemplate { relation: r.clone(), terms: t.iter().cloned().map(Term::Const).collect() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ucq_evaluation_matches_fo_oracle(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let schema = random_schema(&mut rng, 3);
        let inst = random_instance(&mut rng, &schema, 5);
        let q = random_query(&mut rng, &schema, "Q");
        prop_assert_eq!(eval_ucq(&q, &inst), eval_fo_oracle(&from_ucq(&q), &q.free, &inst));
    }

    #[test]
    fn action_deletes_then_adds_and_commits_only_if_consistent(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let schema = keyed_schema(&mut rng);
        let inst = random_instance(&mut rng, &schema, 4);
        let mut dels: Vec<Fact> = facts(&inst).into_iter().filter(|_| rng.random_bool(0.4)).collect();
        dels.extend(facts(&random_instance(&mut rng, &schema, 1)));
        let adds = facts(&random_instance(&mut rng, &schema, 2));
        let a = Action { name: "a".into(), params: vec![], adds: adds.iter().map(template).collect(), dels: dels.iter().map(template).collect() };

        let mut expected = inst.clone();
        for (r, t) in &dels {
            expected.remove(r, t);
        }
        for (r, t) in &adds {
            expected.insert(r, t.clone());
        }
        let consistent = schema.constraints.iter().all(|c| sentence_holds(&from_constraint(&schema, c), &expected));

        let (next, outcome) = schema.apply_action(&inst, &a, &Substitution::new()).unwrap();
        if consistent {
            prop_assert_eq!(outcome, Outcome::Commit);
            prop_assert_eq!(next, expected);
        } else {
            prop_assert_eq!(outcome, Outcome::Rollback);
            prop_assert_eq!(next, inst);
        }
    }

    #[test]
    fn random_nets_round_trip_through_the_dsl(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let schema = keyed_schema(&mut rng);
        let instance = random_instance(&mut rng, &schema, 3);
        let queries = (0..rng.random_range(0..3usize))
            .map(|i| {
                let q = random_query(&mut rng, &schema, &format!("Q{i}"));
                (q.name.clone(), q)
            })
            .collect();
        let n = DbNet {
            name: "random".into(),
            schema,
            queries,
            actions: Default::default(),
            places: vec![],
            transitions: vec![],
            initial: Snapshot { instance, marking: Marking::new() },
            samples: SampleDomains::default(),
            fresh: FreshPolicy::default(),
        };
        let text = print_dbnet(&n);
        let back = parse_dbnet(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &n, "{}", text);
        prop_assert_eq!(print_dbnet(&back), text);
    }

    #[test]
    fn priority_filter_keeps_exactly_the_top_level(prios in prop::collection::vec(-1i8..=1, 1..6), picks in prop::collection::vec(0usize..6, 0..12)) {
        let net = NuCpn {
            name: "p".into(),
            types: TypeDomain::default(),
            places: vec![],
            transitions: prios.iter().enumerate().map(|(i, p)| CpnTransition::new(&format!("t{i}"), Priority(*p))).collect(),
            initial: Marking::new(),
            samples: SampleDomains::default(),
            fresh: FreshPolicy::default(),
        };
        let raw: Vec<(usize, Substitution)> = picks.iter().map(|i| (i % prios.len(), Substitution::new())).collect();
        let kept = net.filter_priority(raw.clone());
        let top = raw.iter().map(|(i, _)| prios[*i]).max();
        let expected: Vec<_> = raw.iter().filter(|(i, _)| Some(prios[*i]) == top).cloned().collect();
        prop_assert_eq!(kept, expected);
    }
}

fn node(content: u8, stable: bool) -> FlatNode {
    FlatNode { state: FlatState { facts: vec![format!("F({content})")], control: vec![] }, stable }
}

fn fire(name: &str) -> Label {
    Label::Fire { transition: name.into(), binding: Substitution::new(), outcome: Some(Outcome::Commit) }
}

/// Small graphs over two contents, two visible labels and silent steps.
fn arb_lts() -> impl Strategy<Value = Lts<FlatNode>> {
    arb_lts_with(0.8)
}

fn arb_lts_with(stable: f64) -> impl Strategy<Value = Lts<FlatNode>> {
    (1usize..6).prop_flat_map(move |n| {
        let states = prop::collection::vec((0u8..2, prop::bool::weighted(stable)), n);
        let edges = prop::collection::vec((0..n as u32, 0u8..3, 0..n as u32), 0..(3 * n));
        (states, edges).prop_map(|(states, edges)| {
            let states: Vec<FlatNode> = states.into_iter().map(|(c, s)| node(c, s)).collect();
            let mut seen = BTreeSet::new();
            let edges = edges
                .into_iter()
                .filter(|e| seen.insert(*e))
                .map(|(src, l, dst)| Edge { src, label: if l == 0 { Label::Silent } else { fire(if l == 1 { "a" } else { "b" }) }, dst })
                .collect();
            Lts { states, initial: 0, edges, truncated: false }
        })
    })
}

fn with_silent_prefix(l: &Lts<FlatNode>) -> Lts<FlatNode> {
    let mut out = l.clone();
    let head = out.states[l.initial as usize].clone();
    out.states.push(head);
    let fresh = (out.states.len() - 1) as u32;
    out.edges.push(Edge { src: fresh, label: Label::Silent, dst: l.initial });
    out.initial = fresh;
    out
}

/// States reachable by `silent* label silent*` (or `silent*` for `None`) in a union graph.
fn weak_post(adj: &[Vec<(Option<String>, usize)>], from: usize, label: Option<&str>) -> BTreeSet<usize> {
    let closure = |start: BTreeSet<usize>| {
        let mut seen = start.clone();
        let mut todo: Vec<usize> = start.into_iter().collect();
        while let Some(u) = todo.pop() {
            for (l, v) in &adj[u] {
                if l.is_none() && seen.insert(*v) {
                    todo.push(*v);
                }
            }
        }
        seen
    };
    let pre = closure(BTreeSet::from([from]));
    match label {
        None => pre,
        Some(a) => closure(pre.iter().flat_map(|&u| adj[u].iter().filter(|(l, _)| l.as_deref() == Some(a)).map(|(_, v)| *v)).collect()),
    }
}

/// Textbook greatest fixpoint over pairs with equal content; every strong step must be answered
/// by a weak one, in both directions.
fn naive_weakly_bisimilar(l: &Lts<FlatNode>, r: &Lts<FlatNode>) -> bool {
    let off = l.states.len();
    let content: Vec<String> = l.states.iter().chain(&r.states).map(|s| s.state.canonical()).collect();
    let mut adj = vec![Vec::new(); content.len()];
    for (base, lts) in [(0, l), (off, r)] {
        for e in &lts.edges {
            let lab = e.label.transition().map(|t| t.to_string());
            adj[base + e.src as usize].push((lab, base + e.dst as usize));
        }
    }
    let n = content.len();
    let mut rel: BTreeSet<(usize, usize)> = (0..n).flat_map(|p| (0..n).map(move |q| (p, q))).filter(|&(p, q)| content[p] == content[q]).collect();
    loop {
        let answered = |p: usize, q: usize, rel: &BTreeSet<(usize, usize)>| {
            adj[p].iter().all(|(a, p2)| weak_post(&adj, q, a.as_deref()).iter().any(|&q2| rel.contains(&(*p2, q2))))
        };
        let next: BTreeSet<_> = rel.iter().copied().filter(|&(p, q)| answered(p, q, &rel) && answered(q, p, &rel)).collect();
        if next == rel {
            return rel.contains(&(l.initial as usize, off + r.initial as usize));
        }
        rel = next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn refinement_agrees_with_naive_fixpoint_on_stable_graphs(l in arb_lts_with(1.0), r in arb_lts_with(1.0)) {
        let fast = check_weak_bisim(&l, &r).unwrap().verdict == Verdict::Bisimilar;
        prop_assert_eq!(fast, naive_weakly_bisimilar(&l, &r));
    }

    #[test]
    fn bisimilarity_is_reflexive(l in arb_lts()) {
        let r = check_weak_bisim(&l, &l).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Bisimilar);
        prop_assert_eq!(verify_relation(&l, &l, &r), Ok(()));
    }

    #[test]
    fn bisimilarity_is_symmetric_and_verified(l in arb_lts(), r in arb_lts()) {
        let lr = check_weak_bisim(&l, &r).unwrap();
        let rl = check_weak_bisim(&r, &l).unwrap();
        prop_assert_eq!(lr.verdict, rl.verdict);
        if lr.verdict == Verdict::Bisimilar {
            prop_assert_eq!(verify_relation(&l, &r, &lr), Ok(()));
        } else {
            prop_assert!(lr.witness.is_some());
        }
    }

    #[test]
    fn silent_prefix_is_absorbed(l in arb_lts()) {
        let p = with_silent_prefix(&l);
        prop_assert_eq!(check_weak_bisim(&l, &p).unwrap().verdict, Verdict::Bisimilar);
    }

    #[test]
    fn unmatched_initial_label_is_detected(l in arb_lts()) {
        let mut r = l.clone();
        let Some(e) = r.edges.iter_mut().find(|e| e.src == l.initial && !e.label.is_silent()) else { return Ok(()) };
        e.label = fire("z");
        let res = check_weak_bisim(&l, &r).unwrap();
        prop_assert_eq!(res.verdict, Verdict::NotBisimilar);
        prop_assert!(res.witness.is_some());
    }
}
