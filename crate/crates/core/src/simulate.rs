//! Seeded random runs. Each step picks uniformly among all enabled firings; identical seeds give
//! identical traces.

use std::fmt::Write;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::dbnet::{DbNet, Snapshot, TransitionVars};
use crate::fresh::FreshPolicy;
use crate::lts::{Label, State};
use crate::marking::Marking;
use crate::nucpn::NuCpn;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace<S> {
    pub initial: S,
    pub steps: Vec<(Label, S)>,
    /// The run stopped early because nothing was enabled.
    pub deadlocked: bool,
}

impl<S: State> Trace<S> {
    /// `INIT <state>`, one `STEP <n> <label>` / `STATE <state>` pair per firing, then `END`.
    pub fn render(&self) -> String {
        let mut out = format!("INIT {}\n", self.initial.canonical());
        for (i, (l, s)) in self.steps.iter().enumerate() {
            writeln!(out, "STEP {} {l}\nSTATE {}", i + 1, s.canonical()).unwrap();
        }
        out.push_str(if self.deadlocked { "END deadlock\n" } else { "END\n" });
        out
    }
}

pub fn simulate_with<S: State>(initial: S, steps: usize, seed: u64, succ: impl Fn(&S) -> Vec<(Label, S)>) -> Trace<S> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut cur = initial.clone();
    let mut out = Vec::new();
    for _ in 0..steps {
        let mut next = succ(&cur);
        if next.is_empty() {
            return Trace { initial, steps: out, deadlocked: true };
        }
        let pick = next.swap_remove(rng.random_range(0..next.len()));
        cur = pick.1.clone();
        out.push(pick);
    }
    Trace { initial, steps: out, deadlocked: false }
}

pub fn simulate_dbnet(net: &DbNet, s0: &Snapshot, fp: &FreshPolicy, steps: usize, seed: u64) -> Trace<Snapshot> {
    let vars: Vec<TransitionVars> = net.transitions.iter().map(|t| net.transition_vars(t)).collect();
    simulate_with(s0.clone(), steps, seed, |s| net.successors(s, &vars, fp))
}

pub fn simulate_cpn(net: &NuCpn, fp: &FreshPolicy, steps: usize, seed: u64) -> Trace<Marking> {
    simulate_with(net.initial.clone(), steps, seed, |m| {
        net.cpn_enabled(m, fp)
            .into_iter()
            .map(|(i, b)| {
                let next = net.cpn_fire(m, i, &b, fp).expect("enabled binding fires");
                let t = &net.transitions[i];
                (Label::Fire { transition: t.name.clone(), binding: b, outcome: None }, next)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{bonus_desk, shopping_cart, CartParams};

    #[test]
    fn same_seed_same_trace() {
        let n = shopping_cart(CartParams::default());
        let a = simulate_dbnet(&n, &n.initial, &n.fresh, 30, 7).render();
        let b = simulate_dbnet(&n, &n.initial, &n.fresh, 30, 7).render();
        assert_eq!(a, b);
        assert!(a.starts_with("INIT "));
    }

    #[test]
    fn every_step_is_a_real_firing() {
        let n = bonus_desk();
        let t = simulate_dbnet(&n, &n.initial, &n.fresh, 25, 3);
        let mut cur = t.initial.clone();
        for (label, next) in &t.steps {
            let Label::Fire { transition, binding, .. } = label else { panic!("silent step in a DB-net run") };
            let tr = n.transition(transition).unwrap();
            assert!(n.enabled_bindings(&cur, tr, &n.fresh).iter().any(|b| b.restrict(binding.0.keys()) == *binding));
            cur = next.clone();
        }
    }

    #[test]
    fn deadlock_stops_the_run() {
        let mut n = bonus_desk();
        n.initial.marking = Marking::new();
        let t = simulate_dbnet(&n, &n.initial, &n.fresh, 10, 1);
        assert!(t.deadlocked && t.steps.is_empty());
        assert!(t.render().ends_with("END deadlock\n"));
    }
}
