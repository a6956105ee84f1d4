//! Coloured Petri nets with fresh-name creation, read arcs and global transition priorities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::dbnet::{Violation, ViolationKind};
use crate::fresh::{FreshPolicy, SampleDomains};
use crate::lts::{explore, Label, Limits, Lts, State};
use crate::marking::{match_consuming, match_reading, ArcInscription, Marking};
use crate::term::{ground, Guard, Substitution, Term};
use crate::value::{Name, TypeDomain, Value};

/// Totally ordered priority level; larger fires first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Priority(pub i8);

impl Priority {
    pub const LOW: Priority = Priority(-1);
    pub const NORMAL: Priority = Priority(0);
    pub const HIGH: Priority = Priority(1);
}

impl Default for Priority {
    fn default() -> Self {
        Priority::NORMAL
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Priority::LOW => f.write_str("low"),
            Priority::NORMAL => f.write_str("normal"),
            Priority::HIGH => f.write_str("high"),
            Priority(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Priority {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "low" => Ok(Priority::LOW),
            "normal" => Ok(Priority::NORMAL),
            "high" => Ok(Priority::HIGH),
            n => n.parse().map(Priority).map_err(|_| format!("bad priority `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CpnPlace {
    pub name: Name,
    pub color: Vec<Name>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CpnTransition {
    pub name: Name,
    pub guard: Guard,
    pub priority: Priority,
    pub inputs: Vec<ArcInscription>,
    /// Checked against the pre-marking, never consumed.
    pub reads: Vec<ArcInscription>,
    pub outputs: Vec<ArcInscription>,
    pub fresh: BTreeSet<Name>,
}

impl CpnTransition {
    pub fn new(name: &str, priority: Priority) -> Self {
        CpnTransition {
            name: name.into(),
            guard: Guard::True,
            priority,
            inputs: vec![],
            reads: vec![],
            outputs: vec![],
            fresh: BTreeSet::new(),
        }
    }

    fn bound_vars(&self) -> BTreeSet<Name> {
        self.inputs.iter().chain(&self.reads).flat_map(|a| a.terms.iter().filter_map(Term::as_var).cloned()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NuCpn {
    pub name: Name,
    pub types: TypeDomain,
    pub places: Vec<CpnPlace>,
    pub transitions: Vec<CpnTransition>,
    pub initial: Marking,
    pub samples: SampleDomains,
    pub fresh: FreshPolicy,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CpnError {
    #[error("transition `{0}` is not enabled under the given binding: {1}")]
    NotEnabled(Name, String),
}

impl State for Marking {
    fn canonical(&self) -> String {
        format!("| {}", self.token_lines().join(";"))
    }
}

/// Output-only variables split into fresh ones and ones drawn from sample domains.
#[derive(Clone, Debug)]
struct Producers {
    fresh: Vec<(Name, Name)>,
    external: Vec<(Name, Name)>,
}

/// Counts gathered while exploring: every fired binding is compared against all
/// token- and guard-enabled bindings of the same state.
#[derive(Debug, Default)]
pub struct PriorityAudit {
    pub fired: usize,
    pub violations: usize,
}

pub struct CpnExploration {
    pub lts: Lts<Marking>,
    pub audit: PriorityAudit,
}

impl NuCpn {
    pub fn place(&self, name: &str) -> Option<&CpnPlace> {
        self.places.iter().find(|p| &*p.name == name)
    }

    pub fn transition(&self, name: &str) -> Option<(usize, &CpnTransition)> {
        self.transitions.iter().enumerate().find(|(_, t)| &*t.name == name)
    }

    pub fn var_types(&self, t: &CpnTransition) -> BTreeMap<Name, Name> {
        let mut types = BTreeMap::new();
        for a in t.inputs.iter().chain(&t.reads).chain(&t.outputs) {
            if let Some(p) = self.place(&a.place) {
                for (term, ty) in a.terms.iter().zip(&p.color) {
                    if let Term::Var(v) = term {
                        types.entry(v.clone()).or_insert_with(|| ty.clone());
                    }
                }
            }
        }
        types
    }

    fn producers(&self, t: &CpnTransition) -> Producers {
        let types = self.var_types(t);
        let bound = t.bound_vars();
        let out_vars: BTreeSet<&Name> = t.outputs.iter().flat_map(|a| a.terms.iter().filter_map(Term::as_var)).collect();
        let typed = |v: &Name| (v.clone(), types.get(v).cloned().unwrap_or_else(|| "?".into()));
        Producers {
            fresh: t.fresh.iter().map(typed).collect(),
            external: out_vars.into_iter().filter(|v| !bound.contains(*v) && !t.fresh.contains(*v)).map(typed).collect(),
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |kind, location: String, message: String| out.push(Violation { kind, location, message });
        let mut names = BTreeSet::new();
        for p in &self.places {
            if !names.insert(&p.name) {
                push(ViolationKind::DuplicateName, format!("place {}", p.name), "name declared twice".into());
            }
            for ty in &p.color {
                if self.types.get(ty).is_none() {
                    push(ViolationKind::Schema, format!("place {}", p.name), format!("unknown type `{ty}`"));
                }
            }
        }
        let mut tnames = BTreeSet::new();
        for t in &self.transitions {
            let loc = format!("transition {}", t.name);
            if !tnames.insert(&t.name) {
                push(ViolationKind::DuplicateName, loc.clone(), "name declared twice".into());
            }
            let types = self.var_types(t);
            for a in t.inputs.iter().chain(&t.reads).chain(&t.outputs) {
                let Some(p) = self.place(&a.place) else {
                    push(ViolationKind::UnknownPlace, loc.clone(), format!("unknown place `{}`", a.place));
                    continue;
                };
                if p.color.len() != a.terms.len() {
                    push(ViolationKind::ArcArity, loc.clone(), format!("arc to `{}` has wrong arity", a.place));
                }
                for (term, ty) in a.terms.iter().zip(&p.color) {
                    let ok = match term {
                        Term::Const(v) => &v.ty == ty && self.types.kind(ty).is_some_and(|k| v.fits(k)),
                        Term::Var(v) => &types[v] == ty,
                    };
                    if !ok {
                        push(ViolationKind::ArcType, loc.clone(), format!("`{term}` does not match color of `{}`", a.place));
                    }
                }
            }
            let bound = t.bound_vars();
            for v in t.guard.vars() {
                if !bound.contains(&v) {
                    push(ViolationKind::GuardScope, loc.clone(), format!("guard variable `{v}` is not bound by an input or read arc"));
                }
            }
            for v in &t.fresh {
                if bound.contains(v) || !types.contains_key(v) {
                    push(ViolationKind::FreshMisuse, loc.clone(), format!("fresh variable `{v}` must occur on output arcs only"));
                }
            }
            for (v, ty) in self.producers(t).external {
                if self.samples.lookup(&v, &ty, &self.types).is_empty() {
                    push(ViolationKind::MissingSamples, loc.clone(), format!("output variable `{v}` has no sample domain"));
                }
            }
        }
        for (p, tok, _) in self.initial.entries() {
            let ok = self.place(p).is_some_and(|pl| {
                pl.color.len() == tok.len()
                    && tok.iter().zip(&pl.color).all(|(v, ty)| &v.ty == ty && self.types.kind(ty).is_some_and(|k| v.fits(k)))
            });
            if !ok {
                push(ViolationKind::InitialState, "initial marking".into(), format!("bad token on `{p}`"));
            }
        }
        out
    }

    fn token_guard_enabled(&self, m: &Marking, t: &CpnTransition, prod: &Producers, fp: &FreshPolicy) -> Vec<Substitution> {
        if t.inputs.iter().chain(&t.reads).any(|a| !m.is_marked(&a.place)) {
            return vec![];
        }
        let mut partial = match_consuming(&t.inputs, m, &Substitution::new());
        partial = match_reading(&t.reads, m, partial);
        partial.retain(|b| t.guard.eval(b) == Some(true));
        if partial.is_empty() || (prod.fresh.is_empty() && prod.external.is_empty()) {
            partial.sort();
            partial.dedup();
            return partial;
        }
        let used: BTreeSet<Value> = m.values().cloned().collect();
        let fresh = fp.assignments(&prod.fresh, &self.types, &used);
        let ext = self.samples.assignments(&prod.external, &self.types);
        let mut out = Vec::new();
        for b in &partial {
            for f in &fresh {
                for e in &ext {
                    let mut full = b.clone();
                    full.0.extend(f.0.iter().chain(e.0.iter()).map(|(k, v)| (k.clone(), v.clone())));
                    out.push(full);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn all_producers(&self) -> Vec<Producers> {
        self.transitions.iter().map(|t| self.producers(t)).collect()
    }

    /// Bindings that are token- and guard-enabled, ignoring priorities.
    pub fn raw_enabled(&self, m: &Marking, fp: &FreshPolicy) -> Vec<(usize, Substitution)> {
        self.raw_with(m, fp, &self.all_producers())
    }

    fn raw_with(&self, m: &Marking, fp: &FreshPolicy, prods: &[Producers]) -> Vec<(usize, Substitution)> {
        self.transitions
            .iter()
            .zip(prods)
            .enumerate()
            .flat_map(|(i, (t, p))| self.token_guard_enabled(m, t, p, fp).into_iter().map(move |b| (i, b)))
            .collect()
    }

    /// Keeps only bindings at the highest priority level enabled anywhere in the net.
    pub fn filter_priority(&self, raw: Vec<(usize, Substitution)>) -> Vec<(usize, Substitution)> {
        let Some(top) = raw.iter().map(|(i, _)| self.transitions[*i].priority).max() else { return raw };
        raw.into_iter().filter(|(i, _)| self.transitions[*i].priority == top).collect()
    }

    pub fn cpn_enabled(&self, m: &Marking, fp: &FreshPolicy) -> Vec<(usize, Substitution)> {
        self.filter_priority(self.raw_enabled(m, fp))
    }

    fn fire_unchecked(&self, m: &Marking, t: &CpnTransition, theta: &Substitution) -> Option<Marking> {
        let mut next = m.clone();
        for a in &t.inputs {
            if !next.remove(&a.place, &ground(&a.terms, theta)?) {
                return None;
            }
        }
        for a in &t.outputs {
            next.add(&a.place, ground(&a.terms, theta)?, 1);
        }
        Some(next)
    }

    /// Checks full enabledness, including priority, before firing.
    pub fn cpn_fire(&self, m: &Marking, t: usize, theta: &Substitution, fp: &FreshPolicy) -> Result<Marking, CpnError> {
        let tr = &self.transitions[t];
        let enabled = self.cpn_enabled(m, fp);
        if !enabled.iter().any(|(i, b)| *i == t && b == theta) {
            return Err(CpnError::NotEnabled(tr.name.clone(), format!("binding {theta} is not enabled")));
        }
        self.fire_unchecked(m, tr, theta)
            .ok_or_else(|| CpnError::NotEnabled(tr.name.clone(), "inscription could not be grounded".into()))
    }

    fn successors(&self, m: &Marking, fp: &FreshPolicy, prods: &[Producers], audit: &AuditCounters) -> Vec<(Label, Marking)> {
        let raw = self.raw_with(m, fp, prods);
        let top = raw.iter().map(|(i, _)| self.transitions[*i].priority).max();
        let fired = self.filter_priority(raw.clone());
        audit.fired.fetch_add(fired.len(), Ordering::Relaxed);
        let bad = fired
            .iter()
            .filter(|(i, _)| raw.iter().any(|(j, _)| self.transitions[*j].priority > self.transitions[*i].priority))
            .count();
        debug_assert!(top.is_some() || fired.is_empty());
        audit.violations.fetch_add(bad, Ordering::Relaxed);
        fired
            .into_iter()
            .map(|(i, b)| {
                let t = &self.transitions[i];
                let next = self.fire_unchecked(m, t, &b).expect("enabled binding must fire");
                (Label::Fire { transition: t.name.clone(), binding: b, outcome: None }, next)
            })
            .collect()
    }

    pub fn cpn_build_lts(&self, fp: &FreshPolicy, limits: &Limits) -> CpnExploration {
        let prods = self.all_producers();
        let counters = AuditCounters::default();
        let lts = explore(self.initial.clone(), limits, |m| self.successors(m, fp, &prods, &counters));
        CpnExploration {
            lts,
            audit: PriorityAudit { fired: counters.fired.into_inner(), violations: counters.violations.into_inner() },
        }
    }
}

#[derive(Default)]
struct AuditCounters {
    fired: AtomicUsize,
    violations: AtomicUsize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{BOOL, INT};

    fn arc(p: &str, terms: Vec<Term>) -> ArcInscription {
        ArcInscription::new(p, terms)
    }

    fn x() -> Term {
        Term::var("x")
    }

    fn bool_term(b: bool) -> Term {
        Term::Const(Value::boolean(b))
    }

    /// Deletion component: ExistsD consumes R⟨x⟩ at high priority, NotExistsD at low priority.
    fn deletion_component() -> NuCpn {
        let mut exists = CpnTransition::new("ExistsD1", Priority::HIGH);
        exists.inputs = vec![arc("D1", vec![x()]), arc("R", vec![x()])];
        exists.outputs = vec![arc("Next", vec![x()]), arc("DoneD1", vec![bool_term(true)])];
        let mut not_exists = CpnTransition::new("NotExistsD1", Priority::LOW);
        not_exists.inputs = vec![arc("D1", vec![x()])];
        not_exists.outputs = vec![arc("Next", vec![x()]), arc("DoneD1", vec![bool_term(false)])];
        let mut initial = Marking::new();
        initial.add(&"D1".into(), vec![Value::int(INT, 1)], 1);
        initial.add(&"R".into(), vec![Value::int(INT, 1)], 1);
        NuCpn {
            name: "del".into(),
            types: TypeDomain::default(),
            places: ["D1", "R", "Next"]
                .iter()
                .map(|p| CpnPlace { name: (*p).into(), color: vec![INT.into()] })
                .chain([CpnPlace { name: "DoneD1".into(), color: vec![BOOL.into()] }])
                .collect(),
            transitions: vec![exists, not_exists],
            initial,
            samples: SampleDomains::default(),
            fresh: FreshPolicy::default(),
        }
    }

    #[test]
    fn high_priority_shadows_low() {
        let n = deletion_component();
        assert!(n.validate().is_empty());
        let fp = FreshPolicy::default();
        assert_eq!(n.raw_enabled(&n.initial, &fp).len(), 2);
        let e = n.cpn_enabled(&n.initial, &fp);
        assert_eq!(e.len(), 1);
        assert_eq!(&*n.transitions[e[0].0].name, "ExistsD1");
    }

    #[test]
    fn low_priority_fires_when_alone() {
        let n = deletion_component();
        let mut m = n.initial.clone();
        m.remove("R", &[Value::int(INT, 1)]);
        let e = n.cpn_enabled(&m, &FreshPolicy::default());
        assert_eq!(e.len(), 1);
        assert_eq!(&*n.transitions[e[0].0].name, "NotExistsD1");
        let next = n.cpn_fire(&m, e[0].0, &e[0].1, &FreshPolicy::default()).unwrap();
        assert_eq!(next.count("DoneD1", &[Value::boolean(false)]), 1);
    }

    #[test]
    fn read_arc_needs_a_token_and_keeps_it() {
        let mut t = CpnTransition::new("Check", Priority::NORMAL);
        t.inputs = vec![arc("A", vec![x()])];
        t.reads = vec![arc("B", vec![x()])];
        t.outputs = vec![arc("C", vec![x()])];
        let mut n = deletion_component();
        n.places = ["A", "B", "C"].iter().map(|p| CpnPlace { name: (*p).into(), color: vec![INT.into()] }).collect();
        n.transitions = vec![t];
        let one = vec![Value::int(INT, 1)];
        let mut m = Marking::new();
        m.add(&"A".into(), one.clone(), 1);
        assert!(n.cpn_enabled(&m, &FreshPolicy::default()).is_empty());
        m.add(&"B".into(), one.clone(), 1);
        let e = n.cpn_enabled(&m, &FreshPolicy::default());
        let next = n.cpn_fire(&m, 0, &e[0].1, &FreshPolicy::default()).unwrap();
        assert_eq!(next.count("B", &one), 1);
        assert_eq!(next.count("C", &one), 1);
        assert_eq!(next.count("A", &one), 0);
    }

    #[test]
    fn firing_a_shadowed_binding_is_rejected() {
        let n = deletion_component();
        let b: Substitution = [("x".into(), Value::int(INT, 1))].into_iter().collect();
        assert!(n.cpn_fire(&n.initial, 1, &b, &FreshPolicy::default()).is_err());
    }

    #[test]
    fn single_transition_lts_and_audit() {
        let n = deletion_component();
        let ex = n.cpn_build_lts(&FreshPolicy::default(), &Limits::default());
        assert_eq!(ex.lts.num_states(), 2);
        assert_eq!(ex.audit.violations, 0);
        assert_eq!(ex.audit.fired, 1);
    }

    #[test]
    fn fresh_output_avoids_marking_values() {
        let mut t = CpnTransition::new("New", Priority::NORMAL);
        t.inputs = vec![arc("A", vec![x()])];
        t.outputs = vec![arc("A", vec![Term::var("n")])];
        t.fresh.insert("n".into());
        let mut n = deletion_component();
        n.places = vec![CpnPlace { name: "A".into(), color: vec![INT.into()] }];
        n.transitions = vec![t];
        let mut m = Marking::new();
        m.add(&"A".into(), vec![Value::int(INT, 1000)], 1);
        let e = n.cpn_enabled(&m, &FreshPolicy::default());
        assert_eq!(e[0].1.get("n"), Some(&Value::int(INT, 1001)));
    }

    #[test]
    fn priority_text_forms() {
        assert_eq!("high".parse(), Ok(Priority::HIGH));
        assert_eq!("3".parse(), Ok(Priority(3)));
        assert!(Priority::LOW < Priority::NORMAL && Priority::NORMAL < Priority::HIGH);
        assert_eq!(Priority(5).to_string(), "5");
    }
}
