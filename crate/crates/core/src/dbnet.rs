//! The three-layer DB-net: persistence, data logic and a coloured control net with view
//! places, action bindings and rollback arcs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::fresh::{FreshPolicy, SampleDomains};
use crate::lts::{explore, Label, Limits, Lts, State};
use crate::marking::{match_consuming, ArcInscription, Marking};
use crate::query::{eval_ucq, validate_view_query, AnswerSet, UcqQuery};
use crate::relational::{Action, Instance, Outcome, RelError, Schema};
use crate::term::{ground, unify, Guard, Substitution, Term};
use crate::value::{Name, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlaceKind {
    Control,
    View { query: Name },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Place {
    pub name: Name,
    pub color: Vec<Name>,
    pub kind: PlaceKind,
}

impl Place {
    pub fn is_view(&self) -> bool {
        matches!(self.kind, PlaceKind::View { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionBinding {
    pub action: Name,
    pub args: Vec<Term>,
}

/// `inputs` consume from control places; `reads` query view places in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub name: Name,
    pub inputs: Vec<ArcInscription>,
    pub reads: Vec<ArcInscription>,
    pub outputs: Vec<ArcInscription>,
    pub rollbacks: Vec<ArcInscription>,
    pub guard: Guard,
    pub action: Option<ActionBinding>,
    pub fresh: BTreeSet<Name>,
}

impl Transition {
    pub fn new(name: &str) -> Self {
        Transition {
            name: name.into(),
            inputs: vec![],
            reads: vec![],
            outputs: vec![],
            rollbacks: vec![],
            guard: Guard::True,
            action: None,
            fresh: BTreeSet::new(),
        }
    }

    /// Variables bound by consuming inputs and view reads.
    pub fn bound_vars(&self) -> BTreeSet<Name> {
        self.inputs.iter().chain(&self.reads).flat_map(|a| a.terms.iter().filter_map(Term::as_var).cloned()).collect()
    }

    fn produced_terms(&self) -> impl Iterator<Item = &Term> {
        self.outputs
            .iter()
            .chain(&self.rollbacks)
            .flat_map(|a| a.terms.iter())
            .chain(self.action.iter().flat_map(|b| b.args.iter()))
    }
}

/// Variable classification of one transition, in the order used for labels and gadget tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionVars {
    pub types: BTreeMap<Name, Name>,
    /// Variables first bound by consuming input arcs, in arc order.
    pub input: Vec<(Name, Name)>,
    pub fresh: Vec<(Name, Name)>,
    /// Output-only variables ranging over a sample domain.
    pub external: Vec<(Name, Name)>,
    /// Per view read, the variables it binds first.
    pub view: Vec<Vec<(Name, Name)>>,
}

impl TransitionVars {
    /// input ++ fresh ++ external ++ view variables.
    pub fn carried(&self) -> Vec<(Name, Name)> {
        self.input.iter().chain(&self.fresh).chain(&self.external).chain(self.view.iter().flatten()).cloned().collect()
    }

    pub fn carried_upto_view(&self, k: usize) -> Vec<(Name, Name)> {
        self.input.iter().chain(&self.fresh).chain(&self.external).chain(self.view[..k].iter().flatten()).cloned().collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Snapshot {
    pub instance: Instance,
    pub marking: Marking,
}

impl Snapshot {
    pub fn values(&self) -> BTreeSet<Value> {
        self.instance.values().chain(self.marking.values()).cloned().collect()
    }
}

impl State for Snapshot {
    fn canonical(&self) -> String {
        format!("{} | {}", self.instance.fact_lines().join(";"), self.marking.token_lines().join(";"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    Schema,
    Query,
    Action,
    DuplicateName,
    UnknownPlace,
    UnknownQuery,
    UnknownAction,
    ViewColor,
    ArcTarget,
    ArcArity,
    ArcType,
    ConflictingVarType,
    GuardScope,
    GuardType,
    ActionArity,
    ActionArgType,
    FreshMisuse,
    UnboundVariable,
    MissingSamples,
    InitialState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("transition `{0}` is not enabled under the given binding: {1}")]
    NotEnabled(Name, String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(Name),
    #[error(transparent)]
    Rel(#[from] RelError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DbNet {
    pub name: Name,
    pub schema: Schema,
    pub queries: BTreeMap<Name, UcqQuery>,
    pub actions: BTreeMap<Name, Action>,
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
    pub initial: Snapshot,
    pub samples: SampleDomains,
    /// Default policy declared by the model; command-line flags may override it.
    pub fresh: FreshPolicy,
}

impl DbNet {
    pub fn place(&self, name: &str) -> Option<&Place> {
        self.places.iter().find(|p| &*p.name == name)
    }

    pub fn transition(&self, name: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| &*t.name == name)
    }

    pub fn view_query(&self, place: &str) -> Option<&UcqQuery> {
        match &self.place(place)?.kind {
            PlaceKind::View { query } => self.queries.get(query),
            PlaceKind::Control => None,
        }
    }

    /// Types come from the first occurrence; conflicts are left for `validate` to report.
    pub fn transition_vars(&self, t: &Transition) -> TransitionVars {
        let mut types: BTreeMap<Name, Name> = BTreeMap::new();
        let mut note = |terms: &[Term], color: &[Name]| {
            for (term, ty) in terms.iter().zip(color) {
                if let Term::Var(v) = term {
                    types.entry(v.clone()).or_insert_with(|| ty.clone());
                }
            }
        };
        for a in t.inputs.iter().chain(&t.reads).chain(&t.outputs).chain(&t.rollbacks) {
            if let Some(p) = self.place(&a.place) {
                note(&a.terms, &p.color);
            }
        }
        if let Some(b) = &t.action {
            if let Some(act) = self.actions.get(&b.action) {
                note(&b.args, &act.params.iter().map(|(_, ty)| ty.clone()).collect_vec());
            }
        }
        let typed = |v: &Name| (v.clone(), types.get(v).cloned().unwrap_or_else(|| "?".into()));
        let mut seen: BTreeSet<Name> = BTreeSet::new();
        let first = |arcs: &[ArcInscription], seen: &mut BTreeSet<Name>| -> Vec<(Name, Name)> {
            arcs.iter()
                .flat_map(|a| a.terms.iter().filter_map(Term::as_var))
                .filter(|v| seen.insert((*v).clone()))
                .map(typed)
                .collect()
        };
        let input = first(&t.inputs, &mut seen);
        let view: Vec<Vec<(Name, Name)>> = t.reads.iter().map(|r| first(std::slice::from_ref(r), &mut seen)).collect();
        let fresh: Vec<(Name, Name)> = t.fresh.iter().map(typed).collect();
        let external: Vec<(Name, Name)> = t
            .produced_terms()
            .filter_map(Term::as_var)
            .filter(|v| !seen.contains(*v) && !t.fresh.contains(*v))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(typed)
            .collect();
        TransitionVars { types, input, fresh, external, view }
    }

    /// Reports every structural violation; an empty list means the net is well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |kind, location: String, message: String| out.push(Violation { kind, location, message });

        for r in self.schema.relations.values() {
            if let Err(e) = self.schema.validate_relation(r) {
                push(ViolationKind::Schema, format!("relation {}", r.name), e.to_string());
            }
        }
        for c in &self.schema.constraints {
            if let Err(e) = self.schema.validate_constraint(c) {
                push(ViolationKind::Schema, format!("constraint {c}"), e.to_string());
            }
        }
        for q in self.queries.values() {
            if let Err(e) = q.validate(&self.schema) {
                push(ViolationKind::Query, format!("query {}", q.name), e.to_string());
            }
        }
        for a in self.actions.values() {
            if let Err(e) = self.schema.validate_action(a) {
                push(ViolationKind::Action, format!("action {}", a.name), e.to_string());
            }
        }

        let mut names = BTreeSet::new();
        for p in &self.places {
            if !names.insert(p.name.clone()) || self.schema.relations.contains_key(&p.name) {
                push(ViolationKind::DuplicateName, format!("place {}", p.name), "name declared twice".into());
            }
            for ty in &p.color {
                if self.schema.types.get(ty).is_none() {
                    push(ViolationKind::Schema, format!("place {}", p.name), format!("unknown type `{ty}`"));
                }
            }
            if let PlaceKind::View { query } = &p.kind {
                match self.queries.get(query) {
                    None => push(ViolationKind::UnknownQuery, format!("view {}", p.name), format!("unknown query `{query}`")),
                    Some(q) => {
                        if let Err(ms) = validate_view_query(q, &p.color) {
                            for m in ms {
                                push(ViolationKind::ViewColor, format!("view {}", p.name), m.to_string());
                            }
                        }
                    }
                }
            }
        }
        let mut tnames = BTreeSet::new();
        for t in &self.transitions {
            if !tnames.insert(t.name.clone()) {
                push(ViolationKind::DuplicateName, format!("transition {}", t.name), "name declared twice".into());
            }
        }
        for t in &self.transitions {
            self.validate_transition(t, &mut out);
        }

        let loc = "initial state".to_string();
        let mut push = |kind, message: String| out.push(Violation { kind, location: loc.clone(), message });
        if let Err(e) = self.schema.check_instance_typing(&self.initial.instance) {
            push(ViolationKind::InitialState, e.to_string());
        } else {
            for c in self.schema.violations(&self.initial.instance) {
                push(ViolationKind::InitialState, format!("instance violates {c}"));
            }
        }
        for (p, tok, _) in self.initial.marking.entries() {
            match self.place(p) {
                Some(pl) if !pl.is_view() => {
                    let ok = pl.color.len() == tok.len()
                        && tok.iter().zip(&pl.color).all(|(v, ty)| self.schema.check_value(v, ty).is_ok());
                    if !ok {
                        push(ViolationKind::InitialState, format!("token {} does not match the color of `{p}`", crate::marking::token_line(p, tok)));
                    }
                }
                Some(_) => push(ViolationKind::InitialState, format!("view place `{p}` cannot hold tokens")),
                None => push(ViolationKind::UnknownPlace, format!("token on unknown place `{p}`")),
            }
        }
        out
    }

    fn validate_transition(&self, t: &Transition, out: &mut Vec<Violation>) {
        let loc = |what: &str| format!("transition {}{what}", t.name);
        let mut push = |kind, location: String, message: String| out.push(Violation { kind, location, message });
        let tv = self.transition_vars(t);

        let groups: [(&str, &[ArcInscription], bool); 4] =
            [("in", &t.inputs, false), ("read", &t.reads, true), ("out", &t.outputs, false), ("rollback", &t.rollbacks, false)];
        for (kind, arcs, wants_view) in groups {
            for a in arcs {
                let here = loc(&format!(", {kind} arc {}", a.place));
                let Some(p) = self.place(&a.place) else {
                    push(ViolationKind::UnknownPlace, here, format!("unknown place `{}`", a.place));
                    continue;
                };
                if p.is_view() != wants_view {
                    let msg = if wants_view { "reads must target view places" } else { "arc must target a control place" };
                    push(ViolationKind::ArcTarget, here.clone(), msg.into());
                }
                if p.color.len() != a.terms.len() {
                    push(
                        ViolationKind::ArcArity,
                        here.clone(),
                        format!("inscription has {} components, color has {}", a.terms.len(), p.color.len()),
                    );
                }
                for (term, ty) in a.terms.iter().zip(&p.color) {
                    match term {
                        Term::Const(v) => {
                            if self.schema.check_value(v, ty).is_err() {
                                push(ViolationKind::ArcType, here.clone(), format!("constant {v} is not of type `{ty}`"));
                            }
                        }
                        Term::Var(v) => {
                            if tv.types.get(v).is_some_and(|t0| t0 != ty) {
                                push(
                                    ViolationKind::ConflictingVarType,
                                    here.clone(),
                                    format!("variable `{v}` has type `{}` elsewhere but `{ty}` here", tv.types[v]),
                                );
                            }
                        }
                    }
                }
            }
        }

        let bound = t.bound_vars();
        for v in t.guard.vars() {
            if !bound.contains(&v) {
                push(ViolationKind::GuardScope, loc(", guard"), format!("variable `{v}` is not bound by an input or view arc"));
            }
        }
        for (p, [a, b]) in t.guard.atoms() {
            let ty = |x: &Term| match x {
                Term::Var(v) => tv.types.get(v).cloned(),
                Term::Const(c) => Some(c.ty.clone()),
            };
            match (ty(a), ty(b)) {
                (Some(ta), Some(tb)) if ta == tb => {
                    if !self.schema.types.kind(&ta).is_some_and(|k| k.supports(p)) {
                        push(ViolationKind::GuardType, loc(", guard"), format!("predicate {p:?} unavailable on `{ta}`"));
                    }
                }
                (Some(_), Some(_)) => push(ViolationKind::GuardType, loc(", guard"), format!("`{a}` and `{b}` have different types")),
                _ => {}
            }
        }

        if let Some(b) = &t.action {
            match self.actions.get(&b.action) {
                None => push(ViolationKind::UnknownAction, loc(", action"), format!("unknown action `{}`", b.action)),
                Some(act) => {
                    if act.params.len() != b.args.len() {
                        push(
                            ViolationKind::ActionArity,
                            loc(", action"),
                            format!("`{}` takes {} parameters, got {}", act.name, act.params.len(), b.args.len()),
                        );
                    }
                    for (arg, (p, ty)) in b.args.iter().zip(&act.params) {
                        let found = match arg {
                            Term::Var(v) => tv.types.get(v).cloned(),
                            Term::Const(c) => Some(c.ty.clone()),
                        };
                        if found.as_ref() != Some(ty) {
                            push(ViolationKind::ActionArgType, loc(", action"), format!("argument for `{p}` must have type `{ty}`"));
                        }
                    }
                }
            }
        }

        for v in &t.fresh {
            if bound.contains(v) {
                push(ViolationKind::FreshMisuse, loc(""), format!("fresh variable `{v}` also occurs on an input or view arc"));
            }
            match tv.types.get(v) {
                None => push(ViolationKind::FreshMisuse, loc(""), format!("fresh variable `{v}` is never produced")),
                Some(ty) => {
                    if !self.schema.types.kind(ty).is_some_and(|k| k.is_infinite()) {
                        push(ViolationKind::FreshMisuse, loc(""), format!("fresh variable `{v}` has finite type `{ty}`"));
                    }
                }
            }
        }
        for (v, ty) in &tv.external {
            if self.samples.lookup(v, ty, &self.schema.types).is_empty() {
                push(
                    ViolationKind::MissingSamples,
                    loc(""),
                    format!("external variable `{v}` of type `{ty}` has no sample domain"),
                );
            }
        }
    }

    fn answers<'c>(&self, s: &Snapshot, place: &Name, cache: &'c mut HashMap<Name, AnswerSet>) -> &'c AnswerSet {
        cache.entry(place.clone()).or_insert_with(|| match self.view_query(place) {
            Some(q) => eval_ucq(q, &s.instance),
            None => AnswerSet::default(),
        })
    }

    /// All θ satisfying token availability, view answers, guard, freshness and sample ranges.
    pub fn enabled_bindings(&self, s: &Snapshot, t: &Transition, fp: &FreshPolicy) -> Vec<Substitution> {
        self.enabled_with(s, t, &self.transition_vars(t), fp, &mut HashMap::new())
    }

    fn enabled_with(
        &self,
        s: &Snapshot,
        t: &Transition,
        tv: &TransitionVars,
        fp: &FreshPolicy,
        cache: &mut HashMap<Name, AnswerSet>,
    ) -> Vec<Substitution> {
        let mut partial = match_consuming(&t.inputs, &s.marking, &Substitution::new());
        for r in &t.reads {
            if partial.is_empty() {
                return vec![];
            }
            let ans = self.answers(s, &r.place, cache);
            partial = partial.iter().flat_map(|b| ans.rows.iter().filter_map(|row| unify(&r.terms, row, b))).collect();
        }
        partial.retain(|b| t.guard.eval(b) == Some(true));
        if partial.is_empty() {
            return partial;
        }
        let fresh = if tv.fresh.is_empty() {
            vec![Substitution::new()]
        } else {
            fp.assignments(&tv.fresh, &self.schema.types, &s.values())
        };
        let ext = self.samples.assignments(&tv.external, &self.schema.types);
        let mut out = Vec::new();
        for b in &partial {
            for f in &fresh {
                for e in &ext {
                    let mut full = b.clone();
                    full.0.extend(f.0.iter().map(|(k, v)| (k.clone(), v.clone())));
                    full.0.extend(e.0.iter().map(|(k, v)| (k.clone(), v.clone())));
                    out.push(full);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Consume, apply the action transactionally, then produce the normal or the rollback postset.
    pub fn fire(&self, s: &Snapshot, t: &Transition, theta: &Substitution) -> Result<(Snapshot, Label), ModelError> {
        let tv = self.transition_vars(t);
        let not_enabled = |why: String| ModelError::NotEnabled(t.name.clone(), why);
        for (v, _) in tv.carried() {
            if !theta.contains(&v) {
                return Err(not_enabled(format!("variable `{v}` is unbound")));
            }
        }
        let mut marking = s.marking.clone();
        for a in &t.inputs {
            let tok = ground(&a.terms, theta).ok_or_else(|| not_enabled("input inscription not ground".into()))?;
            if !marking.remove(&a.place, &tok) {
                return Err(not_enabled(format!("missing token on `{}`", a.place)));
            }
        }
        for r in &t.reads {
            let row = ground(&r.terms, theta).ok_or_else(|| not_enabled("view inscription not ground".into()))?;
            let q = self.view_query(&r.place).ok_or_else(|| not_enabled(format!("`{}` is not a view", r.place)))?;
            if !eval_ucq(q, &s.instance).rows.contains(&row) {
                return Err(not_enabled(format!("view `{}` has no matching answer", r.place)));
            }
        }
        if t.guard.eval(theta) != Some(true) {
            return Err(not_enabled("guard is false".into()));
        }
        let used = s.values();
        for (v, _) in &tv.fresh {
            if used.contains(&theta.0[v]) {
                return Err(not_enabled(format!("value for `{v}` is not fresh")));
            }
        }

        let (instance, outcome) = match &t.action {
            None => (s.instance.clone(), Outcome::Commit),
            Some(b) => {
                let act = self.actions.get(&b.action).ok_or_else(|| not_enabled(format!("unknown action `{}`", b.action)))?;
                let args = ground(&b.args, theta).ok_or_else(|| not_enabled("action arguments not ground".into()))?;
                let sigma: Substitution = act.params.iter().map(|(p, _)| p.clone()).zip(args).collect();
                self.schema.apply_action(&s.instance, act, &sigma)?
            }
        };
        let post = match outcome {
            Outcome::Commit => &t.outputs,
            Outcome::Rollback => &t.rollbacks,
        };
        for a in post {
            let tok = ground(&a.terms, theta).ok_or_else(|| not_enabled("output inscription not ground".into()))?;
            marking.add(&a.place, tok, 1);
        }
        let binding = theta.restrict(tv.carried().iter().map(|(v, _)| v));
        Ok((Snapshot { instance, marking }, Label::Fire { transition: t.name.clone(), binding, outcome: Some(outcome) }))
    }

    /// Every firing from `s`, in transition order then binding order.
    pub fn successors(&self, s: &Snapshot, vars: &[TransitionVars], fp: &FreshPolicy) -> Vec<(Label, Snapshot)> {
        let mut cache = HashMap::new();
        let mut out = Vec::new();
        for (t, tv) in self.transitions.iter().zip(vars) {
            for theta in self.enabled_with(s, t, tv, fp, &mut cache) {
                let (next, label) = self.fire(s, t, &theta).expect("enabled binding must fire");
                out.push((label, next));
            }
        }
        out
    }

    pub fn build_lts(&self, s0: &Snapshot, fp: &FreshPolicy, limits: &Limits) -> Lts<Snapshot> {
        let vars: Vec<TransitionVars> = self.transitions.iter().map(|t| self.transition_vars(t)).collect();
        explore(s0.clone(), limits, |s| self.successors(s, &vars, fp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fresh::FreshMode;
    use crate::relational::{Constraint, FactTemplate, RelationSchema};
    use crate::term::Literal;
    use crate::query::{Atom, Conjunct};
    use crate::value::{Pred, INT, STRING};

    fn v(n: &str) -> Term {
        Term::var(n)
    }

    fn arc(p: &str, vs: &[&str]) -> ArcInscription {
        ArcInscription::new(p, vs.iter().map(|x| v(x)).collect())
    }

    fn bonus_net() -> DbNet {
        let mut schema = Schema::default();
        schema.add_relation(RelationSchema::new("User", &[("ID", INT), ("card", STRING)]));
        schema.add_relation(RelationSchema::new("WithBonus", &[("UID", INT), ("type", STRING)]));
        schema.constraints = vec![
            Constraint::PrimaryKey { relation: "User".into(), cols: vec![0] },
            Constraint::PrimaryKey { relation: "WithBonus".into(), cols: vec![0] },
            Constraint::ForeignKey { from: "WithBonus".into(), from_cols: vec![0], to: "User".into(), to_cols: vec![0] },
            Constraint::Domain {
                relation: "WithBonus".into(),
                col: 1,
                allowed: ["50%", "15eur", "extra_item"].iter().map(|s| Value::text(STRING, s)).collect(),
            },
        ];
        let q_users = UcqQuery {
            name: "Q_users".into(),
            free: vec![("uid".into(), INT.into())],
            disjuncts: vec![Conjunct {
                existential: vec![("card".into(), STRING.into())],
                atoms: vec![Atom { relation: "User".into(), terms: vec![v("uid"), v("card")] }],
                filters: vec![],
            }],
        };
        let addb = Action {
            name: "addb".into(),
            params: vec![("uid".into(), INT.into()), ("bt".into(), STRING.into())],
            adds: vec![FactTemplate { relation: "WithBonus".into(), terms: vec![v("uid"), v("bt")] }],
            dels: vec![],
        };
        let mut login = Transition::new("LogIn");
        login.inputs = vec![arc("Idle", &[])];
        login.reads = vec![arc("Users", &["uid"])];
        login.outputs = vec![arc("Logged", &["uid", "cid"])];
        login.fresh = BTreeSet::from(["cid".into()]);
        let mut acquire = Transition::new("AcquireBonus");
        acquire.inputs = vec![arc("Logged", &["uid", "cid"])];
        acquire.outputs = vec![arc("Logged", &["uid", "cid"])];
        acquire.rollbacks = vec![arc("ReBonus", &["uid", "cid", "bt"])];
        acquire.action = Some(ActionBinding { action: "addb".into(), args: vec![v("uid"), v("bt")] });
        let mut initial = Snapshot::default();
        initial.instance.insert(&"User".into(), vec![Value::int(INT, 1), Value::text(STRING, "a")]);
        initial.marking.add(&"Idle".into(), vec![], 1);
        let mut samples = SampleDomains::default();
        samples.by_var.insert("bt".into(), vec![Value::text(STRING, "50%"), Value::text(STRING, "invalid")]);
        DbNet {
            name: "bonus".into(),
            schema,
            queries: BTreeMap::from([(q_users.name.clone(), q_users)]),
            actions: BTreeMap::from([(addb.name.clone(), addb)]),
            places: vec![
                Place { name: "Idle".into(), color: vec![], kind: PlaceKind::Control },
                Place { name: "Logged".into(), color: vec![INT.into(), INT.into()], kind: PlaceKind::Control },
                Place { name: "ReBonus".into(), color: vec![INT.into(), INT.into(), STRING.into()], kind: PlaceKind::Control },
                Place { name: "Users".into(), color: vec![INT.into()], kind: PlaceKind::View { query: "Q_users".into() } },
            ],
            transitions: vec![login, acquire],
            initial,
            samples,
            fresh: FreshPolicy::default(),
        }
    }

    fn theta(pairs: &[(&str, Value)]) -> Substitution {
        pairs.iter().map(|(k, v)| (Name::from(*k), v.clone())).collect()
    }

    #[test]
    fn fixture_is_valid() {
        assert_eq!(bonus_net().validate(), vec![]);
    }

    #[test]
    fn view_color_mismatch_is_reported() {
        let mut n = bonus_net();
        n.places[3].color = vec![STRING.into()];
        assert!(n.validate().iter().any(|v| v.kind == ViolationKind::ViewColor));
    }

    #[test]
    fn guard_scope_is_reported() {
        let mut n = bonus_net();
        n.transitions[1].guard = Guard::Atom(Pred::Eq, [v("ghost"), v("uid")]);
        assert!(n.validate().iter().any(|v| v.kind == ViolationKind::GuardScope));
    }

    #[test]
    fn login_binds_fresh_cart() {
        let n = bonus_net();
        let bs = n.enabled_bindings(&n.initial, &n.transitions[0], &FreshPolicy::with_mode(FreshMode::Bounded(2)));
        let expected: Vec<Substitution> = [1000, 1001]
            .iter()
            .map(|&c| theta(&[("uid", Value::int(INT, 1)), ("cid", Value::int(INT, c))]))
            .collect();
        assert_eq!(bs, expected);
    }

    #[test]
    fn unsatisfiable_guard_gives_nothing() {
        let mut n = bonus_net();
        n.transitions[0].guard = Guard::Atom(Pred::Lt, [v("uid"), v("uid")]);
        assert!(n.enabled_bindings(&n.initial, &n.transitions[0], &FreshPolicy::default()).is_empty());
    }

    #[test]
    fn empty_view_disables() {
        let mut n = bonus_net();
        let mut s = n.initial.clone();
        s.instance = Instance::new();
        n.initial = s.clone();
        assert!(n.enabled_bindings(&s, &n.transitions[0], &FreshPolicy::default()).is_empty());
    }

    #[test]
    fn acquire_commits_and_rolls_back() {
        let n = bonus_net();
        let mut s = n.initial.clone();
        s.marking = Marking::new();
        s.marking.add(&"Logged".into(), vec![Value::int(INT, 1), Value::int(INT, 7)], 1);
        let t = &n.transitions[1];
        let ok = theta(&[("uid", Value::int(INT, 1)), ("cid", Value::int(INT, 7)), ("bt", Value::text(STRING, "50%"))]);
        let (s1, l1) = n.fire(&s, t, &ok).unwrap();
        assert!(matches!(l1, Label::Fire { outcome: Some(Outcome::Commit), .. }));
        assert!(s1.instance.contains("WithBonus", &[Value::int(INT, 1), Value::text(STRING, "50%")]));
        assert_eq!(s1.marking.count("Logged", &[Value::int(INT, 1), Value::int(INT, 7)]), 1);

        let bad = theta(&[("uid", Value::int(INT, 1)), ("cid", Value::int(INT, 7)), ("bt", Value::text(STRING, "invalid"))]);
        let (s2, l2) = n.fire(&s, t, &bad).unwrap();
        assert!(matches!(l2, Label::Fire { outcome: Some(Outcome::Rollback), .. }));
        assert_eq!(s2.instance, s.instance);
        assert_eq!(s2.marking.count("ReBonus", &[Value::int(INT, 1), Value::int(INT, 7), Value::text(STRING, "invalid")]), 1);
    }

    #[test]
    fn firing_without_enabling_is_a_contract_error() {
        let n = bonus_net();
        let t = &n.transitions[1];
        let b = theta(&[("uid", Value::int(INT, 1)), ("cid", Value::int(INT, 7)), ("bt", Value::text(STRING, "50%"))]);
        assert!(matches!(n.fire(&n.initial, t, &b), Err(ModelError::NotEnabled(..))));
    }

    #[test]
    fn plain_token_game_lts() {
        let mut n = bonus_net();
        n.transitions = vec![Transition { inputs: vec![arc("Idle", &[])], outputs: vec![arc("Logged", &[])], ..Transition::new("Go") }];
        n.places[1].color = vec![];
        let l = n.build_lts(&n.initial, &FreshPolicy::default(), &Limits::default());
        assert_eq!((l.num_states(), l.num_edges()), (2, 1));
        let mut empty = n.initial.clone();
        empty.marking = Marking::new();
        let l0 = n.build_lts(&empty, &FreshPolicy::default(), &Limits::default());
        assert_eq!((l0.num_states(), l0.num_edges()), (1, 0));
    }

    #[test]
    fn explored_states_respect_constraints() {
        let n = bonus_net();
        let l = n.build_lts(&n.initial, &FreshPolicy::with_mode(FreshMode::Bounded(1)), &Limits::default());
        assert!(!l.truncated);
        for s in &l.states {
            assert!(n.schema.satisfied(&s.instance));
            assert!(s.marking.places().all(|p| !n.place(p).unwrap().is_view()));
        }
        for e in &l.edges {
            if let Label::Fire { outcome: Some(Outcome::Rollback), .. } = e.label {
                assert_eq!(l.states[e.src as usize].instance, l.states[e.dst as usize].instance);
            }
        }
    }

    #[test]
    fn filter_literal_reaches_guard_language() {
        let l = Literal::neq(v("a"), v("b"));
        assert_eq!(Guard::from_literal(&l).vars().len(), 2);
    }
}
