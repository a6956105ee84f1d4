//! Compilation of a DB-net into a prioritized ν-CPN.
//!
//! Every relation becomes a place holding one token per fact, a single lock token serializes
//! execution, and each DB-net transition `T` becomes a private chain of gadgets:
//!
//! ```text
//! Lock + inputs → T.enter → Entered → ComputeV1 … ComputeVm → Bound → T.cond → GuardOk
//!   → update net → Updated → check net → ConstrOk → T.consume → DoCommit → T.commit → outputs + Lock
//!                               ↘ ConstrViol → undo net → DoRollback → T.rollback → rollback outputs + Lock
//! every pre-cond stage → T.cancel{k} → inputs + Lock
//! ```
//!
//! All gadget places and transitions are named `T.<role>`; relation places are `rel.<R>` and the
//! lock is `sys.Lock`. Only `T.cond` is observable.

mod binding;
mod check;
mod finish;
mod undo;
mod update;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::dbnet::{DbNet, Snapshot, Transition, TransitionVars, Violation};
use crate::marking::Marking;
use crate::nucpn::{CpnPlace, CpnTransition, NuCpn};
use crate::relational::{Action, Constraint, FactTemplate};
use crate::term::Term;
use crate::value::{Name, BOOL};

pub const LOCK_PLACE: &str = "sys.Lock";
pub const RELATION_PREFIX: &str = "rel.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AuxRole {
    Entered,
    Computed,
    Bound,
    GuardOk,
    UpdateStage,
    Updated,
    CheckStage,
    Scratch,
    ConstrOk,
    ConstrViol,
    UndoStage,
    Done,
    DoCommit,
    DoRollback,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlaceClass {
    Control,
    Relation,
    Lock,
    Auxiliary(AuxRole),
}

impl fmt::Display for PlaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaceClass::Control => f.write_str("control"),
            PlaceClass::Relation => f.write_str("relation"),
            PlaceClass::Lock => f.write_str("lock"),
            PlaceClass::Auxiliary(r) => write!(f, "aux:{r:?}"),
        }
    }
}

/// How a net transition's firing shows up after relabeling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelRole {
    Silent,
    /// Fires as `(source, binding restricted to carried)`; the outcome is resolved by lookahead.
    Observable { source: Name, carried: Vec<Name> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Persistence,
    Control,
    Enter,
    Binding,
    Guard,
    Cancel,
    Update,
    Check,
    Undo,
    Finish,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Persistence => "persistence",
            Phase::Control => "control",
            Phase::Enter => "enter",
            Phase::Binding => "binding",
            Phase::Guard => "guard",
            Phase::Cancel => "cancel",
            Phase::Update => "update",
            Phase::Check => "check",
            Phase::Undo => "undo",
            Phase::Finish => "finish",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    Place,
    Transition,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProvenanceEntry {
    pub element: Name,
    pub kind: ElementKind,
    /// `None` for elements shared by all gadgets.
    pub source: Option<Name>,
    pub phase: Phase,
}

/// Deliberate faults used to check that certification detects broken encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// The first revert component of each undo chain no longer touches the relation.
    DropRevertComponent,
    /// ExistsA becomes low priority and NotExistsA high.
    SwapAddPriorities,
    /// The check stage at this position (after PK/FK/Domain ordering) is left out.
    SkipConstraintStage(usize),
    /// Cancel transitions do not give the lock back.
    ForgetCancelLockReturn,
    /// ExistsA consumes the token it should only read.
    ConsumeOnReadArc,
    /// Additions run before deletions.
    ReorderDelAdd,
}

impl Mutation {
    pub fn all(check_stages: usize) -> Vec<Mutation> {
        vec![
            Mutation::DropRevertComponent,
            Mutation::SwapAddPriorities,
            Mutation::SkipConstraintStage(check_stages.saturating_sub(1)),
            Mutation::ForgetCancelLockReturn,
            Mutation::ConsumeOnReadArc,
            Mutation::ReorderDelAdd,
        ]
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::DropRevertComponent => f.write_str("drop-revert-component"),
            Mutation::SwapAddPriorities => f.write_str("swap-add-priorities"),
            Mutation::SkipConstraintStage(i) => write!(f, "skip-constraint-stage:{i}"),
            Mutation::ForgetCancelLockReturn => f.write_str("forget-cancel-lock-return"),
            Mutation::ConsumeOnReadArc => f.write_str("consume-on-read-arc"),
            Mutation::ReorderDelAdd => f.write_str("reorder-del-add"),
        }
    }
}

impl std::str::FromStr for Mutation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "drop-revert-component" => Mutation::DropRevertComponent,
            "swap-add-priorities" => Mutation::SwapAddPriorities,
            "forget-cancel-lock-return" => Mutation::ForgetCancelLockReturn,
            "consume-on-read-arc" => Mutation::ConsumeOnReadArc,
            "reorder-del-add" => Mutation::ReorderDelAdd,
            _ => match s.strip_prefix("skip-constraint-stage:").and_then(|i| i.parse().ok()) {
                Some(i) => Mutation::SkipConstraintStage(i),
                None => return Err(format!("unknown mutation `{s}`")),
            },
        })
    }
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("the DB-net is not well-formed:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error("{location}: name `{name}` collides with a generated element")]
    NameClash { location: String, name: Name },
    #[error("initial snapshot: {0}")]
    InitialState(String),
}

/// Per-gadget element counts, used to check the construction against the source net.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GadgetCounts {
    pub compute: usize,
    pub cancels: usize,
    pub deletions: usize,
    pub additions: usize,
    pub check_stages: usize,
    pub revert_components: usize,
}

#[derive(Clone, Debug)]
pub struct TranslationOutput {
    pub net: NuCpn,
    pub place_classes: BTreeMap<Name, PlaceClass>,
    pub label_map: BTreeMap<Name, LabelRole>,
    pub provenance: Vec<ProvenanceEntry>,
    pub lock: Name,
    /// Relation name to relation place.
    pub relation_places: BTreeMap<Name, Name>,
    pub counts: BTreeMap<Name, GadgetCounts>,
}

impl TranslationOutput {
    pub fn class(&self, place: &str) -> Option<PlaceClass> {
        self.place_classes.get(place).copied()
    }

    pub fn is_auxiliary(&self, place: &str) -> bool {
        matches!(self.class(place), Some(PlaceClass::Auxiliary(_)))
    }

    /// Lock present and every gadget place empty: the marking mirrors a DB-net snapshot.
    pub fn is_stable(&self, m: &Marking) -> bool {
        m.place_size(&self.lock) == 1 && !m.places().any(|p| self.is_auxiliary(p))
    }

    /// Some gadget place is occupied.
    pub fn is_interior(&self, m: &Marking) -> bool {
        m.places().any(|p| self.is_auxiliary(p))
    }

    pub fn source_of(&self, element: &str) -> Option<&Name> {
        self.provenance.iter().find(|e| &*e.element == element).and_then(|e| e.source.as_ref())
    }

    /// One JSON object per line: element, kind, source transition and phase.
    pub fn provenance_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.provenance {
            let obj = serde_json::json!({
                "element": &*e.element,
                "kind": match e.kind { ElementKind::Place => "place", ElementKind::Transition => "transition" },
                "source": e.source.as_deref(),
                "phase": e.phase.to_string(),
            });
            out.push_str(&obj.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Default)]
pub(crate) struct Emitter {
    places: Vec<CpnPlace>,
    transitions: Vec<CpnTransition>,
    classes: BTreeMap<Name, PlaceClass>,
    labels: BTreeMap<Name, LabelRole>,
    provenance: Vec<ProvenanceEntry>,
}

impl Emitter {
    pub(crate) fn place(&mut self, name: &Name, color: Vec<Name>, class: PlaceClass, source: Option<&Name>, phase: Phase) {
        if self.classes.contains_key(name) {
            return;
        }
        self.places.push(CpnPlace { name: name.clone(), color });
        self.classes.insert(name.clone(), class);
        self.provenance.push(ProvenanceEntry { element: name.clone(), kind: ElementKind::Place, source: source.cloned(), phase });
    }

    pub(crate) fn transition(&mut self, t: CpnTransition, label: LabelRole, source: &Name, phase: Phase) {
        self.labels.insert(t.name.clone(), label);
        self.provenance.push(ProvenanceEntry {
            element: t.name.clone(),
            kind: ElementKind::Transition,
            source: Some(source.clone()),
            phase,
        });
        self.transitions.push(t);
    }
}

/// What every gadget builder needs to know about one source transition.
pub(crate) struct Gadget<'a> {
    pub t: &'a Transition,
    pub vars: TransitionVars,
    pub net: &'a DbNet,
    /// The bound action and its argument terms over transition variables.
    pub action: Option<(&'a Action, &'a [Term])>,
    pub relation_places: &'a BTreeMap<Name, Name>,
    pub mutation: Option<Mutation>,
}

impl Gadget<'_> {
    pub fn name(&self, suffix: &str) -> Name {
        format!("{}.{suffix}", self.t.name).into()
    }

    pub fn source(&self) -> &Name {
        &self.t.name
    }

    pub fn carried(&self) -> Vec<(Name, Name)> {
        self.vars.carried()
    }

    pub fn terms_of(vars: &[(Name, Name)]) -> Vec<Term> {
        vars.iter().map(|(v, _)| Term::Var(v.clone())).collect()
    }

    pub fn types_of(vars: &[(Name, Name)]) -> Vec<Name> {
        vars.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn z(&self) -> Vec<Term> {
        Self::terms_of(&self.carried())
    }

    pub fn z_color(&self) -> Vec<Name> {
        Self::types_of(&self.carried())
    }

    pub fn rel_place(&self, relation: &str) -> Name {
        self.relation_places[relation].clone()
    }

    /// A fact template rewritten from action parameters to transition terms.
    pub fn instantiate(&self, tpl: &FactTemplate) -> Vec<Term> {
        let (act, args) = self.action.expect("templates only exist with an action");
        tpl.terms
            .iter()
            .map(|term| match term {
                Term::Const(c) => Term::Const(c.clone()),
                Term::Var(p) => {
                    let i = act.params.iter().position(|(q, _)| q == p).expect("validated template");
                    args[i].clone()
                }
            })
            .collect()
    }

    pub fn aux(&self, e: &mut Emitter, name: &Name, color: Vec<Name>, role: AuxRole, phase: Phase) {
        e.place(name, color, PlaceClass::Auxiliary(role), Some(self.source()), phase);
    }

    pub fn done_color() -> Vec<Name> {
        vec![BOOL.into()]
    }
}

pub fn translate(net: &DbNet, s0: &Snapshot) -> Result<TranslationOutput, TranslateError> {
    translate_with(net, s0, None)
}

/// Constraints in check order: keys, then references, then domains; stable within a kind.
pub fn check_order(constraints: &[Constraint]) -> Vec<&Constraint> {
    let mut cs: Vec<&Constraint> = constraints.iter().collect();
    cs.sort_by_key(|c| c.stage_rank());
    cs
}

pub fn translate_with(net: &DbNet, s0: &Snapshot, mutation: Option<Mutation>) -> Result<TranslationOutput, TranslateError> {
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(TranslateError::Invalid(violations));
    }
    for p in &net.places {
        if p.name.contains('.') {
            return Err(TranslateError::NameClash { location: format!("place {}", p.name), name: p.name.clone() });
        }
    }
    for t in &net.transitions {
        if t.name.contains('.') {
            return Err(TranslateError::NameClash { location: format!("transition {}", t.name), name: t.name.clone() });
        }
    }
    if let Err(e) = net.schema.check_instance_typing(&s0.instance) {
        return Err(TranslateError::InitialState(e.to_string()));
    }

    let mut e = Emitter::default();
    let lock: Name = LOCK_PLACE.into();
    let mut relation_places = BTreeMap::new();
    for r in net.schema.relations.values() {
        let pname: Name = format!("{RELATION_PREFIX}{}", r.name).into();
        e.place(&pname, r.column_types(), PlaceClass::Relation, None, Phase::Persistence);
        relation_places.insert(r.name.clone(), pname);
    }
    e.place(&lock, vec![], PlaceClass::Lock, None, Phase::Persistence);
    for p in net.places.iter().filter(|p| !p.is_view()) {
        e.place(&p.name, p.color.clone(), PlaceClass::Control, None, Phase::Control);
    }

    let constraints = check_order(&net.schema.constraints);
    let mut counts = BTreeMap::new();
    for t in &net.transitions {
        let action = t.action.as_ref().map(|b| (&net.actions[&b.action], b.args.as_slice()));
        let g = Gadget { t, vars: net.transition_vars(t), net, action, relation_places: &relation_places, mutation };
        counts.insert(t.name.clone(), build_gadget(&g, &mut e, &lock, &constraints));
    }

    let mut initial = Marking::new();
    for (p, tok, c) in s0.marking.entries() {
        initial.add(p, tok.clone(), c);
    }
    for (r, tuple) in s0.instance.facts() {
        initial.add(&relation_places[r], tuple.clone(), 1);
    }
    initial.add(&lock, vec![], 1);

    let cpn = NuCpn {
        name: format!("{}_cpn", net.name).into(),
        types: net.schema.types.clone(),
        places: e.places,
        transitions: e.transitions,
        initial,
        samples: net.samples.clone(),
        fresh: net.fresh.clone(),
    };
    Ok(TranslationOutput {
        net: cpn,
        place_classes: e.classes,
        label_map: e.labels,
        provenance: e.provenance,
        lock,
        relation_places,
        counts,
    })
}

fn build_gadget(g: &Gadget, e: &mut Emitter, lock: &Name, constraints: &[&Constraint]) -> GadgetCounts {
    let mut counts = GadgetCounts::default();
    let bound = binding::build_binding_net(g, e, lock, &mut counts);
    let guard_ok = g.name("GuardOk");
    g.aux(e, &guard_ok, g.z_color(), AuxRole::GuardOk, Phase::Guard);
    binding::build_guard_stage(g, e, &bound, &guard_ok);

    let Some((act, _)) = g.action else {
        finish::build_finish(g, e, lock, &guard_ok, None, &[]);
        return counts;
    };
    let has_updates = !act.adds.is_empty() || !act.dels.is_empty();
    let updated = if has_updates { g.name("Updated") } else { guard_ok.clone() };
    if has_updates {
        g.aux(e, &updated, g.z_color(), AuxRole::Updated, Phase::Update);
    }
    let dones = update::build_update_net(g, e, &guard_ok, &updated, &mut counts);

    let stages: Vec<&Constraint> = match g.mutation {
        Some(Mutation::SkipConstraintStage(i)) => {
            constraints.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| *c).collect()
        }
        _ => constraints.to_vec(),
    };
    let constr_ok = if stages.is_empty() { updated.clone() } else { g.name("ConstrOk") };
    let constr_viol = g.name("ConstrViol");
    if !stages.is_empty() {
        g.aux(e, &constr_ok, g.z_color(), AuxRole::ConstrOk, Phase::Check);
    }
    g.aux(e, &constr_viol, g.z_color(), AuxRole::ConstrViol, Phase::Check);
    check::build_check_net(g, e, &stages, &updated, &constr_ok, &constr_viol);
    counts.check_stages = stages.len();

    let reverts = undo::revert_plan(&dones);
    let do_rollback = if reverts.is_empty() { constr_viol.clone() } else { g.name("DoRollback") };
    if !reverts.is_empty() {
        g.aux(e, &do_rollback, g.z_color(), AuxRole::DoRollback, Phase::Undo);
    }
    undo::build_undo_net(g, e, &reverts, &constr_viol, &do_rollback);
    counts.revert_components = reverts.len();
    finish::build_finish(g, e, lock, &constr_ok, Some(&do_rollback), &dones);
    counts
}

/// One update component: the template, the relation place it touches and its Done place.
#[derive(Clone, Debug)]
pub(crate) struct DoneRecord {
    pub is_add: bool,
    pub index: usize,
    pub place: Name,
    pub relation: Name,
    pub fact: Vec<Term>,
}

pub(crate) fn bool_term(b: bool) -> Term {
    Term::Const(crate::value::Value::boolean(b))
}

pub(crate) fn fresh_names(prefix: &str, n: usize) -> Vec<Term> {
    (0..n).map(|j| Term::Var(format!("{prefix}{}", j + 1).into())).collect()
}
