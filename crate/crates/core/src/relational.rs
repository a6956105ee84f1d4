//! Relational schemas, instances, integrity constraints and transactional actions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::term::{ground, Substitution, Term};
use crate::value::{Name, TypeDomain, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(Name),
    #[error("unknown type `{0}`")]
    UnknownType(Name),
    #[error("relation `{0}` must have at least one column")]
    ZeroArity(Name),
    #[error("`{relation}` expects {expected} values, got {found}")]
    Arity { relation: Name, expected: usize, found: usize },
    #[error("column index {index} out of range for `{relation}`")]
    IndexOutOfRange { relation: Name, index: usize },
    #[error("constraint on `{0}` has an empty column set")]
    EmptyIndexSet(Name),
    #[error("foreign key target columns of `{0}` are not its primary key")]
    FkTargetNotKey(Name),
    #[error("foreign key column types do not match between `{0}` and `{1}`")]
    FkTypeMismatch(Name, Name),
    #[error("value {value} does not belong to type `{expected}`")]
    IllTyped { value: Value, expected: Name },
    #[error("parameter `{0}` is unbound")]
    Unbound(Name),
    #[error("variable `{var}` in action `{action}` is not a parameter")]
    NotAParameter { action: Name, var: Name },
    #[error("parameter `{var}` of action `{action}` has the wrong type for `{relation}`")]
    TemplateType { action: Name, var: Name, relation: Name },
    #[error("duplicate parameter `{var}` in action `{action}`")]
    DuplicateParameter { action: Name, var: Name },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: Name,
    pub ty: Name,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationSchema {
    pub name: Name,
    pub columns: Vec<Column>,
}

impl RelationSchema {
    pub fn new(name: &str, cols: &[(&str, &str)]) -> Self {
        RelationSchema {
            name: name.into(),
            columns: cols.iter().map(|(n, t)| Column { name: (*n).into(), ty: (*t).into() }).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn column_types(&self) -> Vec<Name> {
        self.columns.iter().map(|c| c.ty.clone()).collect()
    }

    pub fn column_index(&self, col: &str) -> Option<usize> {
        self.columns.iter().position(|c| &*c.name == col)
    }
}

/// Column indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    PrimaryKey { relation: Name, cols: Vec<usize> },
    ForeignKey { from: Name, from_cols: Vec<usize>, to: Name, to_cols: Vec<usize> },
    Domain { relation: Name, col: usize, allowed: Vec<Value> },
}

impl Constraint {
    /// Check-net stages run keys first, then references, then domains.
    pub fn stage_rank(&self) -> u8 {
        match self {
            Constraint::PrimaryKey { .. } => 0,
            Constraint::ForeignKey { .. } => 1,
            Constraint::Domain { .. } => 2,
        }
    }

    pub fn relations(&self) -> Vec<&Name> {
        match self {
            Constraint::PrimaryKey { relation, .. } | Constraint::Domain { relation, .. } => vec![relation],
            Constraint::ForeignKey { from, to, .. } => vec![from, to],
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx = |c: &[usize]| c.iter().map(|i| (i + 1).to_string()).join(",");
        match self {
            Constraint::PrimaryKey { relation, cols } => write!(f, "key {relation}{{{}}}", idx(cols)),
            Constraint::ForeignKey { from, from_cols, to, to_cols } => {
                write!(f, "fk {from}{{{}}} -> {to}{{{}}}", idx(from_cols), idx(to_cols))
            }
            Constraint::Domain { relation, col, allowed } => {
                write!(f, "domain {relation}{{{}}} in {{{}}}", col + 1, allowed.iter().join(", "))
            }
        }
    }
}

/// Finite set of facts per relation. Empty relations are not stored, so equality is canonical.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Instance {
    facts: BTreeMap<Name, BTreeSet<Vec<Value>>>,
}

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the fact was already present.
    pub fn insert(&mut self, rel: &Name, tuple: Vec<Value>) -> bool {
        self.facts.entry(rel.clone()).or_default().insert(tuple)
    }

    pub fn remove(&mut self, rel: &str, tuple: &[Value]) -> bool {
        let Some(set) = self.facts.get_mut(rel) else { return false };
        let removed = set.remove(tuple);
        if set.is_empty() {
            self.facts.remove(rel);
        }
        removed
    }

    pub fn contains(&self, rel: &str, tuple: &[Value]) -> bool {
        self.facts.get(rel).is_some_and(|s| s.contains(tuple))
    }

    pub fn relation(&self, rel: &str) -> impl Iterator<Item = &Vec<Value>> {
        self.facts.get(rel).into_iter().flatten()
    }

    pub fn relation_len(&self, rel: &str) -> usize {
        self.facts.get(rel).map_or(0, |s| s.len())
    }

    pub fn facts(&self) -> impl Iterator<Item = (&Name, &Vec<Value>)> {
        self.facts.iter().flat_map(|(r, s)| s.iter().map(move |t| (r, t)))
    }

    pub fn len(&self) -> usize {
        self.facts.values().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        self.facts().flat_map(|(_, t)| t.iter())
    }

    /// One `Relation(v1,…,vn)` line per fact, sorted lexicographically.
    pub fn fact_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self.facts().map(|(r, t)| fact_line(r, t)).collect();
        lines.sort();
        lines
    }

    pub fn canonical(&self) -> String {
        self.fact_lines().join("\n")
    }
}

pub fn fact_line(rel: &str, tuple: &[Value]) -> String {
    format!("{rel}({})", tuple.iter().join(","))
}

/// Values of type `ty` occurring anywhere in the instance.
pub fn active_domain(inst: &Instance, ty: &str) -> BTreeSet<Value> {
    inst.values().filter(|v| &*v.ty == ty).cloned().collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactTemplate {
    pub relation: Name,
    pub terms: Vec<Term>,
}

impl fmt::Display for FactTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.relation, self.terms.iter().join(", "))
    }
}

/// `⟨name, params, F+, F−⟩`. Templates keep declaration order; application is set-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Action {
    pub name: Name,
    pub params: Vec<(Name, Name)>,
    pub adds: Vec<FactTemplate>,
    pub dels: Vec<FactTemplate>,
}

impl Action {
    pub fn param_type(&self, v: &str) -> Option<&Name> {
        self.params.iter().find(|(p, _)| &**p == v).map(|(_, t)| t)
    }

    fn instantiate(&self, list: &[FactTemplate], theta: &Substitution) -> Result<Vec<(Name, Vec<Value>)>, RelError> {
        list.iter()
            .map(|t| {
                ground(&t.terms, theta)
                    .map(|vals| (t.relation.clone(), vals))
                    .ok_or_else(|| {
                        let missing = t.terms.iter().filter_map(Term::as_var).find(|v| !theta.contains(v));
                        RelError::Unbound(missing.cloned().unwrap_or_else(|| t.relation.clone()))
                    })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Commit,
    Rollback,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Commit => "commit",
            Outcome::Rollback => "rollback",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    pub types: TypeDomain,
    pub relations: BTreeMap<Name, RelationSchema>,
    pub constraints: Vec<Constraint>,
}

impl Schema {
    pub fn relation(&self, name: &str) -> Result<&RelationSchema, RelError> {
        self.relations.get(name).ok_or_else(|| RelError::UnknownRelation(name.into()))
    }

    pub fn add_relation(&mut self, r: RelationSchema) {
        self.relations.insert(r.name.clone(), r);
    }

    pub fn primary_key(&self, rel: &str) -> Option<&[usize]> {
        self.constraints.iter().find_map(|c| match c {
            Constraint::PrimaryKey { relation, cols } if &**relation == rel => Some(cols.as_slice()),
            _ => None,
        })
    }

    pub fn check_value(&self, v: &Value, ty: &Name) -> Result<(), RelError> {
        let kind = self.types.kind(ty).ok_or_else(|| RelError::UnknownType(ty.clone()))?;
        if &v.ty != ty || !v.fits(kind) {
            return Err(RelError::IllTyped { value: v.clone(), expected: ty.clone() });
        }
        Ok(())
    }

    pub fn check_fact(&self, rel: &str, tuple: &[Value]) -> Result<(), RelError> {
        let r = self.relation(rel)?;
        if r.arity() != tuple.len() {
            return Err(RelError::Arity { relation: r.name.clone(), expected: r.arity(), found: tuple.len() });
        }
        for (v, c) in tuple.iter().zip(&r.columns) {
            self.check_value(v, &c.ty)?;
        }
        Ok(())
    }

    pub fn check_instance_typing(&self, inst: &Instance) -> Result<(), RelError> {
        inst.facts().try_for_each(|(r, t)| self.check_fact(r, t))
    }

    pub fn validate_relation(&self, r: &RelationSchema) -> Result<(), RelError> {
        if r.columns.is_empty() {
            return Err(RelError::ZeroArity(r.name.clone()));
        }
        for c in &r.columns {
            if self.types.get(&c.ty).is_none() {
                return Err(RelError::UnknownType(c.ty.clone()));
            }
        }
        Ok(())
    }

    fn check_indices(&self, rel: &Name, cols: &[usize], nonempty: bool) -> Result<&RelationSchema, RelError> {
        let r = self.relation(rel)?;
        if nonempty && cols.is_empty() {
            return Err(RelError::EmptyIndexSet(rel.clone()));
        }
        if let Some(&index) = cols.iter().find(|&&i| i >= r.arity()) {
            return Err(RelError::IndexOutOfRange { relation: rel.clone(), index });
        }
        Ok(r)
    }

    pub fn validate_constraint(&self, c: &Constraint) -> Result<(), RelError> {
        match c {
            Constraint::PrimaryKey { relation, cols } => self.check_indices(relation, cols, true).map(drop),
            Constraint::ForeignKey { from, from_cols, to, to_cols } => {
                let rf = self.check_indices(from, from_cols, true)?;
                let rt = self.check_indices(to, to_cols, true)?;
                if from_cols.len() != to_cols.len() {
                    return Err(RelError::FkTypeMismatch(from.clone(), to.clone()));
                }
                for (&i, &j) in from_cols.iter().zip(to_cols) {
                    if rf.columns[i].ty != rt.columns[j].ty {
                        return Err(RelError::FkTypeMismatch(from.clone(), to.clone()));
                    }
                }
                let key: Option<BTreeSet<usize>> = self.primary_key(to).map(|k| k.iter().copied().collect());
                if key != Some(to_cols.iter().copied().collect()) {
                    return Err(RelError::FkTargetNotKey(to.clone()));
                }
                Ok(())
            }
            Constraint::Domain { relation, col, allowed } => {
                let r = self.check_indices(relation, std::slice::from_ref(col), true)?;
                let ty = &r.columns[*col].ty;
                allowed.iter().try_for_each(|v| self.check_value(v, ty))
            }
        }
    }

    /// Direct evaluation; recomputed from scratch on every call.
    pub fn check_constraint(&self, inst: &Instance, c: &Constraint) -> Result<bool, RelError> {
        self.validate_constraint(c)?;
        Ok(satisfies(inst, c))
    }

    pub fn violations<'a>(&'a self, inst: &Instance) -> Vec<&'a Constraint> {
        self.constraints.iter().filter(|c| !satisfies(inst, c)).collect()
    }

    pub fn satisfied(&self, inst: &Instance) -> bool {
        self.constraints.iter().all(|c| satisfies(inst, c))
    }

    pub fn validate_action(&self, a: &Action) -> Result<(), RelError> {
        let mut seen = BTreeSet::new();
        for (p, t) in &a.params {
            if !seen.insert(p) {
                return Err(RelError::DuplicateParameter { action: a.name.clone(), var: p.clone() });
            }
            if self.types.get(t).is_none() {
                return Err(RelError::UnknownType(t.clone()));
            }
        }
        for tpl in a.adds.iter().chain(&a.dels) {
            let r = self.relation(&tpl.relation)?;
            if r.arity() != tpl.terms.len() {
                return Err(RelError::Arity { relation: r.name.clone(), expected: r.arity(), found: tpl.terms.len() });
            }
            for (term, col) in tpl.terms.iter().zip(&r.columns) {
                match term {
                    Term::Const(v) => self.check_value(v, &col.ty)?,
                    Term::Var(v) => match a.param_type(v) {
                        None => return Err(RelError::NotAParameter { action: a.name.clone(), var: v.clone() }),
                        Some(t) if *t != col.ty => {
                            return Err(RelError::TemplateType {
                                action: a.name.clone(),
                                var: v.clone(),
                                relation: r.name.clone(),
                            })
                        }
                        Some(_) => {}
                    },
                }
            }
        }
        Ok(())
    }

    /// `I' = (I \ F−θ) ∪ F+θ`; committed only if `I'` satisfies every constraint, otherwise `I` is returned unchanged.
    pub fn apply_action(&self, inst: &Instance, a: &Action, theta: &Substitution) -> Result<(Instance, Outcome), RelError> {
        for (p, ty) in &a.params {
            let v = theta.get(p).ok_or_else(|| RelError::Unbound(p.clone()))?;
            self.check_value(v, ty)?;
        }
        let (next, ok) = self.tentative_update(inst, a, theta)?;
        if ok {
            Ok((next, Outcome::Commit))
        } else {
            Ok((inst.clone(), Outcome::Rollback))
        }
    }

    /// The candidate instance before constraint filtering, plus whether it satisfies the schema.
    pub fn tentative_update(&self, inst: &Instance, a: &Action, theta: &Substitution) -> Result<(Instance, bool), RelError> {
        let dels = a.instantiate(&a.dels, theta)?;
        let adds = a.instantiate(&a.adds, theta)?;
        let mut next = inst.clone();
        for (r, t) in &dels {
            next.remove(r, t);
        }
        for (r, t) in adds {
            self.check_fact(&r, &t)?;
            next.insert(&r, t);
        }
        let ok = self.satisfied(&next);
        Ok((next, ok))
    }
}

fn project(t: &[Value], cols: &[usize]) -> Vec<Value> {
    cols.iter().map(|&i| t[i].clone()).collect()
}

fn satisfies(inst: &Instance, c: &Constraint) -> bool {
    match c {
        Constraint::PrimaryKey { relation, cols } => {
            let mut seen = BTreeSet::new();
            inst.relation(relation).all(|t| seen.insert(project(t, cols)))
        }
        Constraint::ForeignKey { from, from_cols, to, to_cols } => {
            let targets: BTreeSet<Vec<Value>> = inst.relation(to).map(|t| project(t, to_cols)).collect();
            inst.relation(from).all(|t| targets.contains(&project(t, from_cols)))
        }
        Constraint::Domain { relation, col, allowed } => inst.relation(relation).all(|t| allowed.contains(&t[*col])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{INT, REAL, STRING};

    pub(crate) fn bonus_schema() -> Schema {
        let mut s = Schema::default();
        s.add_relation(RelationSchema::new("User", &[("ID", INT), ("card", STRING)]));
        s.add_relation(RelationSchema::new("WithBonus", &[("UID", INT), ("type", STRING)]));
        s.constraints = vec![
            Constraint::PrimaryKey { relation: "User".into(), cols: vec![0] },
            Constraint::PrimaryKey { relation: "WithBonus".into(), cols: vec![0] },
            Constraint::ForeignKey { from: "WithBonus".into(), from_cols: vec![0], to: "User".into(), to_cols: vec![0] },
            Constraint::Domain {
                relation: "WithBonus".into(),
                col: 1,
                allowed: ["50%", "15eur", "extra_item"].iter().map(|s| Value::text(STRING, s)).collect(),
            },
        ];
        s
    }

    fn user(id: i64, card: &str) -> Vec<Value> {
        vec![Value::int(INT, id), Value::text(STRING, card)]
    }

    fn bonus(id: i64, t: &str) -> Vec<Value> {
        vec![Value::int(INT, id), Value::text(STRING, t)]
    }

    fn addb() -> Action {
        Action {
            name: "addb".into(),
            params: vec![("uid".into(), INT.into()), ("bt".into(), STRING.into())],
            adds: vec![FactTemplate { relation: "WithBonus".into(), terms: vec![Term::var("uid"), Term::var("bt")] }],
            dels: vec![],
        }
    }

    fn theta(uid: i64, bt: &str) -> Substitution {
        [("uid".into(), Value::int(INT, uid)), ("bt".into(), Value::text(STRING, bt))].into_iter().collect()
    }

    #[test]
    fn active_domain_by_type() {
        let mut i = Instance::new();
        i.insert(&"User".into(), user(1, "a"));
        i.insert(&"User".into(), user(2, "b"));
        assert_eq!(active_domain(&i, INT), BTreeSet::from([Value::int(INT, 1), Value::int(INT, 2)]));
        assert!(active_domain(&Instance::new(), INT).is_empty());
        let mut w = Instance::new();
        w.insert(&"InWarehouse".into(), vec![Value::int(INT, 7), Value::text(STRING, "tv"), Value::real_str(REAL, "99.9")]);
        assert_eq!(active_domain(&w, STRING), BTreeSet::from([Value::text(STRING, "tv")]));
        assert!(active_domain(&w, "unknown").is_empty());
    }

    #[test]
    fn fk_check() {
        let s = bonus_schema();
        let fk = &s.constraints[2];
        let mut i = Instance::new();
        i.insert(&"User".into(), user(1, "a"));
        i.insert(&"WithBonus".into(), bonus(1, "50%"));
        assert!(s.check_constraint(&i, fk).unwrap());
        let mut j = Instance::new();
        j.insert(&"User".into(), user(1, "a"));
        j.insert(&"WithBonus".into(), bonus(2, "50%"));
        assert!(!s.check_constraint(&j, fk).unwrap());
    }

    #[test]
    fn empty_instance_satisfies_everything() {
        let s = bonus_schema();
        for c in &s.constraints {
            assert!(s.check_constraint(&Instance::new(), c).unwrap());
        }
    }

    #[test]
    fn malformed_constraints_are_rejected() {
        let s = bonus_schema();
        let bad = Constraint::PrimaryKey { relation: "User".into(), cols: vec![5] };
        assert!(matches!(s.check_constraint(&Instance::new(), &bad), Err(RelError::IndexOutOfRange { .. })));
        let empty = Constraint::PrimaryKey { relation: "User".into(), cols: vec![] };
        assert!(matches!(s.validate_constraint(&empty), Err(RelError::EmptyIndexSet(_))));
        let not_key =
            Constraint::ForeignKey { from: "User".into(), from_cols: vec![1], to: "WithBonus".into(), to_cols: vec![1] };
        assert!(matches!(s.validate_constraint(&not_key), Err(RelError::FkTargetNotKey(_))));
    }

    #[test]
    fn pk_and_domain() {
        let s = bonus_schema();
        let mut i = Instance::new();
        i.insert(&"User".into(), user(1, "a"));
        i.insert(&"User".into(), user(1, "b"));
        assert!(!s.check_constraint(&i, &s.constraints[0]).unwrap());
        let mut j = Instance::new();
        j.insert(&"WithBonus".into(), bonus(1, "gift"));
        assert!(!s.check_constraint(&j, &s.constraints[3]).unwrap());
    }

    #[test]
    fn addb_commits_when_user_exists() {
        let s = bonus_schema();
        let mut i = Instance::new();
        i.insert(&"User".into(), user(1, "a"));
        let (out, o) = s.apply_action(&i, &addb(), &theta(1, "50%")).unwrap();
        assert_eq!(o, Outcome::Commit);
        assert_eq!(out.fact_lines(), vec!["User(1,\"a\")", "WithBonus(1,\"50%\")"]);
    }

    #[test]
    fn addb_rolls_back_on_fk_violation() {
        let s = bonus_schema();
        let mut i = Instance::new();
        i.insert(&"User".into(), user(1, "a"));
        let (out, o) = s.apply_action(&i, &addb(), &theta(9, "50%")).unwrap();
        assert_eq!(o, Outcome::Rollback);
        assert_eq!(out, i);
    }

    #[test]
    fn identity_action_commits() {
        let s = bonus_schema();
        let a = Action { name: "noop".into(), params: vec![], adds: vec![], dels: vec![] };
        let mut i = Instance::new();
        i.insert(&"User".into(), user(3, "z"));
        assert_eq!(s.apply_action(&i, &a, &Substitution::new()).unwrap(), (i.clone(), Outcome::Commit));
    }

    #[test]
    fn deletion_precedes_addition() {
        let s = bonus_schema();
        let mut a = addb();
        a.dels = a.adds.clone();
        let mut i = Instance::new();
        i.insert(&"User".into(), user(1, "a"));
        let (out, o) = s.apply_action(&i, &a, &theta(1, "15eur")).unwrap();
        assert_eq!(o, Outcome::Commit);
        assert!(out.contains("WithBonus", &bonus(1, "15eur")));
    }

    #[test]
    fn binding_errors() {
        let s = bonus_schema();
        let partial: Substitution = [("uid".into(), Value::int(INT, 1))].into_iter().collect();
        assert_eq!(s.apply_action(&Instance::new(), &addb(), &partial), Err(RelError::Unbound("bt".into())));
        let wrong: Substitution =
            [("uid".into(), Value::text(STRING, "1")), ("bt".into(), Value::text(STRING, "x"))].into_iter().collect();
        assert!(matches!(s.apply_action(&Instance::new(), &addb(), &wrong), Err(RelError::IllTyped { .. })));
    }

    #[test]
    fn action_validation() {
        let s = bonus_schema();
        assert!(s.validate_action(&addb()).is_ok());
        let mut a = addb();
        a.adds[0].terms[1] = Term::var("other");
        assert!(matches!(s.validate_action(&a), Err(RelError::NotAParameter { .. })));
    }

    #[test]
    fn canonical_lines_sorted() {
        let mut i = Instance::new();
        i.insert(&"WithBonus".into(), bonus(2, "x"));
        i.insert(&"User".into(), user(10, "b"));
        i.insert(&"User".into(), user(2, "a"));
        assert_eq!(i.canonical(), "User(10,\"b\")\nUser(2,\"a\")\nWithBonus(2,\"x\")");
    }
}
