//! Unions of conjunctive queries with filter literals, evaluated under active-domain semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::relational::{Instance, Schema};
use crate::term::{unify, Literal, Substitution, Term};
use crate::value::{Name, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(Name),
    #[error("query `{query}`: variable `{var}` does not occur in any relation atom")]
    Unsafe { query: Name, var: Name },
    #[error("query `{query}`: atom {relation} expects {expected} arguments, got {found}")]
    Arity { query: Name, relation: Name, expected: usize, found: usize },
    #[error("query `{query}`: variable `{var}` used at types `{first}` and `{second}`")]
    VarType { query: Name, var: Name, first: Name, second: Name },
    #[error("query `{query}`: constant {value} does not fit type `{expected}`")]
    ConstType { query: Name, value: Value, expected: Name },
    #[error("query `{query}`: predicate {pred:?} is not available on type `{ty}`")]
    Predicate { query: Name, pred: crate::value::Pred, ty: Name },
    #[error("query `{query}`: filter `{filter}` compares terms of different types")]
    FilterType { query: Name, filter: String },
    #[error("query `{0}` has no disjuncts")]
    Empty(Name),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub relation: Name,
    pub terms: Vec<Term>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.relation, self.terms.iter().join(", "))
    }
}

/// `∃y⃗. R1(..) ∧ … ∧ filters`. Existentials are every non-free variable of the body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conjunct {
    pub existential: Vec<(Name, Name)>,
    pub atoms: Vec<Atom>,
    pub filters: Vec<Literal>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UcqQuery {
    pub name: Name,
    pub free: Vec<(Name, Name)>,
    pub disjuncts: Vec<Conjunct>,
}

/// Answers keyed by position of `UcqQuery::free`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnswerSet {
    pub vars: Vec<Name>,
    pub rows: BTreeSet<Vec<Value>>,
}

impl AnswerSet {
    pub fn substitutions(&self) -> impl Iterator<Item = Substitution> + '_ {
        self.rows.iter().map(|r| self.vars.iter().cloned().zip(r.iter().cloned()).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Conjunct {
    pub fn vars(&self) -> BTreeSet<Name> {
        let mut out: BTreeSet<Name> =
            self.atoms.iter().flat_map(|a| a.terms.iter().filter_map(Term::as_var).cloned()).collect();
        out.extend(self.filters.iter().flat_map(|l| l.vars().cloned()));
        out
    }

    fn atom_vars(&self) -> BTreeSet<&Name> {
        self.atoms.iter().flat_map(|a| a.terms.iter().filter_map(Term::as_var)).collect()
    }

    /// All satisfying extensions of `seed`, joining atoms left to right and applying each filter as soon as it is ground.
    pub fn solutions(&self, inst: &Instance, seed: &Substitution) -> Vec<Substitution> {
        let mut pending: Vec<&Literal> = self.filters.iter().collect();
        let mut frontier = vec![seed.clone()];
        frontier.retain(|s| filters_hold(&pending, s));
        for atom in &self.atoms {
            let mut next = Vec::new();
            for s in &frontier {
                for tuple in inst.relation(&atom.relation) {
                    if let Some(ext) = unify(&atom.terms, tuple, s) {
                        if filters_hold(&pending, &ext) {
                            next.push(ext);
                        }
                    }
                }
            }
            frontier = next;
            if frontier.is_empty() {
                return frontier;
            }
            if let Some(s) = frontier.first() {
                pending.retain(|l| l.eval(s).is_none());
            }
        }
        frontier.retain(|s| self.filters.iter().all(|l| l.eval(s) == Some(true)));
        frontier
    }
}

fn filters_hold(filters: &[&Literal], s: &Substitution) -> bool {
    filters.iter().all(|l| l.eval(s) != Some(false))
}

impl UcqQuery {
    pub fn free_names(&self) -> Vec<Name> {
        self.free.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn free_types(&self) -> Vec<Name> {
        self.free.iter().map(|(_, t)| t.clone()).collect()
    }

    /// Typing and safety against a schema.
    pub fn validate(&self, schema: &Schema) -> Result<(), QueryError> {
        let q = &self.name;
        if self.disjuncts.is_empty() {
            return Err(QueryError::Empty(q.clone()));
        }
        for d in &self.disjuncts {
            let mut types: BTreeMap<&Name, &Name> = BTreeMap::new();
            for (v, t) in self.free.iter().chain(&d.existential) {
                if let Some(prev) = types.insert(v, t) {
                    if prev != t {
                        return Err(QueryError::VarType { query: q.clone(), var: v.clone(), first: prev.clone(), second: t.clone() });
                    }
                }
            }
            let atom_vars = d.atom_vars();
            for v in self.free.iter().map(|(v, _)| v).chain(d.filters.iter().flat_map(|l| l.vars())) {
                if !atom_vars.contains(v) {
                    return Err(QueryError::Unsafe { query: q.clone(), var: v.clone() });
                }
            }
            for a in &d.atoms {
                let r = schema.relations.get(&a.relation).ok_or_else(|| QueryError::UnknownRelation(a.relation.clone()))?;
                if r.arity() != a.terms.len() {
                    return Err(QueryError::Arity {
                        query: q.clone(),
                        relation: a.relation.clone(),
                        expected: r.arity(),
                        found: a.terms.len(),
                    });
                }
                for (t, c) in a.terms.iter().zip(&r.columns) {
                    match t {
                        Term::Const(v) => {
                            if schema.check_value(v, &c.ty).is_err() {
                                return Err(QueryError::ConstType { query: q.clone(), value: v.clone(), expected: c.ty.clone() });
                            }
                        }
                        Term::Var(v) => match types.get(v) {
                            Some(&t) if *t != c.ty => {
                                return Err(QueryError::VarType {
                                    query: q.clone(),
                                    var: v.clone(),
                                    first: t.clone(),
                                    second: c.ty.clone(),
                                })
                            }
                            Some(_) => {}
                            None => return Err(QueryError::Unsafe { query: q.clone(), var: v.clone() }),
                        },
                    }
                }
            }
            for l in &d.filters {
                let ty = |t: &Term| match t {
                    Term::Var(v) => types.get(v).map(|t| (*t).clone()),
                    Term::Const(c) => Some(c.ty.clone()),
                };
                let (a, b) = (ty(&l.args[0]), ty(&l.args[1]));
                let (Some(a), Some(b)) = (a, b) else {
                    return Err(QueryError::FilterType { query: q.clone(), filter: l.to_string() });
                };
                if a != b {
                    return Err(QueryError::FilterType { query: q.clone(), filter: l.to_string() });
                }
                let kind = schema.types.kind(&a).ok_or_else(|| QueryError::FilterType { query: q.clone(), filter: l.to_string() })?;
                if !kind.supports(l.pred) {
                    return Err(QueryError::Predicate { query: q.clone(), pred: l.pred, ty: a });
                }
            }
        }
        Ok(())
    }
}

/// Exactly the free-variable tuples witnessed by some disjunct; duplicates collapse.
pub fn eval_ucq(q: &UcqQuery, inst: &Instance) -> AnswerSet {
    let vars = q.free_names();
    let mut rows = BTreeSet::new();
    for d in &q.disjuncts {
        for s in d.solutions(inst, &Substitution::new()) {
            if let Some(row) = vars.iter().map(|v| s.get(v).cloned()).collect::<Option<Vec<_>>>() {
                rows.insert(row);
            }
        }
    }
    AnswerSet { vars, rows }
}

/// Position-wise comparison of free-variable types against a place color.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColorMismatch {
    Arity { query: usize, color: usize },
    Position { index: usize, query: Name, color: Name },
}

impl fmt::Display for ColorMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorMismatch::Arity { query, color } => write!(f, "query has {query} free variables, color has {color} components"),
            ColorMismatch::Position { index, query, color } => {
                write!(f, "position {}: query type `{query}` vs color `{color}`", index + 1)
            }
        }
    }
}

pub fn validate_view_query(q: &UcqQuery, color: &[Name]) -> Result<(), Vec<ColorMismatch>> {
    if q.free.len() != color.len() {
        return Err(vec![ColorMismatch::Arity { query: q.free.len(), color: color.len() }]);
    }
    let bad: Vec<_> = q
        .free
        .iter()
        .zip(color)
        .enumerate()
        .filter(|(_, ((_, qt), ct))| qt != *ct)
        .map(|(index, ((_, qt), ct))| ColorMismatch::Position { index, query: qt.clone(), color: ct.clone() })
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::RelationSchema;
    use crate::value::{Pred, INT, REAL, STRING};

    fn schema() -> Schema {
        let mut s = Schema::default();
        s.add_relation(RelationSchema::new("User", &[("ID", INT), ("card", STRING)]));
        s.add_relation(RelationSchema::new("Product", &[("Name", STRING)]));
        s.add_relation(RelationSchema::new("InWarehouse", &[("PID", INT), ("name", STRING), ("cost", REAL)]));
        s
    }

    fn q_users() -> UcqQuery {
        UcqQuery {
            name: "Q_users".into(),
            free: vec![("uid".into(), INT.into())],
            disjuncts: vec![Conjunct {
                existential: vec![("card".into(), STRING.into())],
                atoms: vec![Atom { relation: "User".into(), terms: vec![Term::var("uid"), Term::var("card")] }],
                filters: vec![],
            }],
        }
    }

    fn q_products() -> UcqQuery {
        UcqQuery {
            name: "Q_products".into(),
            free: vec![("pid".into(), INT.into()), ("n".into(), STRING.into()), ("c".into(), REAL.into())],
            disjuncts: vec![Conjunct {
                existential: vec![],
                atoms: vec![
                    Atom { relation: "Product".into(), terms: vec![Term::var("n")] },
                    Atom { relation: "InWarehouse".into(), terms: vec![Term::var("pid"), Term::var("n"), Term::var("c")] },
                ],
                filters: vec![Literal::neq(Term::var("c"), Term::Const(Value::null(REAL)))],
            }],
        }
    }

    #[test]
    fn users_view() {
        let mut i = Instance::new();
        i.insert(&"User".into(), vec![Value::int(INT, 1), Value::text(STRING, "a")]);
        i.insert(&"User".into(), vec![Value::int(INT, 2), Value::text(STRING, "b")]);
        let a = eval_ucq(&q_users(), &i);
        assert_eq!(a.rows, BTreeSet::from([vec![Value::int(INT, 1)], vec![Value::int(INT, 2)]]));
    }

    #[test]
    fn products_view_filters_null_cost() {
        let mut i = Instance::new();
        i.insert(&"Product".into(), vec![Value::text(STRING, "tv")]);
        i.insert(&"InWarehouse".into(), vec![Value::int(INT, 7), Value::text(STRING, "tv"), Value::real_str(REAL, "99.9")]);
        i.insert(&"InWarehouse".into(), vec![Value::int(INT, 8), Value::text(STRING, "tv"), Value::null(REAL)]);
        let a = eval_ucq(&q_products(), &i);
        assert_eq!(
            a.rows,
            BTreeSet::from([vec![Value::int(INT, 7), Value::text(STRING, "tv"), Value::real_str(REAL, "99.9")]])
        );
    }

    #[test]
    fn empty_instance_gives_no_answers() {
        assert!(eval_ucq(&q_users(), &Instance::new()).is_empty());
        assert!(eval_ucq(&q_products(), &Instance::new()).is_empty());
    }

    #[test]
    fn safety_rejects_filter_only_variables() {
        let mut q = q_users();
        q.disjuncts[0].filters.push(Literal::new(Pred::Lt, Term::var("z"), Term::var("uid")));
        assert!(matches!(q.validate(&schema()), Err(QueryError::Unsafe { .. })));
        assert!(q_users().validate(&schema()).is_ok());
        assert!(q_products().validate(&schema()).is_ok());
    }

    #[test]
    fn ordering_on_strings_is_rejected() {
        let mut q = q_users();
        q.disjuncts[0].filters.push(Literal::new(Pred::Lt, Term::var("card"), Term::var("card")));
        assert!(matches!(q.validate(&schema()), Err(QueryError::Predicate { .. })));
    }

    #[test]
    fn view_color_checks() {
        assert!(validate_view_query(&q_users(), &[INT.into()]).is_ok());
        assert_eq!(
            validate_view_query(&q_users(), &[STRING.into()]),
            Err(vec![ColorMismatch::Position { index: 0, query: INT.into(), color: STRING.into() }])
        );
        let two = UcqQuery { free: vec![("a".into(), INT.into()), ("b".into(), INT.into())], ..q_users() };
        assert_eq!(
            validate_view_query(&two, &[INT.into(), INT.into(), INT.into()]),
            Err(vec![ColorMismatch::Arity { query: 2, color: 3 }])
        );
    }
}
