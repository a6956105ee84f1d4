//! Terms, substitutions, filter literals and transition guards.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::value::{Name, Pred, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Name),
    Const(Value),
}

impl Term {
    pub fn var(n: &str) -> Self {
        Term::Var(n.into())
    }

    pub fn as_var(&self) -> Option<&Name> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn resolve(&self, s: &Substitution) -> Option<Value> {
        match self {
            Term::Var(v) => s.get(v).cloned(),
            Term::Const(c) => Some(c.clone()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

pub fn vars_of<'a>(terms: impl IntoIterator<Item = &'a Term>) -> impl Iterator<Item = &'a Name> {
    terms.into_iter().filter_map(Term::as_var)
}

/// Ground every term; `None` if some variable is unbound.
pub fn ground(terms: &[Term], s: &Substitution) -> Option<Vec<Value>> {
    terms.iter().map(|t| t.resolve(s)).collect()
}

/// Extend `s` so that `terms` instantiate to `tuple`. Repeated variables must agree.
pub fn unify(terms: &[Term], tuple: &[Value], s: &Substitution) -> Option<Substitution> {
    if terms.len() != tuple.len() {
        return None;
    }
    let mut out: Option<Substitution> = None;
    for (t, v) in terms.iter().zip(tuple) {
        match t {
            Term::Const(c) => {
                if c != v {
                    return None;
                }
            }
            Term::Var(x) => {
                let cur = out.as_ref().unwrap_or(s);
                match cur.get(x) {
                    Some(bound) if bound != v => return None,
                    Some(_) => {}
                    None => {
                        out.get_or_insert_with(|| s.clone()).insert(x.clone(), v.clone());
                    }
                }
            }
        }
    }
    Some(out.unwrap_or_else(|| s.clone()))
}

/// Variable assignment θ. Ordered so that labels and bindings serialize canonically.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution(pub BTreeMap<Name, Value>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &str) -> Option<&Value> {
        self.0.get(v)
    }

    pub fn insert(&mut self, k: Name, v: Value) {
        self.0.insert(k, v);
    }

    pub fn contains(&self, v: &str) -> bool {
        self.0.contains_key(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Value)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn restrict<'a>(&self, keep: impl IntoIterator<Item = &'a Name>) -> Substitution {
        Substitution(
            keep.into_iter()
                .filter_map(|k| self.0.get(k).map(|v| (k.clone(), v.clone())))
                .collect(),
        )
    }
}

impl FromIterator<(Name, Value)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Name, Value)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

/// A possibly negated binary predicate over terms, as used in query filters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub negated: bool,
    pub pred: Pred,
    pub args: [Term; 2],
}

impl Literal {
    pub fn new(pred: Pred, a: Term, b: Term) -> Self {
        Literal { negated: false, pred, args: [a, b] }
    }

    pub fn neq(a: Term, b: Term) -> Self {
        Literal { negated: true, pred: Pred::Eq, args: [a, b] }
    }

    /// `None` when an argument is unbound.
    pub fn eval(&self, s: &Substitution) -> Option<bool> {
        let a = self.args[0].resolve(s)?;
        let b = self.args[1].resolve(s)?;
        Some(self.pred.eval(&a, &b) != self.negated)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Name> {
        vars_of(&self.args)
    }

    pub fn rename(&self, f: &impl Fn(&Term) -> Term) -> Literal {
        Literal { negated: self.negated, pred: self.pred, args: [f(&self.args[0]), f(&self.args[1])] }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b] = &self.args;
        match (self.pred.infix(), self.negated) {
            (Some("="), true) => write!(f, "{a} != {b}"),
            (Some(op), false) => write!(f, "{a} {op} {b}"),
            (Some(op), true) => write!(f, "!({a} {op} {b})"),
            (None, neg) => write!(f, "{}succ({a}, {b})", if neg { "!" } else { "" }),
        }
    }
}

/// Guard grammar: `true | P(t1,t2) | ¬φ | φ ∧ φ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Guard {
    True,
    Atom(Pred, [Term; 2]),
    Not(Box<Guard>),
    And(Vec<Guard>),
}

impl Guard {
    pub fn from_literal(l: &Literal) -> Guard {
        let atom = Guard::Atom(l.pred, l.args.clone());
        if l.negated {
            Guard::Not(Box::new(atom))
        } else {
            atom
        }
    }

    pub fn conj(mut parts: Vec<Guard>) -> Guard {
        parts.retain(|g| *g != Guard::True);
        match parts.len() {
            0 => Guard::True,
            1 => parts.pop().unwrap(),
            _ => Guard::And(parts),
        }
    }

    pub fn from_literals(ls: &[Literal]) -> Guard {
        Guard::conj(ls.iter().map(Guard::from_literal).collect())
    }

    pub fn negate(g: Guard) -> Guard {
        match g {
            Guard::Not(inner) => *inner,
            g => Guard::Not(Box::new(g)),
        }
    }

    /// Disjunction expressed through De Morgan; the grammar has no primitive `∨`.
    pub fn disj(parts: Vec<Guard>) -> Guard {
        if parts.is_empty() {
            return Guard::Not(Box::new(Guard::True));
        }
        Guard::negate(Guard::conj(parts.into_iter().map(Guard::negate).collect()))
    }

    /// `None` when a referenced variable is unbound.
    pub fn eval(&self, s: &Substitution) -> Option<bool> {
        Some(match self {
            Guard::True => true,
            Guard::Atom(p, [a, b]) => p.eval(&a.resolve(s)?, &b.resolve(s)?),
            Guard::Not(g) => !g.eval(s)?,
            Guard::And(gs) => {
                let mut all = true;
                for g in gs {
                    all &= g.eval(s)?;
                }
                all
            }
        })
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Name>) {
        match self {
            Guard::True => {}
            Guard::Atom(_, args) => out.extend(vars_of(args).cloned()),
            Guard::Not(g) => g.collect_vars(out),
            Guard::And(gs) => gs.iter().for_each(|g| g.collect_vars(out)),
        }
    }

    pub fn atoms(&self) -> Vec<(Pred, &[Term; 2])> {
        match self {
            Guard::True => vec![],
            Guard::Atom(p, a) => vec![(*p, a)],
            Guard::Not(g) => g.atoms(),
            Guard::And(gs) => gs.iter().flat_map(|g| g.atoms()).collect(),
        }
    }

    pub fn rename(&self, f: &impl Fn(&Term) -> Term) -> Guard {
        match self {
            Guard::True => Guard::True,
            Guard::Atom(p, [a, b]) => Guard::Atom(*p, [f(a), f(b)]),
            Guard::Not(g) => Guard::Not(Box::new(g.rename(f))),
            Guard::And(gs) => Guard::And(gs.iter().map(|g| g.rename(f)).collect()),
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::True => f.write_str("true"),
            Guard::Atom(p, [a, b]) => match p.infix() {
                Some(op) => write!(f, "{a} {op} {b}"),
                None => write!(f, "succ({a}, {b})"),
            },
            Guard::Not(g) => match &**g {
                Guard::Atom(Pred::Eq, [a, b]) => write!(f, "{a} != {b}"),
                Guard::Atom(Pred::Succ, _) | Guard::True => write!(f, "!{g}"),
                g => write!(f, "!({g})"),
            },
            Guard::And(gs) => {
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    match g {
                        Guard::And(_) => write!(f, "({g})")?,
                        g => write!(f, "{g}")?,
                    }
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{INT, STRING};

    fn s(pairs: &[(&str, Value)]) -> Substitution {
        pairs.iter().map(|(k, v)| (Name::from(*k), v.clone())).collect()
    }

    #[test]
    fn unify_repeated_variables_must_agree() {
        let terms = [Term::var("x"), Term::var("x")];
        let one = Value::int(INT, 1);
        let two = Value::int(INT, 2);
        assert!(unify(&terms, &[one.clone(), one.clone()], &Substitution::new()).is_some());
        assert!(unify(&terms, &[one.clone(), two], &Substitution::new()).is_none());
    }

    #[test]
    fn unify_respects_existing_binding_and_constants() {
        let base = s(&[("x", Value::int(INT, 1))]);
        let terms = [Term::var("x"), Term::Const(Value::text(STRING, "a"))];
        assert!(unify(&terms, &[Value::int(INT, 1), Value::text(STRING, "a")], &base).is_some());
        assert!(unify(&terms, &[Value::int(INT, 2), Value::text(STRING, "a")], &base).is_none());
        assert!(unify(&terms, &[Value::int(INT, 1), Value::text(STRING, "b")], &base).is_none());
    }

    #[test]
    fn guard_disjunction_via_de_morgan() {
        let x = Term::var("x");
        let g = Guard::disj(vec![
            Guard::Atom(Pred::Eq, [x.clone(), Term::Const(Value::int(INT, 1))]),
            Guard::Atom(Pred::Eq, [x.clone(), Term::Const(Value::int(INT, 2))]),
        ]);
        for (v, want) in [(1, true), (2, true), (3, false)] {
            assert_eq!(g.eval(&s(&[("x", Value::int(INT, v))])), Some(want));
        }
        assert_eq!(Guard::disj(vec![]).eval(&Substitution::new()), Some(false));
    }

    #[test]
    fn unbound_guard_variable_is_reported() {
        let g = Guard::Atom(Pred::Eq, [Term::var("y"), Term::var("y")]);
        assert_eq!(g.eval(&Substitution::new()), None);
    }

    #[test]
    fn literal_display_forms() {
        let l = Literal::neq(Term::var("c"), Term::Const(Value::null("real")));
        assert_eq!(l.to_string(), "c != null");
        let g = Guard::from_literal(&l);
        assert_eq!(g.to_string(), "c != null");
    }
}
