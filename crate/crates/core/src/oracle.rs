//! Brute-force first-order evaluation over the active domain.
//!
//! Deliberately naive: every quantifier enumerates the active domain of its variable's type.
//! Used as a reference for the join-based query evaluator and the constraint checker.

use std::collections::BTreeSet;

use crate::query::{AnswerSet, UcqQuery};
use crate::relational::{active_domain, Constraint, Instance, Schema};
use crate::term::{Substitution, Term};
use crate::value::{Name, Pred, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    Rel(Name, Vec<Term>),
    Pred(Pred, [Term; 2]),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<(Name, Name)>, Box<Formula>),
    Forall(Vec<(Name, Name)>, Box<Formula>),
}

impl Formula {
    pub fn negate(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(vars: Vec<(Name, Name)>, f: Formula) -> Formula {
        Formula::Exists(vars, Box::new(f))
    }

    pub fn forall(vars: Vec<(Name, Name)>, f: Formula) -> Formula {
        Formula::Forall(vars, Box::new(f))
    }

    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Pred(Pred::Eq, [a, b])
    }
}

fn resolve(t: &Term, s: &Substitution) -> Value {
    t.resolve(s).expect("oracle formula has an unbound variable")
}

fn holds(f: &Formula, inst: &Instance, s: &Substitution) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Rel(r, ts) => {
            let tuple: Vec<Value> = ts.iter().map(|t| resolve(t, s)).collect();
            inst.contains(r, &tuple)
        }
        Formula::Pred(p, [a, b]) => p.eval(&resolve(a, s), &resolve(b, s)),
        Formula::Not(g) => !holds(g, inst, s),
        Formula::And(gs) => gs.iter().all(|g| holds(g, inst, s)),
        Formula::Or(gs) => gs.iter().any(|g| holds(g, inst, s)),
        Formula::Implies(a, b) => !holds(a, inst, s) || holds(b, inst, s),
        Formula::Exists(vs, g) => assignments(vs, inst, s).iter().any(|s2| holds(g, inst, s2)),
        Formula::Forall(vs, g) => assignments(vs, inst, s).iter().all(|s2| holds(g, inst, s2)),
    }
}

/// Every extension of `base` sending each variable into the active domain of its type.
fn assignments(vars: &[(Name, Name)], inst: &Instance, base: &Substitution) -> Vec<Substitution> {
    let mut out = vec![base.clone()];
    for (v, ty) in vars {
        let dom = active_domain(inst, ty);
        out = out
            .into_iter()
            .flat_map(|s| {
                dom.iter().map(move |val| {
                    let mut s = s.clone();
                    s.insert(v.clone(), val.clone());
                    s
                })
            })
            .collect();
    }
    out
}

/// Answers over `free`; a closed formula yields `{⟨⟩}` when true and `∅` when false.
pub fn eval_fo_oracle(f: &Formula, free: &[(Name, Name)], inst: &Instance) -> AnswerSet {
    let vars: Vec<Name> = free.iter().map(|(v, _)| v.clone()).collect();
    let rows: BTreeSet<Vec<Value>> = assignments(free, inst, &Substitution::new())
        .into_iter()
        .filter(|s| holds(f, inst, s))
        .map(|s| vars.iter().map(|v| s.get(v).unwrap().clone()).collect())
        .collect();
    AnswerSet { vars, rows }
}

pub fn sentence_holds(f: &Formula, inst: &Instance) -> bool {
    !eval_fo_oracle(f, &[], inst).rows.is_empty()
}

pub fn from_ucq(q: &UcqQuery) -> Formula {
    Formula::Or(
        q.disjuncts
            .iter()
            .map(|d| {
                let mut body: Vec<Formula> =
                    d.atoms.iter().map(|a| Formula::Rel(a.relation.clone(), a.terms.clone())).collect();
                body.extend(d.filters.iter().map(|l| {
                    let p = Formula::Pred(l.pred, l.args.clone());
                    if l.negated {
                        Formula::negate(p)
                    } else {
                        p
                    }
                }));
                Formula::exists(d.existential.clone(), Formula::And(body))
            })
            .collect(),
    )
}

/// The closed sentence expressing a constraint.
pub fn from_constraint(schema: &Schema, c: &Constraint) -> Formula {
    let vars = |rel: &Name, prefix: &str| -> Vec<(Name, Name)> {
        schema.relations[rel]
            .columns
            .iter()
            .enumerate()
            .map(|(i, col)| (Name::from(format!("{prefix}{i}")), col.ty.clone()))
            .collect()
    };
    let terms = |vs: &[(Name, Name)]| vs.iter().map(|(v, _)| Term::Var(v.clone())).collect::<Vec<_>>();
    match c {
        Constraint::PrimaryKey { relation, cols } => {
            let x = vars(relation, "x");
            let y = vars(relation, "y");
            let key_eq = cols.iter().map(|&i| Formula::eq(terms(&x)[i].clone(), terms(&y)[i].clone())).collect();
            let all_eq = (0..x.len()).map(|i| Formula::eq(terms(&x)[i].clone(), terms(&y)[i].clone())).collect();
            let body = Formula::implies(
                Formula::And(vec![
                    Formula::Rel(relation.clone(), terms(&x)),
                    Formula::Rel(relation.clone(), terms(&y)),
                    Formula::And(key_eq),
                ]),
                Formula::And(all_eq),
            );
            Formula::forall([x, y].concat(), body)
        }
        Constraint::ForeignKey { from, from_cols, to, to_cols } => {
            let x = vars(from, "x");
            let y = vars(to, "y");
            let link = from_cols
                .iter()
                .zip(to_cols)
                .map(|(&i, &j)| Formula::eq(terms(&x)[i].clone(), terms(&y)[j].clone()))
                .collect();
            Formula::forall(
                x.clone(),
                Formula::implies(
                    Formula::Rel(from.clone(), terms(&x)),
                    Formula::exists(y.clone(), Formula::And(vec![Formula::Rel(to.clone(), terms(&y)), Formula::And(link)])),
                ),
            )
        }
        Constraint::Domain { relation, col, allowed } => {
            let x = vars(relation, "x");
            let col_term = terms(&x)[*col].clone();
            let members = allowed.iter().map(|v| Formula::eq(col_term.clone(), Term::Const(v.clone()))).collect();
            Formula::forall(x.clone(), Formula::implies(Formula::Rel(relation.clone(), terms(&x)), Formula::Or(members)))
        }
    }
}
