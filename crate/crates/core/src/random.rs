//! Random schemas, instances and safe UCQ≠ queries over small value pools, so that joins and
//! filters hit often.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::query::{Atom, Conjunct, UcqQuery};
use crate::relational::{Instance, RelationSchema, Schema};
use crate::term::{Literal, Term};
use crate::value::{Name, Pred, Value, INT, STRING};

const TEXT_POOL: [&str; 3] = ["a", "b", "c"];
const INT_POOL: std::ops::Range<i64> = 0..4;

fn random_value(rng: &mut impl Rng, ty: &str, nulls: bool) -> Value {
    if nulls && rng.random_ratio(1, 12) {
        return Value::null(ty);
    }
    match ty {
        INT => Value::int(INT, rng.random_range(INT_POOL)),
        _ => Value::text(STRING, TEXT_POOL.choose(rng).unwrap()),
    }
}

/// Up to `max_relations` relations named `R0..`, arity 1 to 3, over `int` and `string`. No constraints.
pub fn random_schema(rng: &mut impl Rng, max_relations: usize) -> Schema {
    let mut s = Schema::default();
    for r in 0..rng.random_range(1..=max_relations.max(1)) {
        let cols: Vec<(String, &str)> =
            (0..rng.random_range(1..=3)).map(|c| (format!("c{c}"), if rng.random_bool(0.6) { INT } else { STRING })).collect();
        let cols: Vec<(&str, &str)> = cols.iter().map(|(n, t)| (n.as_str(), *t)).collect();
        s.add_relation(RelationSchema::new(&format!("R{r}"), &cols));
    }
    s
}

/// At most `max_tuples` facts per relation, with occasional nulls.
pub fn random_instance(rng: &mut impl Rng, schema: &Schema, max_tuples: usize) -> Instance {
    let mut inst = Instance::new();
    for r in schema.relations.values() {
        for _ in 0..rng.random_range(0..=max_tuples) {
            let t = r.columns.iter().map(|c| random_value(rng, &c.ty, true)).collect();
            inst.insert(&r.name, t);
        }
    }
    inst
}

struct VarPool {
    vars: Vec<(Name, Name)>,
}

impl VarPool {
    fn of_type<'a>(&'a self, ty: &'a Name) -> impl Iterator<Item = &'a Name> + 'a {
        self.vars.iter().filter(move |(_, t)| t == ty).map(|(v, _)| v)
    }

    fn fresh(&mut self, ty: &Name) -> Name {
        let v: Name = format!("y{}", self.vars.len()).into();
        self.vars.push((v.clone(), ty.clone()));
        v
    }
}

fn random_term(rng: &mut impl Rng, pool: &mut VarPool, ty: &Name) -> Term {
    let existing: Vec<Name> = pool.of_type(ty).cloned().collect();
    match rng.random_range(0..10) {
        0..=1 => Term::Const(random_value(rng, ty, false)),
        2..=5 if !existing.is_empty() => Term::Var(existing.choose(rng).unwrap().clone()),
        _ => Term::Var(pool.fresh(ty)),
    }
}

fn random_atom(rng: &mut impl Rng, schema: &Schema, pool: &mut VarPool, pinned: Option<&(Name, Name)>) -> Atom {
    let rels: Vec<&RelationSchema> = match pinned {
        Some((_, ty)) => schema.relations.values().filter(|r| r.columns.iter().any(|c| &c.ty == ty)).collect(),
        None => schema.relations.values().collect(),
    };
    let r = rels.choose(rng).expect("pinned types come from the schema");
    let slot = pinned.map(|(_, ty)| {
        let idx: Vec<usize> = (0..r.arity()).filter(|&i| &r.columns[i].ty == ty).collect();
        *idx.choose(rng).unwrap()
    });
    let terms = (0..r.arity())
        .map(|i| match (slot, pinned) {
            (Some(s), Some((v, _))) if s == i => Term::Var(v.clone()),
            _ => random_term(rng, pool, &r.columns[i].ty),
        })
        .collect();
    Atom { relation: r.name.clone(), terms }
}

fn random_filter(rng: &mut impl Rng, pool: &VarPool) -> Option<Literal> {
    let (v, ty) = pool.vars.choose(rng)?;
    let other = match pool.of_type(ty).filter(|w| *w != v).collect::<Vec<_>>().choose(rng) {
        Some(w) if rng.random_bool(0.5) => Term::Var((*w).clone()),
        _ => Term::Const(random_value(rng, ty, false)),
    };
    let preds: &[Pred] = if &**ty == INT { &Pred::ALL } else { &[Pred::Eq] };
    Some(Literal { negated: rng.random_bool(0.4), pred: *preds.choose(rng).unwrap(), args: [Term::Var(v.clone()), other] })
}

/// A safe query: every free and existential variable occurs in a relation atom of each disjunct.
pub fn random_query(rng: &mut impl Rng, schema: &Schema, name: &str) -> UcqQuery {
    let types: Vec<Name> = schema.relations.values().flat_map(|r| r.column_types()).collect();
    let free: Vec<(Name, Name)> = (0..rng.random_range(0..=2)).map(|i| (format!("x{i}").into(), types.choose(rng).unwrap().clone())).collect();
    let disjuncts = (0..rng.random_range(1..=2))
        .map(|_| {
            let mut pool = VarPool { vars: free.clone() };
            let mut atoms: Vec<Atom> = free.iter().map(|f| random_atom(rng, schema, &mut pool, Some(f))).collect();
            for _ in 0..rng.random_range(usize::from(atoms.is_empty())..=2) {
                atoms.push(random_atom(rng, schema, &mut pool, None));
            }
            let filters = (0..rng.random_range(0..=2)).filter_map(|_| random_filter(rng, &pool)).collect();
            let existential = pool.vars[free.len()..].to_vec();
            Conjunct { existential, atoms, filters }
        })
        .collect();
    UcqQuery { name: name.into(), free, disjuncts }
}
