use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use rust_decimal::Decimal;

use crate::dbnet::{ActionBinding, DbNet, Place, PlaceKind, Snapshot, Transition};
use crate::fresh::{FreshMode, FreshPolicy, SampleDomains};
use crate::marking::ArcInscription;
use crate::nucpn::{CpnPlace, CpnTransition, NuCpn, Priority};
use crate::query::{Atom, Conjunct, UcqQuery};
use crate::relational::{Action, Column, Constraint, FactTemplate, RelationSchema, Schema};
use crate::term::{Guard, Literal, Term};
use crate::value::{DataType, DomainKind, Name, Payload, Pred, TypeDomain, Value, BOOL, INT, REAL, STRING};

use super::lexer::{lex, Tok};
use super::{Diagnostic, Model, Pos};

type PResult<T> = Result<T, Diagnostic>;

#[derive(Clone, Debug)]
enum Lit {
    Int(i64),
    Real(String),
    Str(String),
    Bool(bool),
    Null,
}

#[derive(Clone, Debug)]
enum PTerm {
    Var(Name, Pos),
    Lit(Lit, Pos),
}

#[derive(Clone, Debug)]
enum PGuard {
    True,
    Atom(Pred, [PTerm; 2]),
    Not(Box<PGuard>),
    And(Vec<PGuard>),
}

struct PArc {
    place: Name,
    pos: Pos,
    terms: Vec<PTerm>,
}

#[derive(Default)]
struct PTransition {
    inputs: Vec<PArc>,
    reads: Vec<PArc>,
    outputs: Vec<PArc>,
    rollbacks: Vec<PArc>,
    fresh: BTreeSet<Name>,
    guard: Option<PGuard>,
    action: Option<(Name, Pos, Vec<PTerm>)>,
    priority: Option<Priority>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flavor {
    DbNet,
    Cpn,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    flavor: Flavor,
    types: TypeDomain,
    schema: Schema,
    queries: BTreeMap<Name, UcqQuery>,
    actions: BTreeMap<Name, Action>,
    places: Vec<(Place, Pos)>,
    transitions: Vec<(Transition, Option<Priority>)>,
    declared: HashMap<(&'static str, Name), Pos>,
    initial: Snapshot,
    samples: SampleDomains,
    fresh: FreshPolicy,
}

fn err<T>(pos: Pos, msg: impl Into<String>) -> PResult<T> {
    Err(Diagnostic::new(pos, msg.into()))
}

pub(crate) fn parse(src: &str) -> PResult<Model> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        i: 0,
        flavor: Flavor::DbNet,
        types: TypeDomain::default(),
        schema: Schema::default(),
        queries: BTreeMap::new(),
        actions: BTreeMap::new(),
        places: Vec::new(),
        transitions: Vec::new(),
        declared: HashMap::new(),
        initial: Snapshot::default(),
        samples: SampleDomains::default(),
        fresh: FreshPolicy::default(),
    };
    if p.peek() == &Tok::Eof {
        return err(p.pos(), "empty model: expected `dbnet <name>;` or `cpn <name>;`");
    }
    let name = p.header()?;
    while p.peek() != &Tok::Eof {
        p.item()?;
    }
    p.finish(name)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if t.0 != Tok::Eof {
            self.i += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Pos> {
        if self.is_sym(s) {
            Ok(self.bump().1)
        } else {
            err(self.pos(), format!("expected `{s}`, found {}", self.peek()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.is_kw(kw);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            err(self.pos(), format!("expected `{kw}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<(Name, Pos)> {
        match self.bump() {
            (Tok::Ident(s), p) => Ok((Name::from(s.as_str()), p)),
            (t, p) => err(p, format!("expected a name, found {t}")),
        }
    }

    /// `open item (, item)* close`, possibly empty.
    fn list<T>(&mut self, open: &str, close: &str, mut f: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        self.expect_sym(open)?;
        let mut out = Vec::new();
        if self.eat_sym(close) {
            return Ok(out);
        }
        loop {
            out.push(f(self)?);
            if self.eat_sym(close) {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    fn declare(&mut self, ns: &'static str, name: &Name, pos: Pos) -> PResult<()> {
        if let Some(first) = self.declared.get(&(ns, name.clone())) {
            return err(pos, format!("duplicate declaration of {ns} `{name}` (first declared at {first})"));
        }
        self.declared.insert((ns, name.clone()), pos);
        Ok(())
    }

    fn header(&mut self) -> PResult<Name> {
        let (kw, pos) = self.ident()?;
        self.flavor = match &*kw {
            "dbnet" => Flavor::DbNet,
            "cpn" => Flavor::Cpn,
            _ => return err(pos, format!("expected `dbnet` or `cpn`, found `{kw}`")),
        };
        let (name, _) = self.ident()?;
        self.expect_sym(";")?;
        Ok(name)
    }

    fn item(&mut self) -> PResult<()> {
        let (kw, pos) = self.ident()?;
        let persistence = matches!(&*kw, "relation" | "key" | "foreign" | "domain" | "query" | "action" | "view");
        if persistence && self.flavor == Flavor::Cpn {
            return err(pos, format!("`{kw}` declarations are not allowed in a cpn file"));
        }
        match &*kw {
            "type" => self.type_decl(),
            "relation" => self.relation(),
            "key" => self.key(),
            "foreign" => self.foreign_key(),
            "domain" => self.domain(),
            "query" => self.query(),
            "action" => self.action(),
            "place" => self.place(pos, false),
            "view" => self.place(pos, true),
            "transition" => self.transition(),
            "initial" => self.initial(),
            "policy" => self.policy(),
            _ => err(pos, format!("unknown declaration `{kw}`")),
        }
    }

    fn type_name(&mut self) -> PResult<Name> {
        let (t, pos) = self.ident()?;
        if self.types.get(&t).is_none() {
            return err(pos, format!("unknown type `{t}`"));
        }
        Ok(t)
    }

    fn type_decl(&mut self) -> PResult<()> {
        let (name, pos) = self.ident()?;
        self.expect_sym(":")?;
        let (kind, kpos) = self.ident()?;
        let kind = DomainKind::from_keyword(&kind).ok_or_else(|| Diagnostic::new(kpos, format!("unknown domain kind `{kind}`; expected integer, string, real or boolean")))?;
        self.expect_sym(";")?;
        if !self.types.declare(DataType::new(&name, kind)) {
            return err(pos, format!("duplicate declaration of type `{name}`"));
        }
        Ok(())
    }

    fn relation(&mut self) -> PResult<()> {
        let (name, pos) = self.ident()?;
        self.declare("relation", &name, pos)?;
        let mut keys = Vec::new();
        let cols = self.list("(", ")", |p| {
            let (c, _) = p.ident()?;
            p.expect_sym(":")?;
            let ty = p.type_name()?;
            Ok((Column { name: c, ty }, p.eat_kw("key")))
        })?;
        self.expect_sym(";")?;
        let mut seen = BTreeSet::new();
        for (i, (c, key)) in cols.iter().enumerate() {
            if !seen.insert(c.name.clone()) {
                return err(pos, format!("relation `{name}` repeats column `{}`", c.name));
            }
            if *key {
                keys.push(i);
            }
        }
        self.schema.add_relation(RelationSchema { name: name.clone(), columns: cols.into_iter().map(|(c, _)| c).collect() });
        if !keys.is_empty() {
            self.schema.constraints.push(Constraint::PrimaryKey { relation: name, cols: keys });
        }
        Ok(())
    }

    fn relation_ref(&mut self) -> PResult<(Name, RelationSchema)> {
        let (r, pos) = self.ident()?;
        match self.schema.relations.get(&r) {
            Some(s) => Ok((r, s.clone())),
            None => err(pos, format!("unknown relation `{r}`")),
        }
    }

    fn column_list(&mut self, rel: &RelationSchema) -> PResult<Vec<usize>> {
        self.list("(", ")", |p| {
            let (c, pos) = p.ident()?;
            rel.column_index(&c).ok_or_else(|| Diagnostic::new(pos, format!("relation `{}` has no column `{c}`", rel.name)))
        })
    }

    fn key(&mut self) -> PResult<()> {
        let (relation, rel) = self.relation_ref()?;
        let cols = self.column_list(&rel)?;
        self.expect_sym(";")?;
        self.schema.constraints.push(Constraint::PrimaryKey { relation, cols });
        Ok(())
    }

    fn foreign_key(&mut self) -> PResult<()> {
        self.expect_kw("key")?;
        let (from, from_rel) = self.relation_ref()?;
        let from_cols = self.column_list(&from_rel)?;
        self.expect_kw("references")?;
        let (to, to_rel) = self.relation_ref()?;
        let to_cols = self.column_list(&to_rel)?;
        self.expect_sym(";")?;
        self.schema.constraints.push(Constraint::ForeignKey { from, from_cols, to, to_cols });
        Ok(())
    }

    fn domain(&mut self) -> PResult<()> {
        let (relation, rel) = self.relation_ref()?;
        self.expect_sym("(")?;
        let (c, cpos) = self.ident()?;
        let col = rel.column_index(&c).ok_or_else(|| Diagnostic::new(cpos, format!("relation `{relation}` has no column `{c}`")))?;
        self.expect_sym(")")?;
        self.expect_kw("in")?;
        let ty = rel.columns[col].ty.clone();
        let allowed = self.value_set(&ty)?;
        self.expect_sym(";")?;
        self.schema.constraints.push(Constraint::Domain { relation, col, allowed });
        Ok(())
    }

    fn lit(&mut self) -> PResult<(Lit, Pos)> {
        match self.bump() {
            (Tok::Int(i), p) => Ok((Lit::Int(i), p)),
            (Tok::Real(r), p) => Ok((Lit::Real(r), p)),
            (Tok::Str(s), p) => Ok((Lit::Str(s), p)),
            (Tok::Ident(s), p) if s == "true" || s == "false" => Ok((Lit::Bool(s == "true"), p)),
            (Tok::Ident(s), p) if s == "null" => Ok((Lit::Null, p)),
            (t, p) => err(p, format!("expected a literal, found {t}")),
        }
    }

    fn value_set(&mut self, ty: &Name) -> PResult<Vec<Value>> {
        let lits = self.list("{", "}", Self::lit)?;
        lits.into_iter().map(|(l, p)| self.typed(&l, ty, p)).collect()
    }

    fn typed(&self, lit: &Lit, ty: &Name, pos: Pos) -> PResult<Value> {
        let Some(kind) = self.types.kind(ty) else { return err(pos, format!("unknown type `{ty}`")) };
        let payload = match (lit, kind) {
            (Lit::Null, _) => Payload::Null,
            (Lit::Int(i), DomainKind::Integer) => Payload::Int(*i),
            (Lit::Int(i), DomainKind::Real) => Payload::Real(Decimal::from(*i)),
            (Lit::Real(r), DomainKind::Real) => match Decimal::from_str(r) {
                Ok(d) => Payload::Real(d.normalize()),
                Err(_) => return err(pos, format!("malformed decimal `{r}`")),
            },
            (Lit::Str(s), DomainKind::Text) => Payload::Text(s.as_str().into()),
            (Lit::Bool(b), DomainKind::Boolean) => Payload::Bool(*b),
            (l, _) => return err(pos, format!("literal {} does not fit type `{ty}`", lit_text(l))),
        };
        Ok(Value { ty: ty.clone(), payload })
    }

    /// The type a literal has when nothing else constrains it.
    fn natural(lit: &Lit, pos: Pos) -> PResult<Name> {
        Ok(match lit {
            Lit::Int(_) => INT,
            Lit::Real(_) => REAL,
            Lit::Str(_) => STRING,
            Lit::Bool(_) => BOOL,
            Lit::Null => return err(pos, "cannot infer the type of `null` here"),
        }
        .into())
    }

    fn pterm(&mut self) -> PResult<PTerm> {
        match self.peek() {
            Tok::Ident(s) if !matches!(s.as_str(), "true" | "false" | "null") => {
                let (v, p) = self.ident()?;
                Ok(PTerm::Var(v, p))
            }
            _ => {
                let (l, p) = self.lit()?;
                Ok(PTerm::Lit(l, p))
            }
        }
    }

    fn term(&self, t: &PTerm, ty: Option<&Name>) -> PResult<Term> {
        match t {
            PTerm::Var(v, _) => Ok(Term::Var(v.clone())),
            PTerm::Lit(l, p) => {
                let ty = match ty {
                    Some(t) => t.clone(),
                    None => Self::natural(l, *p)?,
                };
                Ok(Term::Const(self.typed(l, &ty, *p)?))
            }
        }
    }

    /// Types literals against `types` positionally.
    fn terms(&self, ts: &[PTerm], types: &[Name], what: &str, pos: Pos) -> PResult<Vec<Term>> {
        if ts.len() != types.len() {
            return err(pos, format!("{what} expects {} arguments, found {}", types.len(), ts.len()));
        }
        ts.iter().zip(types).map(|(t, ty)| self.term(t, Some(ty))).collect()
    }

    fn typed_var(&mut self) -> PResult<(Name, Name)> {
        let (v, _) = self.ident()?;
        self.expect_sym(":")?;
        Ok((v, self.type_name()?))
    }

    fn comparison(&mut self) -> PResult<(Pred, bool, [PTerm; 2])> {
        if self.eat_kw("succ") {
            self.expect_sym("(")?;
            let a = self.pterm()?;
            self.expect_sym(",")?;
            let b = self.pterm()?;
            self.expect_sym(")")?;
            return Ok((Pred::Succ, false, [a, b]));
        }
        let a = self.pterm()?;
        let (op, pos) = match self.bump() {
            (Tok::Sym(s), p) => (s, p),
            (t, p) => return err(p, format!("expected a comparison operator, found {t}")),
        };
        let (pred, negated) = match op {
            "=" => (Pred::Eq, false),
            "!=" => (Pred::Eq, true),
            "<" => (Pred::Lt, false),
            "<=" => (Pred::Le, false),
            ">" => (Pred::Gt, false),
            ">=" => (Pred::Ge, false),
            _ => return err(pos, format!("expected a comparison operator, found `{op}`")),
        };
        let b = self.pterm()?;
        Ok((pred, negated, [a, b]))
    }

    fn typed_pair(&self, args: &[PTerm; 2], vars: &BTreeMap<Name, Name>) -> PResult<[Term; 2]> {
        let ty_of = |t: &PTerm| match t {
            PTerm::Var(v, _) => vars.get(v).cloned(),
            PTerm::Lit(..) => None,
        };
        let hint = ty_of(&args[0]).or_else(|| ty_of(&args[1]));
        let hint = match (&hint, &args[0], &args[1]) {
            (None, PTerm::Lit(l, p), _) if !matches!(l, Lit::Null) => Some(Self::natural(l, *p)?),
            (None, _, PTerm::Lit(l, p)) if !matches!(l, Lit::Null) => Some(Self::natural(l, *p)?),
            _ => hint,
        };
        Ok([self.term(&args[0], hint.as_ref())?, self.term(&args[1], hint.as_ref())?])
    }

    fn query(&mut self) -> PResult<()> {
        let (name, pos) = self.ident()?;
        self.declare("query", &name, pos)?;
        let free = self.list("(", ")", Self::typed_var)?;
        self.expect_sym(":=")?;
        let mut disjuncts = Vec::new();
        loop {
            disjuncts.push(self.conjunct(&free)?);
            if !self.eat_sym("|") {
                break;
            }
        }
        self.expect_sym(";")?;
        self.queries.insert(name.clone(), UcqQuery { name, free, disjuncts });
        Ok(())
    }

    fn conjunct(&mut self, free: &[(Name, Name)]) -> PResult<Conjunct> {
        let mut existential = if self.eat_kw("exists") { self.list("(", ")", Self::typed_var)? } else { vec![] };
        let mut atoms = Vec::new();
        let mut filters = Vec::new();
        loop {
            let pos = self.pos();
            let negated_atom = self.is_sym("!") && matches!(&self.toks[self.i + 1].0, Tok::Ident(r) if self.schema.relations.contains_key(r.as_str()));
            if negated_atom {
                return err(pos, "negated relation atoms are outside UCQ≠; only filters may be negated");
            }
            let is_atom = matches!(self.peek(), Tok::Ident(r) if self.schema.relations.contains_key(r.as_str()))
                && matches!(self.toks[self.i + 1].0, Tok::Sym("("));
            if is_atom {
                let (rel, _) = self.relation_ref()?;
                let terms = self.list("(", ")", Self::pterm)?;
                atoms.push((rel, pos, terms));
            } else if self.eat_sym("!") {
                let paren = !self.is_kw("succ");
                if paren {
                    self.expect_sym("(")?;
                }
                let (pred, neg, args) = self.comparison()?;
                if paren {
                    self.expect_sym(")")?;
                }
                filters.push((pred, !neg, args));
            } else if self.is_kw("succ") || !matches!(self.toks[self.i + 1].0, Tok::Sym("(")) {
                filters.push(self.comparison()?);
            } else {
                let (r, p) = self.ident()?;
                return err(p, format!("unknown relation `{r}`"));
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        let mut vars: BTreeMap<Name, Name> = free.iter().chain(&existential).cloned().collect();
        let mut typed_atoms = Vec::new();
        for (rel, pos, terms) in atoms {
            let types = self.schema.relations[&rel].column_types();
            for (t, ty) in terms.iter().zip(&types) {
                if let PTerm::Var(v, _) = t {
                    if !vars.contains_key(v) {
                        vars.insert(v.clone(), ty.clone());
                        existential.push((v.clone(), ty.clone()));
                    }
                }
            }
            typed_atoms.push(Atom { terms: self.terms(&terms, &types, &format!("relation `{rel}`"), pos)?, relation: rel });
        }
        let filters = filters
            .into_iter()
            .map(|(pred, negated, args)| {
                for a in &args {
                    if let PTerm::Var(v, p) = a {
                        if !vars.contains_key(v) {
                            return err(*p, format!("variable `{v}` occurs only in a filter"));
                        }
                    }
                }
                Ok(Literal { negated, pred, args: self.typed_pair(&args, &vars)? })
            })
            .collect::<PResult<Vec<_>>>()?;
        Ok(Conjunct { existential, atoms: typed_atoms, filters })
    }

    fn action(&mut self) -> PResult<()> {
        let (name, pos) = self.ident()?;
        self.declare("action", &name, pos)?;
        let params = self.list("(", ")", Self::typed_var)?;
        self.expect_sym("{")?;
        let (mut adds, mut dels) = (Vec::new(), Vec::new());
        while !self.eat_sym("}") {
            let (kw, kpos) = self.ident()?;
            let list = match &*kw {
                "add" => &mut adds,
                "del" => &mut dels,
                _ => return err(kpos, format!("expected `add` or `del`, found `{kw}`")),
            };
            let (rel, schema) = self.relation_ref()?;
            let pos = self.pos();
            let terms = self.list("(", ")", Self::pterm)?;
            self.expect_sym(";")?;
            list.push((rel, schema, pos, terms));
        }
        let build = |list: Vec<(Name, RelationSchema, Pos, Vec<PTerm>)>| -> PResult<Vec<FactTemplate>> {
            list.into_iter()
                .map(|(relation, schema, pos, terms)| {
                    let terms = self.terms(&terms, &schema.column_types(), &format!("relation `{relation}`"), pos)?;
                    Ok(FactTemplate { relation, terms })
                })
                .collect()
        };
        let adds = build(adds)?;
        let dels = build(dels)?;
        self.actions.insert(name.clone(), Action { name, params, adds, dels });
        Ok(())
    }

    fn color(&mut self) -> PResult<Vec<Name>> {
        self.list("(", ")", Self::type_name)
    }

    fn place(&mut self, kw_pos: Pos, is_view: bool) -> PResult<()> {
        let (name, pos) = self.ident()?;
        self.declare("place", &name, pos)?;
        self.expect_sym(":")?;
        let color = self.color()?;
        let kind = if is_view {
            self.expect_sym("=")?;
            let (q, qpos) = self.ident()?;
            if !self.queries.contains_key(&q) {
                return err(qpos, format!("unknown query `{q}`"));
            }
            PlaceKind::View { query: q }
        } else {
            PlaceKind::Control
        };
        self.expect_sym(";")?;
        self.places.push((Place { name, color, kind }, kw_pos));
        Ok(())
    }

    fn place_ref(&self, name: &Name, pos: Pos) -> PResult<&Place> {
        match self.places.iter().find(|(p, _)| p.name == *name) {
            Some((p, _)) => Ok(p),
            None => err(pos, format!("unknown place `{name}`")),
        }
    }

    fn arcs(&mut self) -> PResult<Vec<PArc>> {
        let mut out = Vec::new();
        loop {
            let (place, pos) = self.ident()?;
            self.place_ref(&place, pos)?;
            let terms = self.list("(", ")", Self::pterm)?;
            out.push(PArc { place, pos, terms });
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")?;
        Ok(out)
    }

    fn guard_unit(&mut self) -> PResult<PGuard> {
        if self.eat_kw("true") {
            return Ok(PGuard::True);
        }
        if self.eat_sym("!") {
            return Ok(PGuard::Not(Box::new(self.guard_unit()?)));
        }
        if self.eat_sym("(") {
            let g = self.guard()?;
            self.expect_sym(")")?;
            return Ok(g);
        }
        let (pred, negated, args) = self.comparison()?;
        let atom = PGuard::Atom(pred, args);
        Ok(if negated { PGuard::Not(Box::new(atom)) } else { atom })
    }

    fn guard(&mut self) -> PResult<PGuard> {
        let mut parts = vec![self.guard_unit()?];
        while self.eat_sym("&") {
            parts.push(self.guard_unit()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { PGuard::And(parts) })
    }

    fn elab_guard(&self, g: &PGuard, vars: &BTreeMap<Name, Name>) -> PResult<Guard> {
        Ok(match g {
            PGuard::True => Guard::True,
            PGuard::Atom(p, args) => Guard::Atom(*p, self.typed_pair(args, vars)?),
            PGuard::Not(g) => Guard::Not(Box::new(self.elab_guard(g, vars)?)),
            PGuard::And(gs) => Guard::And(gs.iter().map(|g| self.elab_guard(g, vars)).collect::<PResult<_>>()?),
        })
    }

    fn transition(&mut self) -> PResult<()> {
        let (name, pos) = self.ident()?;
        self.declare("transition", &name, pos)?;
        self.expect_sym("{")?;
        let mut pt = PTransition::default();
        while !self.eat_sym("}") {
            let (kw, kpos) = self.ident()?;
            match &*kw {
                "in" => pt.inputs.extend(self.arcs()?),
                "read" => pt.reads.extend(self.arcs()?),
                "out" => pt.outputs.extend(self.arcs()?),
                "rollback" if self.flavor == Flavor::DbNet => pt.rollbacks.extend(self.arcs()?),
                "fresh" => {
                    loop {
                        pt.fresh.insert(self.ident()?.0);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                    self.expect_sym(";")?;
                }
                "guard" => {
                    if pt.guard.is_some() {
                        return err(kpos, format!("transition `{name}` has two guards"));
                    }
                    pt.guard = Some(self.guard()?);
                    self.expect_sym(";")?;
                }
                "action" if self.flavor == Flavor::DbNet => {
                    let (a, apos) = self.ident()?;
                    if !self.actions.contains_key(&a) {
                        return err(apos, format!("unknown action `{a}`"));
                    }
                    if pt.action.is_some() {
                        return err(kpos, format!("transition `{name}` has two actions"));
                    }
                    let args = self.list("(", ")", Self::pterm)?;
                    self.expect_sym(";")?;
                    pt.action = Some((a, apos, args));
                }
                "priority" if self.flavor == Flavor::Cpn => {
                    let p = match self.bump() {
                        (Tok::Ident(s), p) => Priority::from_str(&s).map_err(|e| Diagnostic::new(p, e))?,
                        (Tok::Int(i), p) => Priority(i8::try_from(i).map_err(|_| Diagnostic::new(p, format!("priority {i} out of range")))?),
                        (t, p) => return err(p, format!("expected a priority, found {t}")),
                    };
                    self.expect_sym(";")?;
                    pt.priority = Some(p);
                }
                "rollback" | "action" => return err(kpos, format!("`{kw}` is only allowed in dbnet files")),
                "priority" => return err(kpos, "priorities are only allowed in cpn files"),
                _ => return err(kpos, format!("unknown transition statement `{kw}`")),
            }
        }
        let t = self.elab_transition(name, pt)?;
        self.transitions.push(t);
        Ok(())
    }

    fn elab_transition(&self, name: Name, pt: PTransition) -> PResult<(Transition, Option<Priority>)> {
        let mut vars: BTreeMap<Name, Name> = BTreeMap::new();
        for arc in pt.inputs.iter().chain(&pt.reads).chain(&pt.outputs).chain(&pt.rollbacks) {
            let color = &self.place_ref(&arc.place, arc.pos)?.color;
            for (t, ty) in arc.terms.iter().zip(color) {
                if let PTerm::Var(v, _) = t {
                    vars.entry(v.clone()).or_insert_with(|| ty.clone());
                }
            }
        }
        let action = match &pt.action {
            None => None,
            Some((a, pos, args)) => {
                let act = &self.actions[a];
                for ((_, ty), t) in act.params.iter().zip(args) {
                    if let PTerm::Var(v, _) = t {
                        vars.entry(v.clone()).or_insert_with(|| ty.clone());
                    }
                }
                let types: Vec<Name> = act.params.iter().map(|(_, t)| t.clone()).collect();
                Some(ActionBinding { action: a.clone(), args: self.terms(args, &types, &format!("action `{a}`"), *pos)? })
            }
        };
        let arcs = |list: &[PArc]| -> PResult<Vec<ArcInscription>> {
            list.iter()
                .map(|a| {
                    let color = &self.place_ref(&a.place, a.pos)?.color;
                    Ok(ArcInscription { place: a.place.clone(), terms: self.terms(&a.terms, color, &format!("place `{}`", a.place), a.pos)? })
                })
                .collect()
        };
        let guard = match &pt.guard {
            Some(g) => self.elab_guard(g, &vars)?,
            None => Guard::True,
        };
        let t = Transition {
            name,
            inputs: arcs(&pt.inputs)?,
            reads: arcs(&pt.reads)?,
            outputs: arcs(&pt.outputs)?,
            rollbacks: arcs(&pt.rollbacks)?,
            guard,
            action,
            fresh: pt.fresh,
        };
        Ok((t, pt.priority))
    }

    fn initial(&mut self) -> PResult<()> {
        self.expect_sym("{")?;
        while !self.eat_sym("}") {
            let (kw, kpos) = self.ident()?;
            match &*kw {
                "fact" if self.flavor == Flavor::DbNet => {
                    let (rel, schema) = self.relation_ref()?;
                    let pos = self.pos();
                    let lits = self.list("(", ")", Self::lit)?;
                    self.expect_sym(";")?;
                    let vals = self.tuple(&lits, &schema.column_types(), &format!("relation `{rel}`"), pos)?;
                    self.initial.instance.insert(&rel, vals);
                }
                "token" => {
                    let (place, ppos) = self.ident()?;
                    let p = self.place_ref(&place, ppos)?;
                    if matches!(p.kind, PlaceKind::View { .. }) {
                        return err(ppos, format!("view place `{place}` cannot hold initial tokens"));
                    }
                    let color = p.color.clone();
                    let lits = self.list("(", ")", Self::lit)?;
                    let n = if self.eat_sym("*") {
                        match self.bump() {
                            (Tok::Int(n), _) if n > 0 && n <= u32::MAX as i64 => n as u32,
                            (t, p) => return err(p, format!("expected a positive multiplicity, found {t}")),
                        }
                    } else {
                        1
                    };
                    self.expect_sym(";")?;
                    let vals = self.tuple(&lits, &color, &format!("place `{place}`"), ppos)?;
                    self.initial.marking.add(&place, vals, n);
                }
                _ => return err(kpos, format!("expected `fact` or `token`, found `{kw}`")),
            }
        }
        Ok(())
    }

    fn tuple(&self, lits: &[(Lit, Pos)], types: &[Name], what: &str, pos: Pos) -> PResult<Vec<Value>> {
        if lits.len() != types.len() {
            return err(pos, format!("{what} expects {} values, found {}", types.len(), lits.len()));
        }
        lits.iter().zip(types).map(|((l, p), ty)| self.typed(l, ty, *p)).collect()
    }

    fn policy(&mut self) -> PResult<()> {
        self.expect_sym("{")?;
        while !self.eat_sym("}") {
            let (kw, kpos) = self.ident()?;
            match &*kw {
                "fresh" => {
                    let (mode, mpos) = self.ident()?;
                    let text = if &*mode == "bounded" {
                        self.expect_sym(":")?;
                        match self.bump() {
                            (Tok::Int(k), _) => format!("bounded:{k}"),
                            (t, p) => return err(p, format!("expected a bound, found {t}")),
                        }
                    } else {
                        mode.to_string()
                    };
                    self.fresh.mode = FreshMode::from_str(&text).map_err(|e| Diagnostic::new(mpos, e))?;
                    self.expect_sym(";")?;
                }
                "sample" => {
                    let (scope, spos) = self.ident()?;
                    let (target, _) = self.ident()?;
                    let ty = match &*scope {
                        "type" => {
                            if self.types.get(&target).is_none() {
                                return err(spos, format!("unknown type `{target}`"));
                            }
                            target.clone()
                        }
                        "var" => {
                            self.expect_sym(":")?;
                            self.type_name()?
                        }
                        _ => return err(spos, format!("expected `var` or `type`, found `{scope}`")),
                    };
                    self.expect_sym("=")?;
                    let vals = self.value_set(&ty)?;
                    self.expect_sym(";")?;
                    let map = if &*scope == "type" { &mut self.samples.by_type } else { &mut self.samples.by_var };
                    map.insert(target, vals);
                }
                "reservoir" => {
                    let ty = self.type_name()?;
                    self.expect_sym("=")?;
                    let vals = self.value_set(&ty)?;
                    self.expect_sym(";")?;
                    self.fresh.reservoirs.insert(ty, vals);
                }
                _ => return err(kpos, format!("unknown policy statement `{kw}`")),
            }
        }
        Ok(())
    }

    fn finish(self, name: Name) -> PResult<Model> {
        match self.flavor {
            Flavor::DbNet => {
                let mut schema = self.schema;
                schema.types = self.types;
                Ok(Model::DbNet(DbNet {
                    name,
                    schema,
                    queries: self.queries,
                    actions: self.actions,
                    places: self.places.into_iter().map(|(p, _)| p).collect(),
                    transitions: self.transitions.into_iter().map(|(t, _)| t).collect(),
                    initial: self.initial,
                    samples: self.samples,
                    fresh: self.fresh,
                }))
            }
            Flavor::Cpn => Ok(Model::Cpn(NuCpn {
                name,
                types: self.types,
                places: self.places.into_iter().map(|(p, _)| CpnPlace { name: p.name, color: p.color }).collect(),
                transitions: self
                    .transitions
                    .into_iter()
                    .map(|(t, prio)| CpnTransition {
                        name: t.name,
                        guard: t.guard,
                        priority: prio.unwrap_or_default(),
                        inputs: t.inputs,
                        reads: t.reads,
                        outputs: t.outputs,
                        fresh: t.fresh,
                    })
                    .collect(),
                initial: self.initial.marking,
                samples: self.samples,
                fresh: self.fresh,
            })),
        }
    }
}

fn lit_text(l: &Lit) -> String {
    match l {
        Lit::Int(i) => i.to_string(),
        Lit::Real(r) => r.clone(),
        Lit::Str(s) => format!("{s:?}"),
        Lit::Bool(b) => b.to_string(),
        Lit::Null => "null".into(),
    }
}
