//! Multisets of typed tuples per place.

use std::collections::BTreeMap;

use itertools::Itertools;

use crate::term::{unify, Substitution, Term};
use crate::value::{Name, Value};

pub type Token = Vec<Value>;

/// Zero counts and empty places are never stored, so structural equality is marking equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking {
    places: BTreeMap<Name, BTreeMap<Token, u32>>,
}

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, place: &Name, token: Token, n: u32) {
        if n == 0 {
            return;
        }
        *self.places.entry(place.clone()).or_default().entry(token).or_insert(0) += n;
    }

    /// Removes one copy; false if absent.
    pub fn remove(&mut self, place: &str, token: &[Value]) -> bool {
        let Some(ms) = self.places.get_mut(place) else { return false };
        let Some(c) = ms.get_mut(token) else { return false };
        *c -= 1;
        if *c == 0 {
            ms.remove(token);
            if ms.is_empty() {
                self.places.remove(place);
            }
        }
        true
    }

    pub fn count(&self, place: &str, token: &[Value]) -> u32 {
        self.places.get(place).and_then(|m| m.get(token)).copied().unwrap_or(0)
    }

    /// Distinct tokens with multiplicities.
    pub fn tokens(&self, place: &str) -> impl Iterator<Item = (&Token, u32)> {
        self.places.get(place).into_iter().flatten().map(|(t, c)| (t, *c))
    }

    pub fn place_size(&self, place: &str) -> u32 {
        self.tokens(place).map(|(_, c)| c).sum()
    }

    pub fn is_marked(&self, place: &str) -> bool {
        self.places.contains_key(place)
    }

    pub fn places(&self) -> impl Iterator<Item = &Name> {
        self.places.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Name, &Token, u32)> {
        self.places.iter().flat_map(|(p, ms)| ms.iter().map(move |(t, c)| (p, t, *c)))
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        self.entries().flat_map(|(_, t, _)| t.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    pub fn retain_places(&mut self, keep: impl Fn(&Name) -> bool) {
        self.places.retain(|p, _| keep(p));
    }

    /// One `Place<v1,…>` line per token copy, sorted lexicographically.
    pub fn token_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .entries()
            .flat_map(|(p, t, c)| std::iter::repeat_n(token_line(p, t), c as usize))
            .collect();
        lines.sort();
        lines
    }
}

pub fn token_line(place: &str, token: &[Value]) -> String {
    format!("{place}<{}>", token.iter().join(","))
}

/// An arc between a place and a transition, inscribed with a tuple of terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ArcInscription {
    pub place: Name,
    pub terms: Vec<Term>,
}

impl ArcInscription {
    pub fn new(place: &str, terms: Vec<Term>) -> Self {
        ArcInscription { place: place.into(), terms }
    }
}

/// Extensions of `seed` under which every arc's inscription matches a distinct token copy.
pub fn match_consuming(arcs: &[ArcInscription], marking: &Marking, seed: &Substitution) -> Vec<Substitution> {
    fn go<'m>(
        arcs: &[ArcInscription],
        m: &'m Marking,
        taken: &mut Vec<(&'m Name, &'m Token)>,
        b: &Substitution,
        out: &mut Vec<Substitution>,
    ) {
        let Some((arc, rest)) = arcs.split_first() else {
            out.push(b.clone());
            return;
        };
        let Some((place, ms)) = m.places.get_key_value(&arc.place) else { return };
        for (tok, &c) in ms {
            let used = taken.iter().filter(|(p, t)| *p == place && *t == tok).count() as u32;
            if used >= c {
                continue;
            }
            if let Some(ext) = unify(&arc.terms, tok, b) {
                taken.push((place, tok));
                go(rest, m, taken, &ext, out);
                taken.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(arcs, marking, &mut Vec::new(), seed, &mut out);
    out
}

/// Extensions of `seed` under which every read inscription matches some token; nothing is reserved.
pub fn match_reading(arcs: &[ArcInscription], marking: &Marking, seeds: Vec<Substitution>) -> Vec<Substitution> {
    arcs.iter().fold(seeds, |acc, arc| {
        acc.iter()
            .flat_map(|b| marking.tokens(&arc.place).filter_map(move |(t, _)| unify(&arc.terms, t, b)))
            .collect()
    })
}
