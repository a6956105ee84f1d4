//! Labeled transition systems and breadth-first state-space exploration.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::relational::Outcome;
use crate::term::Substitution;
use crate::value::Name;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Silent,
    /// `outcome` is `None` for raw net firings that carry no transactional result.
    Fire { transition: Name, binding: Substitution, outcome: Option<Outcome> },
}

impl Label {
    pub fn is_silent(&self) -> bool {
        matches!(self, Label::Silent)
    }

    pub fn transition(&self) -> Option<&Name> {
        match self {
            Label::Silent => None,
            Label::Fire { transition, .. } => Some(transition),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Silent => f.write_str("tau"),
            Label::Fire { transition, binding, outcome } => {
                write!(f, "{transition}{binding}")?;
                match outcome {
                    Some(o) => write!(f, ":{o}"),
                    None => Ok(()),
                }
            }
        }
    }
}

/// States are identified by a canonical text form; equal states serialize identically.
pub trait State: Clone + Eq + Hash + Send + Sync {
    fn canonical(&self) -> String;
}

pub fn state_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: u32,
    pub label: Label,
    pub dst: u32,
}

#[derive(Clone, Debug)]
pub struct Lts<S> {
    pub states: Vec<S>,
    pub initial: u32,
    pub edges: Vec<Edge>,
    /// Some state was left unexpanded or some successor dropped because of a limit.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_states: usize,
    pub max_depth: usize,
    pub jobs: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_states: 200_000, max_depth: usize::MAX, jobs: 1 }
    }
}

impl<S> Lts<S> {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Outgoing edge indices per state.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.states.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.src as usize].push(i);
        }
        adj
    }

    pub fn map_states<T>(&self, f: impl Fn(&S) -> T) -> Lts<T> {
        Lts { states: self.states.iter().map(f).collect(), initial: self.initial, edges: self.edges.clone(), truncated: self.truncated }
    }
}

impl<S: State> Lts<S> {
    /// `INIT`, then `STATE <hash> <content>` in discovery order, then `EDGE <hash> <label> <hash>`.
    pub fn to_canonical_text(&self) -> String {
        let canon: Vec<String> = self.states.iter().map(State::canonical).collect();
        let hashes: Vec<String> = canon.iter().map(|c| state_hash(c)).collect();
        let mut out = String::new();
        out.push_str(&format!("INIT {}\n", hashes[self.initial as usize]));
        for (h, c) in hashes.iter().zip(&canon) {
            out.push_str(&format!("STATE {h} {c}\n"));
        }
        for e in &self.edges {
            out.push_str(&format!("EDGE {} {} {}\n", hashes[e.src as usize], e.label, hashes[e.dst as usize]));
        }
        if self.truncated {
            out.push_str("TRUNCATED\n");
        }
        out
    }
}

fn quick_hash<S: Hash>(s: &S) -> u64 {
    let mut h = DefaultHasher::new();
    s.hash(&mut h);
    h.finish()
}

/// Level-synchronous BFS. Successor computation runs on `limits.jobs` threads; insertion is
/// sequential in frontier order, so state numbering is independent of the thread count.
pub fn explore<S, F>(initial: S, limits: &Limits, succ: F) -> Lts<S>
where
    S: State,
    F: Fn(&S) -> Vec<(Label, S)> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(limits.jobs.max(1)).build().expect("thread pool");
    let mut states = vec![initial.clone()];
    let mut index: HashMap<u64, Vec<u32>> = HashMap::new();
    index.entry(quick_hash(&initial)).or_default().push(0);
    let mut edges = Vec::new();
    let mut truncated = false;
    let mut frontier: Vec<u32> = vec![0];
    let mut depth = 0usize;
    while !frontier.is_empty() {
        let expanded: Vec<Vec<(Label, S)>> = if limits.jobs > 1 {
            pool.install(|| frontier.par_iter().map(|&i| succ(&states[i as usize])).collect())
        } else {
            frontier.iter().map(|&i| succ(&states[i as usize])).collect()
        };
        if depth >= limits.max_depth {
            truncated |= expanded.iter().any(|v| !v.is_empty());
            break;
        }
        let mut next = Vec::new();
        for (&src, succs) in frontier.iter().zip(expanded) {
            for (label, s) in succs {
                let h = quick_hash(&s);
                let found = index.get(&h).and_then(|b| b.iter().copied().find(|&j| states[j as usize] == s));
                let dst = match found {
                    Some(j) => j,
                    None => {
                        if states.len() >= limits.max_states {
                            truncated = true;
                            continue;
                        }
                        let j = states.len() as u32;
                        states.push(s);
                        index.entry(h).or_default().push(j);
                        next.push(j);
                        j
                    }
                };
                edges.push(Edge { src, label, dst });
            }
        }
        log::debug!("depth {depth}: {} states, {} edges, frontier {}", states.len(), edges.len(), next.len());
        frontier = next;
        depth += 1;
    }
    if truncated {
        log::warn!("exploration truncated at {} states (depth {depth})", states.len());
    }
    Lts { states, initial: 0, edges, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, PartialEq, Eq, Hash, Debug)]
    struct Counter(u32);

    impl State for Counter {
        fn canonical(&self) -> String {
            self.0.to_string()
        }
    }

    fn step(c: &Counter) -> Vec<(Label, Counter)> {
        if c.0 < 5 {
            vec![(Label::Silent, Counter(c.0 + 1)), (Label::Silent, Counter(0))]
        } else {
            vec![]
        }
    }

    #[test]
    fn explores_all_states() {
        let l = explore(Counter(0), &Limits::default(), step);
        assert_eq!(l.num_states(), 6);
        assert_eq!(l.num_edges(), 10);
        assert!(!l.truncated);
    }

    #[test]
    fn limits_flag_truncation() {
        let l = explore(Counter(0), &Limits { max_states: 3, ..Limits::default() }, step);
        assert_eq!(l.num_states(), 3);
        assert!(l.truncated);
        let d = explore(Counter(0), &Limits { max_depth: 2, ..Limits::default() }, step);
        assert_eq!(d.num_states(), 3);
        assert!(d.truncated);
    }

    #[test]
    fn parallel_expansion_is_deterministic() {
        let a = explore(Counter(0), &Limits::default(), step);
        let b = explore(Counter(0), &Limits { jobs: 4, ..Limits::default() }, step);
        assert_eq!(a.to_canonical_text(), b.to_canonical_text());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(state_hash("x"), state_hash("x"));
        assert_eq!(state_hash("").len(), 16);
    }
}
