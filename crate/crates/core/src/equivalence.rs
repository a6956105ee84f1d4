//! Content-aware weak bisimulation between a DB-net state space and the state space of its
//! translation.
//!
//! Both sides are first flattened: a DB-net snapshot and a stable translated marking (lock
//! present, no gadget place occupied) both become the pair of their fact lines and their
//! control-place token lines. Translated markings inside a gadget run are kept as distinct
//! interior nodes; their content key is the set of stable contents they can reach silently
//! without leaving the gadget, so an interior node may only be related to a state whose content
//! it is bound to reach.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::dbnet::{DbNet, Snapshot};
use crate::fresh::FreshPolicy;
use crate::lts::{Edge, Label, Limits, Lts, State};
use crate::marking::{token_line, Marking};
use crate::nucpn::PriorityAudit;
use crate::relational::{fact_line, Outcome};
use crate::translate::{translate_with, LabelRole, Mutation, PlaceClass, TranslateError, TranslationOutput};

/// Sorted fact lines (one per token copy) and sorted control token lines.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlatState {
    pub facts: Vec<String>,
    pub control: Vec<String>,
}

impl FlatState {
    pub fn canonical(&self) -> String {
        format!("{} | {}", self.facts.join(";"), self.control.join(";"))
    }

    pub fn of_snapshot(s: &Snapshot) -> FlatState {
        FlatState { facts: s.instance.fact_lines(), control: s.marking.token_lines() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FlatNode {
    pub state: FlatState,
    /// False for markings in the middle of a gadget run.
    pub stable: bool,
}

impl State for FlatNode {
    fn canonical(&self) -> String {
        if self.stable {
            self.state.canonical()
        } else {
            format!("~ {}", self.state.canonical())
        }
    }
}

/// A relabeled edge before outcome resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlatLabel {
    Silent,
    /// Silent, but ends a gadget run with the given outcome.
    Terminal(Outcome),
    Observable(Label),
}

/// How to read one kind of state space in flat terms.
pub trait Projection<S> {
    fn node(&self, s: &S) -> FlatNode;
    fn label(&self, l: &Label) -> FlatLabel;
}

pub struct SnapshotProjection;

impl Projection<Snapshot> for SnapshotProjection {
    fn node(&self, s: &Snapshot) -> FlatNode {
        FlatNode { state: FlatState::of_snapshot(s), stable: true }
    }

    fn label(&self, l: &Label) -> FlatLabel {
        match l {
            Label::Silent => FlatLabel::Silent,
            l => FlatLabel::Observable(l.clone()),
        }
    }
}

/// Already flat; flattening again changes nothing.
pub struct FlatIdentity;

impl Projection<FlatNode> for FlatIdentity {
    fn node(&self, s: &FlatNode) -> FlatNode {
        s.clone()
    }

    fn label(&self, l: &Label) -> FlatLabel {
        SnapshotProjection.label(l)
    }
}

impl Projection<Marking> for TranslationOutput {
    fn node(&self, m: &Marking) -> FlatNode {
        let mut facts = Vec::new();
        let mut control = Vec::new();
        for (p, tok, c) in m.entries() {
            match self.class(p) {
                Some(PlaceClass::Relation) => {
                    let rel = &p[crate::translate::RELATION_PREFIX.len()..];
                    facts.extend(std::iter::repeat_n(fact_line(rel, tok), c as usize));
                }
                Some(PlaceClass::Control) => control.extend(std::iter::repeat_n(token_line(p, tok), c as usize)),
                _ => {}
            }
        }
        facts.sort();
        control.sort();
        FlatNode { state: FlatState { facts, control }, stable: self.is_stable(m) }
    }

    fn label(&self, l: &Label) -> FlatLabel {
        let Label::Fire { transition, binding, .. } = l else { return FlatLabel::Silent };
        match self.label_map.get(transition) {
            Some(LabelRole::Observable { source, carried }) => FlatLabel::Observable(Label::Fire {
                transition: source.clone(),
                binding: binding.restrict(carried),
                outcome: None,
            }),
            _ if transition.ends_with(".commit") => FlatLabel::Terminal(Outcome::Commit),
            _ if transition.ends_with(".rollback") => FlatLabel::Terminal(Outcome::Rollback),
            _ => FlatLabel::Silent,
        }
    }
}

/// Projects states, relabels edges and resolves each observable step's outcome by looking ahead
/// along the silent continuation to the terminal step of the same gadget run.
pub fn flatten<S, P: Projection<S>>(lts: &Lts<S>, p: &P) -> Lts<FlatNode> {
    let nodes: Vec<FlatNode> = lts.states.iter().map(|s| p.node(s)).collect();
    let labels: Vec<FlatLabel> = lts.edges.iter().map(|e| p.label(&e.label)).collect();
    let adj = lts.adjacency();
    let mut memo: HashMap<u32, Option<Outcome>> = HashMap::new();
    let mut resolve = |start: u32| -> Option<Outcome> {
        *memo.entry(start).or_insert_with(|| {
            let mut outcomes = BTreeSet::new();
            let mut seen = BTreeSet::from([start]);
            let mut queue = VecDeque::from([start]);
            while let Some(s) = queue.pop_front() {
                if nodes[s as usize].stable {
                    continue;
                }
                for &ei in &adj[s as usize] {
                    match &labels[ei] {
                        FlatLabel::Terminal(o) => {
                            outcomes.insert(*o);
                        }
                        FlatLabel::Silent => {
                            let d = lts.edges[ei].dst;
                            if seen.insert(d) {
                                queue.push_back(d);
                            }
                        }
                        FlatLabel::Observable(_) => {}
                    }
                }
            }
            if outcomes.len() == 1 {
                outcomes.pop_first()
            } else {
                None
            }
        })
    };
    let edges = lts
        .edges
        .iter()
        .zip(&labels)
        .map(|(e, l)| {
            let label = match l {
                FlatLabel::Silent | FlatLabel::Terminal(_) => Label::Silent,
                FlatLabel::Observable(Label::Fire { transition, binding, outcome: None }) => Label::Fire {
                    transition: transition.clone(),
                    binding: binding.clone(),
                    outcome: resolve(e.dst),
                },
                FlatLabel::Observable(l) => l.clone(),
            };
            Edge { src: e.src, label, dst: e.dst }
        })
        .collect();
    Lts { states: nodes, initial: lts.initial, edges, truncated: lts.truncated }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EquivError {
    #[error("the {0} state space was truncated by an exploration limit; refusing to compare partial state spaces")]
    Truncated(&'static str),
    #[error("translation failed: {0}")]
    Translate(String),
}

impl From<TranslateError> for EquivError {
    fn from(e: TranslateError) -> Self {
        EquivError::Translate(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Bisimilar,
    NotBisimilar,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Bisimilar => "bisimilar",
            Verdict::NotBisimilar => "not-bisimilar",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// One challenge: `challenger` makes a weak move that the other side answers as well as it can.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessStep {
    pub challenger: Side,
    pub label: Label,
    /// Path of the challenger, as (label, state) pairs after its starting state.
    pub challenge: Vec<(Label, u32)>,
    /// The best answering path, if any answer with the same visible label exists.
    pub answer: Option<Vec<(Label, u32)>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    /// The pair at which the first distinguishing challenge starts.
    pub left: u32,
    pub right: u32,
    pub steps: Vec<WitnessStep>,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct WeakBisimResult {
    pub verdict: Verdict,
    /// Final block per state: left states first, then right states.
    pub blocks: Vec<u32>,
    pub num_blocks: usize,
    pub iterations: usize,
    pub left_states: usize,
    pub witness: Option<Witness>,
}

impl WeakBisimResult {
    pub fn block_left(&self, s: u32) -> u32 {
        self.blocks[s as usize]
    }

    pub fn block_right(&self, s: u32) -> u32 {
        self.blocks[self.left_states + s as usize]
    }

    /// Cross pairs in the computed relation.
    pub fn related(&self, l: u32, r: u32) -> bool {
        self.block_left(l) == self.block_right(r)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum ContentKey {
    Content(String),
    Stuck,
    Ambiguous(Vec<String>),
}

/// Disjoint union of the two flat state spaces with interned labels (0 is silent).
struct Union {
    n_left: usize,
    n: usize,
    out: Vec<Vec<(u32, u32)>>,
    labels: Vec<Label>,
    keys: Vec<ContentKey>,
}

impl Union {
    fn new(l: &Lts<FlatNode>, r: &Lts<FlatNode>) -> Union {
        let n_left = l.num_states();
        let n = n_left + r.num_states();
        let mut out = vec![Vec::new(); n];
        let mut labels = vec![Label::Silent];
        let mut ids: HashMap<Label, u32> = HashMap::from([(Label::Silent, 0)]);
        for (offset, lts) in [(0, l), (n_left, r)] {
            for e in &lts.edges {
                let id = *ids.entry(e.label.clone()).or_insert_with(|| {
                    labels.push(e.label.clone());
                    labels.len() as u32 - 1
                });
                out[offset + e.src as usize].push((id, (offset + e.dst as usize) as u32));
            }
        }
        for v in &mut out {
            v.sort_unstable();
            v.dedup();
        }
        let mut u = Union { n_left, n, out, labels, keys: vec![] };
        let nodes: Vec<&FlatNode> = l.states.iter().chain(&r.states).collect();
        u.keys = u.content_keys(&nodes);
        u
    }

    fn silent(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[s].iter().filter(|(l, _)| *l == 0).map(|(_, d)| *d as usize)
    }

    fn content_keys(&self, nodes: &[&FlatNode]) -> Vec<ContentKey> {
        let mut memo: Vec<Option<ContentKey>> = vec![None; self.n];
        for s in 0..self.n {
            if nodes[s].stable {
                memo[s] = Some(ContentKey::Content(nodes[s].state.canonical()));
                continue;
            }
            let mut reach = BTreeSet::new();
            let mut seen = BTreeSet::from([s]);
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for d in self.silent(x) {
                    if nodes[d].stable {
                        reach.insert(nodes[d].state.canonical());
                    } else if seen.insert(d) {
                        queue.push_back(d);
                    }
                }
            }
            memo[s] = Some(match reach.len() {
                0 => ContentKey::Stuck,
                1 => ContentKey::Content(reach.pop_first().unwrap()),
                _ => ContentKey::Ambiguous(reach.into_iter().collect()),
            });
        }
        memo.into_iter().map(Option::unwrap).collect()
    }

    /// Strongly connected components of the silent subgraph, sinks first.
    fn silent_sccs(&self) -> (Vec<u32>, Vec<Vec<usize>>) {
        let n = self.n;
        let mut index = vec![u32::MAX; n];
        let mut low = vec![0u32; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comp = vec![u32::MAX; n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut counter = 0u32;
        let succ: Vec<Vec<usize>> = (0..n).map(|s| self.silent(s).collect()).collect();
        for root in 0..n {
            if index[root] != u32::MAX {
                continue;
            }
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut i)) = call.last_mut() {
                if *i < succ[v].len() {
                    let w = succ[v][*i];
                    *i += 1;
                    if index[w] == u32::MAX {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let id = comps.len() as u32;
                        let mut members = Vec::new();
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w] = false;
                            comp[w] = id;
                            members.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comps.push(members);
                    }
                }
            }
        }
        (comp, comps)
    }
}

type Signature = (u32, Vec<u32>, Vec<(u32, u32)>);

/// Refines the content partition until stable. Returns the block history, one vector per round.
fn refine(u: &Union) -> Vec<Vec<u32>> {
    let (comp, comps) = u.silent_sccs();
    let mut key_ids: HashMap<&ContentKey, u32> = HashMap::new();
    let initial: Vec<u32> = u
        .keys
        .iter()
        .map(|k| {
            let next = key_ids.len() as u32;
            *key_ids.entry(k).or_insert(next)
        })
        .collect();
    let mut history = vec![initial];
    loop {
        let block = history.last().unwrap();
        // silent closure blocks per component; components arrive sinks first
        let mut eps: Vec<Vec<u32>> = vec![Vec::new(); comps.len()];
        for (c, members) in comps.iter().enumerate() {
            let mut set: BTreeSet<u32> = members.iter().map(|&s| block[s]).collect();
            for &s in members {
                for d in u.silent(s) {
                    let dc = comp[d] as usize;
                    if dc != c {
                        set.extend(eps[dc].iter().copied());
                    }
                }
            }
            eps[c] = set.into_iter().collect();
        }
        let mut weak: Vec<Vec<(u32, u32)>> = vec![Vec::new(); comps.len()];
        for (c, members) in comps.iter().enumerate() {
            let mut set: BTreeSet<(u32, u32)> = BTreeSet::new();
            for &s in members {
                for &(l, d) in &u.out[s] {
                    let dc = comp[d as usize] as usize;
                    if l != 0 {
                        set.extend(eps[dc].iter().map(|&b| (l, b)));
                    } else if dc != c {
                        set.extend(weak[dc].iter().copied());
                    }
                }
            }
            weak[c] = set.into_iter().collect();
        }
        let mut ids: HashMap<Signature, u32> = HashMap::new();
        let next: Vec<u32> = (0..u.n)
            .map(|s| {
                let c = comp[s] as usize;
                let sig = (block[s], eps[c].clone(), weak[c].clone());
                let fresh = ids.len() as u32;
                *ids.entry(sig).or_insert(fresh)
            })
            .collect();
        let before = block.iter().collect::<BTreeSet<_>>().len();
        let stable = ids.len() == before;
        history.push(next);
        log::debug!("refinement round {}: {} blocks", history.len() - 1, ids.len());
        if stable {
            return history;
        }
    }
}

/// `(label, target, path)`; the path lists `(label, state)` steps from the source.
type WeakMove = (u32, usize, Vec<(u32, usize)>);

/// All weak moves from `s`: for the silent label, the reflexive silent closure; for a visible
/// label `a`, silent* a silent*. Each target comes with one witnessing path.
fn weak_moves(u: &Union, s: usize) -> Vec<WeakMove> {
    let closure = |start: usize, prefix: Vec<(u32, usize)>| -> Vec<(usize, Vec<(u32, usize)>)> {
        let mut out = vec![(start, prefix)];
        let mut seen = BTreeSet::from([start]);
        let mut i = 0;
        while i < out.len() {
            let (x, path) = out[i].clone();
            for d in u.silent(x) {
                if seen.insert(d) {
                    let mut p = path.clone();
                    p.push((0, d));
                    out.push((d, p));
                }
            }
            i += 1;
        }
        out
    };
    let pre = closure(s, vec![]);
    let mut moves: Vec<WeakMove> = pre.iter().map(|(d, p)| (0, *d, p.clone())).collect();
    let mut seen: BTreeSet<(u32, usize)> = BTreeSet::new();
    for (x, path) in &pre {
        for &(l, d) in &u.out[*x] {
            if l == 0 {
                continue;
            }
            let mut p = path.clone();
            p.push((l, d as usize));
            for (y, q) in closure(d as usize, p) {
                if seen.insert((l, y)) {
                    moves.push((l, y, q));
                }
            }
        }
    }
    moves
}

fn split_round(history: &[Vec<u32>], a: usize, b: usize) -> Option<usize> {
    history.iter().position(|h| h[a] != h[b])
}

fn explain(u: &Union, history: &[Vec<u32>], left: usize, right: usize) -> Witness {
    let mut steps = Vec::new();
    let (mut p, mut q) = (left, right);
    let side_of = |s: usize| if s < u.n_left { Side::Left } else { Side::Right };
    let local = |s: usize| if s < u.n_left { s as u32 } else { (s - u.n_left) as u32 };
    let to_path = |path: &[(u32, usize)]| path.iter().map(|&(l, d)| (u.labels[l as usize].clone(), local(d))).collect::<Vec<_>>();
    loop {
        let Some(k) = split_round(history, p, q) else {
            return Witness { left: local(left), right: local(right), steps, reason: "states are related".into() };
        };
        if k == 0 {
            let reason = format!("content differs: {:?} vs {:?}", u.keys[p], u.keys[q]);
            return Witness { left: local(left), right: local(right), steps, reason };
        }
        let prev = &history[k - 1];
        let moves_p = weak_moves(u, p);
        let moves_q = weak_moves(u, q);
        let caps = |moves: &[WeakMove]| -> BTreeSet<(u32, u32)> {
            moves.iter().map(|(l, d, _)| (*l, prev[*d])).collect()
        };
        let (cp, cq) = (caps(&moves_p), caps(&moves_q));
        // the challenger is whichever side has a move the other cannot answer at round k-1
        let (chal, resp, chal_moves, resp_moves, missing) = match cp.difference(&cq).next() {
            Some(&m) => (p, q, moves_p, moves_q, m),
            None => {
                let m = *cq.difference(&cp).next().expect("split rounds differ in signature");
                (q, p, moves_q, moves_p, m)
            }
        };
        let (label, target_block) = missing;
        let (_, target, path) = chal_moves.iter().find(|(l, d, _)| *l == label && prev[*d] == target_block).unwrap().clone();
        let answer = resp_moves
            .iter()
            .filter(|(l, _, _)| *l == label)
            .max_by_key(|(_, d, _)| split_round(history, target, *d).unwrap_or(usize::MAX))
            .cloned();
        steps.push(WitnessStep {
            challenger: side_of(chal),
            label: u.labels[label as usize].clone(),
            challenge: to_path(&path),
            answer: answer.as_ref().map(|(_, _, p)| to_path(p)),
        });
        match answer {
            None => {
                let reason = format!("{:?} side cannot answer `{}`", side_of(resp), u.labels[label as usize]);
                return Witness { left: local(left), right: local(right), steps, reason };
            }
            Some((_, d, _)) => {
                p = target;
                q = d;
            }
        }
    }
}

/// Partition refinement over the disjoint union; refuses truncated input.
pub fn check_weak_bisim(l: &Lts<FlatNode>, r: &Lts<FlatNode>) -> Result<WeakBisimResult, EquivError> {
    if l.truncated {
        return Err(EquivError::Truncated("left"));
    }
    if r.truncated {
        return Err(EquivError::Truncated("right"));
    }
    let u = Union::new(l, r);
    let history = refine(&u);
    let blocks = history.last().unwrap().clone();
    let (a, b) = (l.initial as usize, u.n_left + r.initial as usize);
    let verdict = if blocks[a] == blocks[b] { Verdict::Bisimilar } else { Verdict::NotBisimilar };
    let witness = (verdict == Verdict::NotBisimilar).then(|| explain(&u, &history, a, b));
    Ok(WeakBisimResult {
        verdict,
        num_blocks: blocks.iter().collect::<BTreeSet<_>>().len(),
        blocks,
        iterations: history.len() - 1,
        left_states: u.n_left,
        witness,
    })
}

/// Checks both transfer conditions for every related cross pair directly: each strong step of
/// one side is answered by a weak step of the other into a related state.
pub fn verify_relation(l: &Lts<FlatNode>, r: &Lts<FlatNode>, res: &WeakBisimResult) -> Result<(), String> {
    let u = Union::new(l, r);
    let block = &res.blocks;
    if res.verdict == Verdict::Bisimilar && block[l.initial as usize] != block[u.n_left + r.initial as usize] {
        return Err("initial states are not related".into());
    }
    let mut members: HashMap<u32, (Vec<usize>, Vec<usize>)> = HashMap::new();
    for (s, &b) in block.iter().enumerate().take(u.n) {
        let e = members.entry(b).or_default();
        if s < u.n_left {
            e.0.push(s);
        } else {
            e.1.push(s);
        }
    }
    let requirements = |s: usize| -> BTreeSet<(u32, u32)> { u.out[s].iter().map(|&(l, d)| (l, block[d as usize])).collect() };
    let capability = |s: usize| -> BTreeSet<(u32, u32)> { weak_moves(&u, s).into_iter().map(|(l, d, _)| (l, block[d])).collect() };
    let mut blocks: Vec<_> = members.into_iter().collect();
    blocks.sort_by_key(|(b, _)| *b);
    for (b, (left, right)) in blocks {
        if left.is_empty() || right.is_empty() {
            continue;
        }
        for (side, other) in [(&left, &right), (&right, &left)] {
            if let Some(key) = side.iter().chain(other.iter()).map(|&s| &u.keys[s]).find(|k| **k != u.keys[side[0]]) {
                return Err(format!("block {b} mixes contents {key:?} and {:?}", u.keys[side[0]]));
            }
            let need: BTreeSet<(u32, u32)> = side.iter().flat_map(|&s| requirements(s)).collect();
            for &q in other.iter() {
                let cap = capability(q);
                if let Some((lab, target)) = need.difference(&cap).next() {
                    return Err(format!("state {q} of block {b} cannot answer `{}` into block {target}", u.labels[*lab as usize]));
                }
            }
        }
    }
    Ok(())
}

/// Counterexample trace: the challenge/answer paths from the initial pair to the witness.
pub fn render_witness(w: &Witness, l: &Lts<FlatNode>, r: &Lts<FlatNode>) -> String {
    let state = |side: Side, s: u32| match side {
        Side::Left => format!("left  {}", l.states[s as usize].canonical()),
        Side::Right => format!("right {}", r.states[s as usize].canonical()),
    };
    let other = |s: Side| if s == Side::Left { Side::Right } else { Side::Left };
    let mut out = String::new();
    out.push_str(&format!("PAIR\n  {}\n  {}\n", state(Side::Left, w.left), state(Side::Right, w.right)));
    for (i, step) in w.steps.iter().enumerate() {
        out.push_str(&format!("STEP {} {:?} challenges with {}\n", i + 1, step.challenger, step.label));
        for (lab, s) in &step.challenge {
            out.push_str(&format!("  -- {lab} -->\n  {}\n", state(step.challenger, *s)));
        }
        match &step.answer {
            None => out.push_str("  no answer\n"),
            Some(path) => {
                out.push_str("  answered by\n");
                for (lab, s) in path {
                    out.push_str(&format!("  -- {lab} -->\n  {}\n", state(other(step.challenger), *s)));
                }
            }
        }
    }
    out.push_str(&format!("REASON {}\n", w.reason));
    out
}

/// Sound refutation on an explored prefix of `r`: a reachable stable state of `r` whose content
/// occurs nowhere in the complete `l` has no possible partner. Only needs `l` to be complete.
pub fn refute_by_content(l: &Lts<FlatNode>, r: &Lts<FlatNode>) -> Option<Witness> {
    let contents: BTreeSet<String> = l.states.iter().map(|n| n.state.canonical()).collect();
    let adj = r.adjacency();
    let mut parent: Vec<Option<usize>> = vec![None; r.num_states()];
    let mut seen = vec![false; r.num_states()];
    seen[r.initial as usize] = true;
    let mut queue = VecDeque::from([r.initial]);
    while let Some(s) = queue.pop_front() {
        let node = &r.states[s as usize];
        if node.stable && !contents.contains(&node.state.canonical()) {
            let mut path = Vec::new();
            let mut x = s;
            while let Some(ei) = parent[x as usize] {
                let e = &r.edges[ei];
                path.push((e.label.clone(), e.dst));
                x = e.src;
            }
            path.reverse();
            let label = path.iter().rev().map(|(l, _)| l).find(|l| !l.is_silent()).cloned().unwrap_or(Label::Silent);
            return Some(Witness {
                left: l.initial,
                right: r.initial,
                steps: vec![WitnessStep { challenger: Side::Right, label, challenge: path, answer: None }],
                reason: "reachable stable content with no counterpart on the left".into(),
            });
        }
        for &ei in &adj[s as usize] {
            let d = r.edges[ei].dst;
            if !seen[d as usize] {
                seen[d as usize] = true;
                parent[d as usize] = Some(ei);
                queue.push_back(d);
            }
        }
    }
    None
}

/// Everything produced by one certification run.
pub struct Certification {
    pub result: WeakBisimResult,
    pub translation: TranslationOutput,
    pub db_lts: Lts<Snapshot>,
    pub cpn_lts: Lts<Marking>,
    pub db_flat: Lts<FlatNode>,
    pub cpn_flat: Lts<FlatNode>,
    pub audit: PriorityAudit,
    /// Outcome of the independent transfer-condition check; only run on a positive verdict.
    pub verified: Option<Result<(), String>>,
    /// The translated side was truncated and the negative verdict comes from `refute_by_content`.
    pub refuted_on_prefix: bool,
}

pub fn certify_translation(net: &DbNet, s0: &Snapshot, fp: &FreshPolicy, limits: &Limits) -> Result<Certification, EquivError> {
    certify_with(net, s0, fp, limits, None)
}

pub fn certify_with(
    net: &DbNet,
    s0: &Snapshot,
    fp: &FreshPolicy,
    limits: &Limits,
    mutation: Option<Mutation>,
) -> Result<Certification, EquivError> {
    let translation = translate_with(net, s0, mutation)?;
    let (db_lts, explored) = rayon::join(|| net.build_lts(s0, fp, limits), || translation.net.cpn_build_lts(fp, limits));
    if db_lts.truncated {
        return Err(EquivError::Truncated("DB-net"));
    }
    log::info!("DB-net: {} states; translated net: {} states", db_lts.num_states(), explored.lts.num_states());
    let db_flat = flatten(&db_lts, &SnapshotProjection);
    let cpn_flat = flatten(&explored.lts, &translation);
    let refuted_on_prefix = explored.lts.truncated;
    let result = if refuted_on_prefix {
        let witness = refute_by_content(&db_flat, &cpn_flat).ok_or(EquivError::Truncated("translated net"))?;
        WeakBisimResult {
            verdict: Verdict::NotBisimilar,
            blocks: vec![],
            num_blocks: 0,
            iterations: 0,
            left_states: db_flat.num_states(),
            witness: Some(witness),
        }
    } else {
        check_weak_bisim(&db_flat, &cpn_flat)?
    };
    let verified = (result.verdict == Verdict::Bisimilar).then(|| verify_relation(&db_flat, &cpn_flat, &result));
    Ok(Certification {
        result,
        translation,
        db_lts,
        cpn_lts: explored.lts,
        db_flat,
        cpn_flat,
        audit: explored.audit,
        verified,
        refuted_on_prefix,
    })
}

#[cfg(test)]
mod tests;
