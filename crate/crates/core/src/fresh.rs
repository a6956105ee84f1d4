//! Fresh-value provisioning for ν-variables and finite sample domains for external variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rust_decimal::Decimal;

use crate::term::Substitution;
use crate::value::{DomainKind, Name, Payload, TypeDomain, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FreshMode {
    /// Next value past the highest reservoir index present in the state.
    Unbounded,
    /// Any of the first `k` reservoir values absent from the state.
    Bounded(usize),
    /// The least reservoir values absent from the state.
    Recycling,
}

impl fmt::Display for FreshMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FreshMode::Unbounded => f.write_str("unbounded"),
            FreshMode::Bounded(k) => write!(f, "bounded:{k}"),
            FreshMode::Recycling => f.write_str("recycling"),
        }
    }
}

impl FromStr for FreshMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unbounded" => Ok(FreshMode::Unbounded),
            "recycling" => Ok(FreshMode::Recycling),
            _ => s
                .strip_prefix("bounded:")
                .and_then(|k| k.parse().ok())
                .map(FreshMode::Bounded)
                .ok_or_else(|| format!("expected unbounded, recycling or bounded:<k>, got `{s}`")),
        }
    }
}

/// Shared by both sides of a certification run so that fresh values in labels coincide.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreshPolicy {
    pub mode: FreshMode,
    /// Explicit per-type reservoirs; types without one use a generated sequence.
    pub reservoirs: BTreeMap<Name, Vec<Value>>,
}

impl Default for FreshPolicy {
    fn default() -> Self {
        FreshPolicy { mode: FreshMode::Recycling, reservoirs: BTreeMap::new() }
    }
}

const TEXT_PREFIX: &str = "_nu";
const NUMERIC_BASE: i64 = 1000;

impl FreshPolicy {
    pub fn with_mode(mode: FreshMode) -> Self {
        FreshPolicy { mode, ..Self::default() }
    }

    fn reservoir(&self, ty: &Name, kind: DomainKind, i: usize) -> Option<Value> {
        if let Some(list) = self.reservoirs.get(ty) {
            return list.get(i).cloned();
        }
        match kind {
            DomainKind::Integer => Some(Value::int(ty, NUMERIC_BASE + i as i64)),
            DomainKind::Real => Some(Value::real(ty, Decimal::from(NUMERIC_BASE + i as i64))),
            DomainKind::Text => Some(Value::text(ty, &format!("{TEXT_PREFIX}{i}"))),
            DomainKind::Boolean => None,
        }
    }

    fn reservoir_index(&self, ty: &Name, v: &Value) -> Option<usize> {
        if let Some(list) = self.reservoirs.get(ty) {
            return list.iter().position(|x| x == v);
        }
        match &v.payload {
            Payload::Int(i) if *i >= NUMERIC_BASE => Some((i - NUMERIC_BASE) as usize),
            Payload::Real(d) if d.fract().is_zero() && *d >= Decimal::from(NUMERIC_BASE) => {
                (d - Decimal::from(NUMERIC_BASE)).to_string().parse().ok()
            }
            Payload::Text(s) => s.strip_prefix(TEXT_PREFIX)?.parse().ok(),
            _ => None,
        }
    }

    /// Absent reservoir values, in reservoir order, up to `want` of them, scanning at most `limit` entries.
    fn absent(&self, ty: &Name, kind: DomainKind, used: &BTreeSet<Value>, start: usize, want: usize, limit: Option<usize>) -> Vec<Value> {
        let mut out = Vec::new();
        let mut i = start;
        while out.len() < want && limit.is_none_or(|l| i < l) {
            let Some(v) = self.reservoir(ty, kind, i) else { break };
            if !used.contains(&v) {
                out.push(v);
            }
            i += 1;
        }
        out
    }

    /// Injective assignments of the fresh variables to values outside `used`.
    pub fn assignments(&self, vars: &[(Name, Name)], types: &TypeDomain, used: &BTreeSet<Value>) -> Vec<Substitution> {
        let mut result = vec![Substitution::new()];
        let by_type = vars.iter().into_group_map_by(|(_, t)| t.clone());
        for (ty, group) in by_type.into_iter().sorted_by(|a, b| a.0.cmp(&b.0)) {
            let Some(kind) = types.kind(&ty) else { return vec![] };
            let n = group.len();
            let choices: Vec<Vec<Value>> = match self.mode {
                FreshMode::Recycling => vec![self.absent(&ty, kind, used, 0, n, None)],
                FreshMode::Unbounded => {
                    let start = used
                        .iter()
                        .filter(|v| v.ty == ty)
                        .filter_map(|v| self.reservoir_index(&ty, v))
                        .max()
                        .map_or(0, |m| m + 1);
                    vec![self.absent(&ty, kind, used, start, n, None)]
                }
                FreshMode::Bounded(k) => {
                    let pool = self.absent(&ty, kind, used, 0, k, Some(k));
                    pool.into_iter().permutations(n).collect()
                }
            };
            let choices: Vec<Vec<Value>> = choices.into_iter().filter(|c| c.len() == n).collect();
            let group = &group;
            result = result
                .into_iter()
                .flat_map(|s| {
                    choices.iter().map(move |c| {
                        let mut s = s.clone();
                        for ((v, _), val) in group.iter().zip(c) {
                            s.insert(v.clone(), val.clone());
                        }
                        s
                    })
                })
                .collect();
        }
        result
    }
}

/// Finite ranges for external (input-free, non-fresh) output variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleDomains {
    pub by_type: BTreeMap<Name, Vec<Value>>,
    pub by_var: BTreeMap<Name, Vec<Value>>,
}

impl SampleDomains {
    /// Variable overrides win over type defaults; booleans default to both values.
    pub fn lookup(&self, var: &str, ty: &Name, types: &TypeDomain) -> Vec<Value> {
        if let Some(v) = self.by_var.get(var) {
            return v.clone();
        }
        if let Some(v) = self.by_type.get(ty) {
            return v.clone();
        }
        if types.kind(ty) == Some(DomainKind::Boolean) {
            return vec![Value::boolean(false), Value::boolean(true)];
        }
        vec![]
    }

    /// Cartesian product of the sample ranges.
    pub fn assignments(&self, vars: &[(Name, Name)], types: &TypeDomain) -> Vec<Substitution> {
        vars.iter().fold(vec![Substitution::new()], |acc, (v, ty)| {
            let dom = self.lookup(v, ty, types);
            acc.into_iter()
                .flat_map(|s| {
                    dom.iter().map(move |val| {
                        let mut s = s.clone();
                        s.insert(v.clone(), val.clone());
                        s
                    })
                })
                .collect()
        })
    }
}
