//! Typed scalar values, data types and type predicates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

/// Cheap-to-clone identifier used for types, relations, places, variables.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DomainKind {
    Text,
    Integer,
    Real,
    Boolean,
}

impl DomainKind {
    pub fn is_ordered(self) -> bool {
        matches!(self, DomainKind::Integer | DomainKind::Real)
    }

    /// Fresh values can only be drawn from infinite domains.
    pub fn is_infinite(self) -> bool {
        !matches!(self, DomainKind::Boolean)
    }

    pub fn supports(self, p: Pred) -> bool {
        match p {
            Pred::Eq => true,
            Pred::Lt | Pred::Le | Pred::Gt | Pred::Ge => self.is_ordered(),
            Pred::Succ => self == DomainKind::Integer,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            DomainKind::Text => "string",
            DomainKind::Integer => "integer",
            DomainKind::Real => "real",
            DomainKind::Boolean => "boolean",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "string" => DomainKind::Text,
            "integer" => DomainKind::Integer,
            "real" => DomainKind::Real,
            "boolean" => DomainKind::Boolean,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DataType {
    pub name: Name,
    pub kind: DomainKind,
}

impl DataType {
    pub fn new(name: &str, kind: DomainKind) -> Self {
        DataType { name: name.into(), kind }
    }

    /// Equality is always present.
    pub fn predicates(&self) -> BTreeSet<Pred> {
        Pred::ALL.iter().copied().filter(|p| self.kind.supports(*p)).collect()
    }
}

/// The set of declared data types. Values of distinct types never compare equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDomain {
    types: BTreeMap<Name, DataType>,
}

pub const INT: &str = "int";
pub const STRING: &str = "string";
pub const REAL: &str = "real";
pub const BOOL: &str = "bool";

impl Default for TypeDomain {
    fn default() -> Self {
        let mut d = TypeDomain { types: BTreeMap::new() };
        d.declare(DataType::new(INT, DomainKind::Integer));
        d.declare(DataType::new(STRING, DomainKind::Text));
        d.declare(DataType::new(REAL, DomainKind::Real));
        d.declare(DataType::new(BOOL, DomainKind::Boolean));
        d
    }
}

impl TypeDomain {
    pub fn builtin(name: &str) -> bool {
        matches!(name, INT | STRING | REAL | BOOL)
    }

    /// Returns false when the name is already taken.
    pub fn declare(&mut self, t: DataType) -> bool {
        if self.types.contains_key(&t.name) {
            return false;
        }
        self.types.insert(t.name.clone(), t);
        true
    }

    pub fn get(&self, name: &str) -> Option<&DataType> {
        self.types.get(name)
    }

    pub fn kind(&self, name: &str) -> Option<DomainKind> {
        self.types.get(name).map(|t| t.kind)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataType> {
        self.types.values()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Payload {
    Null,
    Bool(bool),
    Int(i64),
    Real(Decimal),
    Text(Arc<str>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value {
    pub ty: Name,
    pub payload: Payload,
}

impl Value {
    pub fn int(ty: &str, v: i64) -> Self {
        Value { ty: ty.into(), payload: Payload::Int(v) }
    }

    pub fn text(ty: &str, v: &str) -> Self {
        Value { ty: ty.into(), payload: Payload::Text(v.into()) }
    }

    pub fn real(ty: &str, v: Decimal) -> Self {
        Value { ty: ty.into(), payload: Payload::Real(v.normalize()) }
    }

    /// Panics on malformed decimal text; intended for literals in code.
    pub fn real_str(ty: &str, v: &str) -> Self {
        Self::real(ty, Decimal::from_str(v).expect("decimal literal"))
    }

    pub fn boolean(v: bool) -> Self {
        Value { ty: BOOL.into(), payload: Payload::Bool(v) }
    }

    pub fn null(ty: &str) -> Self {
        Value { ty: ty.into(), payload: Payload::Null }
    }

    pub fn is_null(&self) -> bool {
        self.payload == Payload::Null
    }

    /// Whether the payload shape is admissible for a domain kind.
    pub fn fits(&self, kind: DomainKind) -> bool {
        matches!(
            (&self.payload, kind),
            (Payload::Null, _)
                | (Payload::Bool(_), DomainKind::Boolean)
                | (Payload::Int(_), DomainKind::Integer)
                | (Payload::Real(_), DomainKind::Real)
                | (Payload::Text(_), DomainKind::Text)
        )
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            Payload::Null => f.write_str("null"),
            Payload::Bool(b) => write!(f, "{b}"),
            Payload::Int(i) => write!(f, "{i}"),
            Payload::Real(d) => write!(f, "{d}"),
            Payload::Text(s) => write_quoted(f, s),
        }
    }
}

pub fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

/// Binary type predicates. `!=` is the negation of `Eq`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pred {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Succ,
}

impl Pred {
    pub const ALL: [Pred; 6] = [Pred::Eq, Pred::Lt, Pred::Le, Pred::Gt, Pred::Ge, Pred::Succ];

    /// Ordering predicates are false on null and on non-ordered payloads.
    pub fn eval(self, a: &Value, b: &Value) -> bool {
        use std::cmp::Ordering::*;
        if self == Pred::Eq {
            return a == b;
        }
        if a.ty != b.ty {
            return false;
        }
        let ord = match (&a.payload, &b.payload) {
            (Payload::Int(x), Payload::Int(y)) => {
                if self == Pred::Succ {
                    return x.checked_add(1) == Some(*y);
                }
                x.cmp(y)
            }
            (Payload::Real(x), Payload::Real(y)) if self != Pred::Succ => x.cmp(y),
            _ => return false,
        };
        match self {
            Pred::Lt => ord == Less,
            Pred::Le => ord != Greater,
            Pred::Gt => ord == Greater,
            Pred::Ge => ord != Less,
            Pred::Eq | Pred::Succ => unreachable!(),
        }
    }

    /// Infix operator, `None` for prefix predicates.
    pub fn infix(self) -> Option<&'static str> {
        Some(match self {
            Pred::Eq => "=",
            Pred::Lt => "<",
            Pred::Le => "<=",
            Pred::Gt => ">",
            Pred::Ge => ">=",
            Pred::Succ => return None,
        })
    }
}
