//! Textual model format for DB-nets (`.dbn`) and ν-CPNs (`.cpn`). See `docs/dsl.md` for the
//! grammar. Parsing is a single pass: every name must be declared before it is referenced, and
//! literals take their type from the position they occupy.

mod lexer;
mod parser;
mod printer;

use std::fmt;

use thiserror::Error;

use crate::dbnet::DbNet;
use crate::nucpn::NuCpn;

pub use printer::{print_cpn, print_dbnet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{pos}: {message}")]
pub struct Diagnostic {
    pub pos: Pos,
    pub message: String,
}

impl Diagnostic {
    pub(crate) fn new(pos: Pos, message: String) -> Self {
        Diagnostic { pos, message }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    DbNet(DbNet),
    Cpn(NuCpn),
}

impl Model {
    pub fn print(&self) -> String {
        match self {
            Model::DbNet(n) => print_dbnet(n),
            Model::Cpn(n) => print_cpn(n),
        }
    }
}

pub fn parse_model(src: &str) -> Result<Model, Diagnostic> {
    parser::parse(src)
}

pub fn parse_dbnet(src: &str) -> Result<DbNet, Diagnostic> {
    match parse_model(src)? {
        Model::DbNet(n) => Ok(n),
        Model::Cpn(_) => Err(Diagnostic::new(Pos { line: 1, col: 1 }, "expected a dbnet model, found a cpn model".into())),
    }
}

pub fn parse_cpn(src: &str) -> Result<NuCpn, Diagnostic> {
    match parse_model(src)? {
        Model::Cpn(n) => Ok(n),
        Model::DbNet(_) => Err(Diagnostic::new(Pos { line: 1, col: 1 }, "expected a cpn model, found a dbnet model".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{bonus_desk, shopping_cart, CartParams};
    use crate::relational::{Constraint, FactTemplate};
    use crate::term::Term;
    use crate::translate::translate;

    #[test]
    fn relation_with_inline_key() {
        let n = parse_dbnet("dbnet t; relation User(ID: int key, card: string);").unwrap();
        assert_eq!(n.schema.relations["User"].arity(), 2);
        assert_eq!(n.schema.constraints, vec![Constraint::PrimaryKey { relation: "User".into(), cols: vec![0] }]);
    }

    #[test]
    fn action_declaration() {
        let n = parse_dbnet(
            "dbnet t; relation User(ID: int key, card: string); relation WithBonus(UID: int, type: string);
             action addb(uid: int, bt: string) { add WithBonus(uid, bt); }",
        )
        .unwrap();
        let a = &n.actions["addb"];
        assert_eq!(a.adds, vec![FactTemplate { relation: "WithBonus".into(), terms: vec![Term::var("uid"), Term::var("bt")] }]);
        assert!(a.dels.is_empty());
    }

    #[test]
    fn empty_file_is_diagnosed() {
        let e = parse_model("  // nothing\n").unwrap_err();
        assert!(e.message.contains("empty model"), "{e}");
    }

    #[test]
    fn builtins_round_trip() {
        for n in [shopping_cart(CartParams::default()), shopping_cart(CartParams { users: 2, products: 2, sessions: 2 }), bonus_desk()] {
            let text = print_dbnet(&n);
            let back = parse_dbnet(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            assert_eq!(back, n, "{text}");
            assert_eq!(print_dbnet(&back), text);
        }
    }

    #[test]
    fn translated_net_round_trips() {
        let n = bonus_desk();
        let cpn = translate(&n, &n.initial).unwrap().net;
        let text = print_cpn(&cpn);
        let back = parse_cpn(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(back, cpn);
    }

    #[test]
    fn negated_relation_atom_is_rejected() {
        let e = parse_dbnet("dbnet t; relation R(a: int); query Q(x: int) := R(x), !R(x);").unwrap_err();
        assert_eq!(e.pos, Pos { line: 1, col: 55 });
        assert!(e.message.contains("UCQ"), "{e}");
    }

    #[test]
    fn negated_filters_are_accepted() {
        let n = parse_dbnet("dbnet t; relation R(a: int, b: int); query Q(x: int) := R(x, y), !(x < y), !succ(x, y), x != 3;").unwrap();
        let f = &n.queries["Q"].disjuncts[0].filters;
        assert!(f.iter().all(|l| l.negated));
        assert_eq!(n.queries["Q"].disjuncts[0].existential, vec![("y".into(), "int".into())]);
    }

    #[test]
    fn diagnostics_carry_positions() {
        let cases = [
            ("dbnet t;\nrelation R(a: int);\nrelation R(b: int);", 3, 10, "duplicate"),
            ("dbnet t;\nkey S(a);", 2, 5, "unknown relation"),
            ("dbnet t;\nplace P: (int);\ntransition T { in Q(x); }", 3, 19, "unknown place"),
            ("dbnet t;\nrelation R(a: int);\ninitial { fact R(\"x\"); }", 3, 18, "does not fit"),
            ("dbnet t;\nrelation R(a: nat);", 2, 15, "unknown type"),
            ("cpn t;\nrelation R(a: int);", 2, 1, "not allowed"),
            ("dbnet t;\nplace P: (int);\ntransition T { in P(x); priority high; }", 3, 25, "only allowed in cpn"),
        ];
        for (src, line, col, msg) in cases {
            let e = parse_model(src).unwrap_err();
            assert_eq!((e.pos.line, e.pos.col), (line, col), "{src}: {e}");
            assert!(e.message.contains(msg), "{src}: {e}");
        }
    }

    #[test]
    fn literals_take_their_context_type() {
        let n = parse_dbnet(
            "dbnet t; type money: real; relation P(name: string, cost: money);
             place S: (money); view V: (string, money) = Q;
             initial { fact P(\"tv\", 100); fact P(\"radio\", null); token S(2.50) * 2; }",
        );
        assert!(n.is_err(), "view before its query");
        let n = parse_dbnet(
            "dbnet t; type money: real; relation P(name: string, cost: money);
             place S: (money);
             initial { fact P(\"tv\", 100); fact P(\"radio\", null); token S(2.50) * 2; }",
        )
        .unwrap();
        assert!(n.initial.instance.relation("P").all(|t| &*t[1].ty == "money"));
        assert_eq!(n.initial.marking.place_size("S"), 2);
    }
}
