use std::fmt;

use super::{Diagnostic, Pos};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    /// Decimal literal text, parsed during typing.
    Real(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Real(r) => write!(f, "`{r}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

// longest first
const SYMBOLS: [&str; 18] = [":=", "!=", "<=", ">=", "(", ")", "{", "}", ",", ";", ":", "=", "|", "&", "!", "<", ">", "*"];

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

struct Cursor {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

impl Cursor {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.i + ahead).copied()
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }
}

pub(crate) fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, Diagnostic> {
    let mut cur = Cursor { chars: src.chars().collect(), i: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    while let Some(c) = cur.peek(0) {
        let pos = cur.pos();
        if c.is_whitespace() {
            cur.bump();
        } else if c == '/' && cur.peek(1) == Some('/') {
            while cur.peek(0).is_some_and(|c| c != '\n') {
                cur.bump();
            }
        } else if ident_start(c) {
            let mut s = String::new();
            while let Some(c) = cur.peek(0).filter(|c| ident_char(*c)) {
                s.push(c);
                cur.bump();
            }
            out.push((Tok::Ident(s), pos));
        } else if c.is_ascii_digit() || (c == '-' && cur.peek(1).is_some_and(|d| d.is_ascii_digit())) {
            let mut s = String::new();
            s.push(c);
            cur.bump();
            let mut dot = false;
            loop {
                match cur.peek(0) {
                    Some(d) if d.is_ascii_digit() => {}
                    Some('.') if !dot && cur.peek(1).is_some_and(|d| d.is_ascii_digit()) => dot = true,
                    _ => break,
                }
                s.push(cur.bump().unwrap());
            }
            let tok = if dot {
                Tok::Real(s)
            } else {
                Tok::Int(s.parse().map_err(|_| Diagnostic::new(pos, format!("integer literal `{s}` out of range")))?)
            };
            out.push((tok, pos));
        } else if c == '"' {
            cur.bump();
            let mut s = String::new();
            loop {
                let esc_pos = cur.pos();
                match cur.bump() {
                    None => return Err(Diagnostic::new(pos, "unterminated string literal".into())),
                    Some('"') => break,
                    Some('\\') => s.push(match cur.bump() {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some(e @ ('"' | '\\')) => e,
                        Some(e) => return Err(Diagnostic::new(esc_pos, format!("unknown escape `\\{e}`"))),
                        None => return Err(Diagnostic::new(pos, "unterminated string literal".into())),
                    }),
                    Some(c) => s.push(c),
                }
            }
            out.push((Tok::Str(s), pos));
        } else {
            let rest: String = [cur.peek(0), cur.peek(1)].into_iter().flatten().collect();
            let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
                return Err(Diagnostic::new(pos, format!("unexpected character `{c}`")));
            };
            for _ in 0..sym.len() {
                cur.bump();
            }
            out.push((Tok::Sym(sym), pos));
        }
    }
    out.push((Tok::Eof, cur.pos()));
    Ok(out)
}
