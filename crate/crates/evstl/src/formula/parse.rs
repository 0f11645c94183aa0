//! Concrete syntax for event-based STL specs.
//!
//! ```text
//! spec     := psi ('&' psi)*
//! psi      := 'G' '[' t ',' (t|'inf') ']' '(' predconj ')'
//!           | 'G' '(' antecedent '->' psi ')'
//!           | 'G' '(' predconj ')'                      // untimed always
//!           | 'F' '[' t ',' t ']' '(' predconj ')'
//!           | uarg 'U' '[' t ',' t ']' uarg
//! uarg     := '(' predconj ')' | predlit
//! predconj := predlit ('&' predlit)*
//! predlit  := '!'? predicate-name
//! ```
//!
//! The antecedent of an implication is either a boolean expression over
//! declared event names (`!`, `&`, `|`, parentheses) or a conjunction of
//! predicate literals; which one is decided by the declarations. Disjunction
//! is only legal over events.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{
    Antecedent, EnvBool, PredConj, PredLiteral, Predicate, StlFormula, TimeInterval,
};

/// Name tables the parser resolves identifiers against.
#[derive(Debug, Clone, Default)]
pub struct Declarations {
    pub predicates: BTreeMap<String, Predicate>,
    pub events: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    /// Byte offset into the source.
    pub pos: usize,
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Inf,
    G,
    F,
    U,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Amp,
    Pipe,
    Bang,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{}`", s),
            Tok::Num(n) => format!("number `{}`", n),
            Tok::Inf => "`inf`".into(),
            Tok::G => "`G`".into(),
            Tok::F => "`F`".into(),
            Tok::U => "`U`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            b'[' => {
                toks.push((i, Tok::LBrack));
                i += 1;
            }
            b']' => {
                toks.push((i, Tok::RBrack));
                i += 1;
            }
            b',' => {
                toks.push((i, Tok::Comma));
                i += 1;
            }
            b'&' => {
                toks.push((i, Tok::Amp));
                i += 1;
            }
            b'|' => {
                toks.push((i, Tok::Pipe));
                i += 1;
            }
            b'!' => {
                toks.push((i, Tok::Bang));
                i += 1;
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((i, Tok::Arrow));
                    i += 2;
                } else {
                    return Err(err_at(src, i, "expected `->`".into()));
                }
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == b'.'
                        || bytes[i] == b'e'
                        || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && matches!(bytes[i - 1], b'e' | b'E')))
                {
                    i += 1;
                }
                let text = &src[start..i];
                let n: f64 = text
                    .parse()
                    .map_err(|_| err_at(src, start, format!("invalid number `{}`", text)))?;
                toks.push((start, Tok::Num(n)));
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let word = &src[start..i];
                let tok = match word {
                    "G" => Tok::G,
                    "F" => Tok::F,
                    "U" => Tok::U,
                    "inf" => Tok::Inf,
                    _ => Tok::Ident(word.to_string()),
                };
                toks.push((start, tok));
            }
            _ => {
                return Err(err_at(
                    src,
                    i,
                    format!("unexpected character `{}`", &src[i..i + 1]),
                ))
            }
        }
    }
    toks.push((src.len(), Tok::Eof));
    Ok(toks)
}

fn err_at(src: &str, pos: usize, msg: String) -> ParseError {
    let mut line = 1;
    let mut col = 1;
    for b in src.as_bytes()[..pos.min(src.len())].iter() {
        if *b == b'\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    ParseError {
        pos,
        line,
        col,
        msg,
    }
}

/// Parses a spec formula, resolving identifiers against `decls`.
pub fn parse(src: &str, decls: &Declarations) -> Result<StlFormula, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        src,
        toks,
        pos: 0,
        decls,
    };
    let f = p.parse_spec()?;
    p.expect(&Tok::Eof)?;
    Ok(f)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
    decls: &'a Declarations,
}

/// A raw boolean expression over identifiers, before classification as an
/// environment expression or a predicate conjunction.
#[derive(Debug, Clone)]
enum RawExpr {
    Atom(usize, String),
    Not(Box<RawExpr>),
    And(Box<RawExpr>, Box<RawExpr>),
    Or(Box<RawExpr>, Box<RawExpr>),
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn peek_pos(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, pos: usize, msg: impl Into<String>) -> ParseError {
        err_at(self.src, pos, msg.into())
    }

    fn error_here(&self, msg: impl Into<String>) -> ParseError {
        self.error(self.peek_pos(), msg)
    }

    fn expect(&mut self, tok: &Tok) -> Result<usize, ParseError> {
        if self.peek() == tok {
            Ok(self.bump().0)
        } else {
            Err(self.error_here(format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            )))
        }
    }

    fn parse_spec(&mut self) -> Result<StlFormula, ParseError> {
        let mut parts = vec![self.parse_psi()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            parts.push(self.parse_psi()?);
        }
        if parts.len() == 1 {
            Ok(parts.pop().unwrap())
        } else {
            Ok(StlFormula::And(parts))
        }
    }

    fn parse_psi(&mut self) -> Result<StlFormula, ParseError> {
        match self.peek().clone() {
            Tok::G => {
                self.bump();
                if *self.peek() == Tok::LBrack {
                    let iv = self.parse_interval(true)?;
                    self.expect(&Tok::LParen)?;
                    let conj = self.parse_predconj()?;
                    self.expect(&Tok::RParen)?;
                    Ok(StlFormula::TimedG(iv, conj))
                } else {
                    self.expect(&Tok::LParen)?;
                    // Either `G(antecedent -> psi)` or the untimed `G(predconj)`;
                    // probe for the arrow, then rewind if it is not there.
                    let save = self.pos;
                    if let Ok(raw) = self.parse_raw_expr() {
                        if *self.peek() == Tok::Arrow {
                            self.bump();
                            let ant = self.classify_antecedent(&raw)?;
                            let body = self.parse_psi()?;
                            self.expect(&Tok::RParen)?;
                            return Ok(StlFormula::ImplG(ant, Box::new(body)));
                        }
                    }
                    self.pos = save;
                    let conj = self.parse_predconj()?;
                    self.expect(&Tok::RParen)?;
                    Ok(StlFormula::TimedG(TimeInterval::untimed(), conj))
                }
            }
            Tok::F => {
                self.bump();
                let iv = self.parse_interval(false)?;
                self.expect(&Tok::LParen)?;
                let conj = self.parse_predconj()?;
                self.expect(&Tok::RParen)?;
                Ok(StlFormula::TimedF(iv, conj))
            }
            Tok::LParen | Tok::Ident(_) | Tok::Bang => {
                let left = self.parse_uarg()?;
                self.expect(&Tok::U)?;
                let iv = self.parse_interval(false)?;
                let right = self.parse_uarg()?;
                Ok(StlFormula::TimedU(iv, left, right))
            }
            other => Err(self.error_here(format!(
                "expected a temporal formula (`G`, `F`, or an until), found {}",
                other.describe()
            ))),
        }
    }

    fn parse_uarg(&mut self) -> Result<PredConj, ParseError> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let conj = self.parse_predconj()?;
            self.expect(&Tok::RParen)?;
            Ok(conj)
        } else {
            let lit = self.parse_predlit()?;
            Ok(PredConj {
                literals: vec![lit],
            })
        }
    }

    fn parse_predconj(&mut self) -> Result<PredConj, ParseError> {
        let mut literals = vec![self.parse_predlit()?];
        loop {
            match self.peek() {
                Tok::Amp => {
                    self.bump();
                    literals.push(self.parse_predlit()?);
                }
                Tok::Pipe => {
                    return Err(self.error_here(
                        "disjunction of predicates is not allowed; the grammar only \
                         permits conjunctions of predicate literals",
                    ))
                }
                _ => break,
            }
        }
        Ok(PredConj { literals })
    }

    fn parse_predlit(&mut self) -> Result<PredLiteral, ParseError> {
        let negated = if *self.peek() == Tok::Bang {
            self.bump();
            true
        } else {
            false
        };
        let (pos, tok) = self.bump();
        let name = match tok {
            Tok::Ident(name) => name,
            other => {
                return Err(self.error(
                    pos,
                    format!("expected a predicate name, found {}", other.describe()),
                ))
            }
        };
        if let Some(pred) = self.decls.predicates.get(&name) {
            Ok(PredLiteral {
                pred: pred.clone(),
                negated,
            })
        } else if self.decls.events.contains(&name) {
            Err(self.error(
                pos,
                format!(
                    "event `{}` used where a predicate is required; events may only \
                     appear in implication antecedents",
                    name
                ),
            ))
        } else {
            Err(self.error(pos, format!("unknown identifier `{}`", name)))
        }
    }

    fn parse_interval(&mut self, allow_inf: bool) -> Result<TimeInterval, ParseError> {
        self.expect(&Tok::LBrack)?;
        let (apos, atok) = self.bump();
        let a = match atok {
            Tok::Num(n) => n,
            other => {
                return Err(self.error(
                    apos,
                    format!("expected a lower bound, found {}", other.describe()),
                ))
            }
        };
        self.expect(&Tok::Comma)?;
        let (bpos, btok) = self.bump();
        let b = match btok {
            Tok::Num(n) => n,
            Tok::Inf if allow_inf => f64::INFINITY,
            Tok::Inf => {
                return Err(self.error(
                    bpos,
                    "`inf` is only allowed as the upper bound of `G`",
                ))
            }
            other => {
                return Err(self.error(
                    bpos,
                    format!("expected an upper bound, found {}", other.describe()),
                ))
            }
        };
        self.expect(&Tok::RBrack)?;
        if a < 0.0 {
            return Err(self.error(apos, "interval bounds must be non-negative"));
        }
        if b < a {
            return Err(self.error(
                bpos,
                format!("interval upper bound {} is below lower bound {}", b, a),
            ));
        }
        Ok(TimeInterval::new(a, b))
    }

    // Raw boolean expression: or_expr := and_expr ('|' and_expr)*;
    // and_expr := unary ('&' unary)*; unary := '!' unary | ident | '(' or ')'.
    fn parse_raw_expr(&mut self) -> Result<RawExpr, ParseError> {
        let mut left = self.parse_raw_and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let right = self.parse_raw_and()?;
            left = RawExpr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_raw_and(&mut self) -> Result<RawExpr, ParseError> {
        let mut left = self.parse_raw_unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let right = self.parse_raw_unary()?;
            left = RawExpr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn parse_raw_unary(&mut self) -> Result<RawExpr, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(RawExpr::Not(Box::new(self.parse_raw_unary()?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.parse_raw_expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let pos = self.bump().0;
                Ok(RawExpr::Atom(pos, name))
            }
            other => Err(self.error_here(format!(
                "expected an event or predicate name, found {}",
                other.describe()
            ))),
        }
    }

    /// Decides whether a raw antecedent expression is an environment
    /// expression or a predicate conjunction, based on the declarations.
    fn classify_antecedent(&self, raw: &RawExpr) -> Result<Antecedent, ParseError> {
        let mut atoms = Vec::new();
        collect_atoms(raw, &mut atoms);
        let mut kinds = atoms.iter().map(|&(pos, name)| {
            if self.decls.events.contains(name) {
                Ok(true)
            } else if self.decls.predicates.contains_key(name) {
                Ok(false)
            } else {
                Err(self.error(pos, format!("unknown identifier `{}`", name)))
            }
        });
        let first_is_event = match kinds.next() {
            Some(r) => r?,
            None => unreachable!("raw expressions have at least one atom"),
        };
        for k in kinds {
            if k? != first_is_event {
                let (pos, _) = atoms[0];
                return Err(self.error(
                    pos,
                    "an antecedent must be all events or all predicates, not a mix",
                ));
            }
        }
        if first_is_event {
            Ok(Antecedent::Env(self.raw_to_env(raw)))
        } else {
            Ok(Antecedent::Pred(self.raw_to_predconj(raw)?))
        }
    }

    fn raw_to_env(&self, raw: &RawExpr) -> EnvBool {
        match raw {
            RawExpr::Atom(_, name) => EnvBool::Event(name.clone()),
            RawExpr::Not(a) => EnvBool::Not(Box::new(self.raw_to_env(a))),
            RawExpr::And(a, b) => {
                EnvBool::And(Box::new(self.raw_to_env(a)), Box::new(self.raw_to_env(b)))
            }
            RawExpr::Or(a, b) => {
                EnvBool::Or(Box::new(self.raw_to_env(a)), Box::new(self.raw_to_env(b)))
            }
        }
    }

    fn raw_to_predconj(&self, raw: &RawExpr) -> Result<PredConj, ParseError> {
        let mut literals = Vec::new();
        self.flatten_pred_raw(raw, &mut literals)?;
        Ok(PredConj { literals })
    }

    fn flatten_pred_raw(
        &self,
        raw: &RawExpr,
        out: &mut Vec<PredLiteral>,
    ) -> Result<(), ParseError> {
        match raw {
            RawExpr::Atom(_, name) => {
                let pred = self.decls.predicates[name].clone();
                out.push(PredLiteral {
                    pred,
                    negated: false,
                });
                Ok(())
            }
            RawExpr::Not(inner) => match inner.as_ref() {
                RawExpr::Atom(_, name) => {
                    let pred = self.decls.predicates[name].clone();
                    out.push(PredLiteral {
                        pred,
                        negated: true,
                    });
                    Ok(())
                }
                _ => Err(err_at(
                    self.src,
                    raw_pos(raw),
                    "negation in a predicate antecedent may only wrap a single \
                     predicate"
                        .into(),
                )),
            },
            RawExpr::And(a, b) => {
                self.flatten_pred_raw(a, out)?;
                self.flatten_pred_raw(b, out)
            }
            RawExpr::Or(_, _) => Err(err_at(
                self.src,
                raw_pos(raw),
                "disjunction of predicates is not allowed; the grammar only permits \
                 conjunctions of predicate literals"
                    .into(),
            )),
        }
    }
}

fn collect_atoms<'e>(raw: &'e RawExpr, out: &mut Vec<(usize, &'e str)>) {
    match raw {
        RawExpr::Atom(pos, name) => out.push((*pos, name)),
        RawExpr::Not(a) => collect_atoms(a, out),
        RawExpr::And(a, b) | RawExpr::Or(a, b) => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
    }
}

fn raw_pos(raw: &RawExpr) -> usize {
    match raw {
        RawExpr::Atom(pos, _) => *pos,
        RawExpr::Not(a) => raw_pos(a),
        RawExpr::And(a, _) | RawExpr::Or(a, _) => raw_pos(a),
    }
}
