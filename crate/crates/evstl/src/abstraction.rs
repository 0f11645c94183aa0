//! Abstraction from event-based STL to LTL.
//!
//! Each predicate literal occurring under a timed operator becomes a fresh
//! controlled proposition that remembers its literal, interval, and the
//! operator kind; the interval itself is erased from the LTL side (timing is
//! enforced later by the barrier layer, not by the automaton). Environment
//! events pass through as atomic propositions unchanged, so the LTL formula
//! has the same shape as the spec.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::formula::{Antecedent, EnvBool, PredConj, PredLiteral, StlFormula, TimeInterval};

/// Which temporal operator produced a controlled proposition. The kind picks
/// the barrier template: `F` and `UntilRight` get the time-varying reach
/// template, `G` and `UntilLeft` the plain safety template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalKind {
    F,
    G,
    UntilLeft,
    UntilRight,
}

/// A proposition the system controls through motion: `pi_{mu,[a,b]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledProp {
    /// Unique name, `p_<pred>_<a>_<b>` with suffixes on repeats.
    pub name: String,
    pub literal: PredLiteral,
    pub interval: TimeInterval,
    pub kind: TemporalKind,
}

/// LTL over atomic propositions (environment events and controlled props).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LtlFormula {
    True,
    False,
    Prop(String),
    Not(Box<LtlFormula>),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Or(Box<LtlFormula>, Box<LtlFormula>),
    Implies(Box<LtlFormula>, Box<LtlFormula>),
    Next(Box<LtlFormula>),
    Until(Box<LtlFormula>, Box<LtlFormula>),
    Release(Box<LtlFormula>, Box<LtlFormula>),
    Eventually(Box<LtlFormula>),
    Always(Box<LtlFormula>),
}

impl LtlFormula {
    pub fn prop(name: impl Into<String>) -> Self {
        LtlFormula::Prop(name.into())
    }

    pub fn not(f: LtlFormula) -> Self {
        LtlFormula::Not(Box::new(f))
    }

    pub fn and(a: LtlFormula, b: LtlFormula) -> Self {
        LtlFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: LtlFormula, b: LtlFormula) -> Self {
        LtlFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: LtlFormula, b: LtlFormula) -> Self {
        LtlFormula::Implies(Box::new(a), Box::new(b))
    }

    pub fn next(f: LtlFormula) -> Self {
        LtlFormula::Next(Box::new(f))
    }

    pub fn until(a: LtlFormula, b: LtlFormula) -> Self {
        LtlFormula::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: LtlFormula, b: LtlFormula) -> Self {
        LtlFormula::Release(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: LtlFormula) -> Self {
        LtlFormula::Eventually(Box::new(f))
    }

    pub fn always(f: LtlFormula) -> Self {
        LtlFormula::Always(Box::new(f))
    }

    /// Right-folds a non-empty list into a conjunction.
    pub fn and_all(mut parts: Vec<LtlFormula>) -> LtlFormula {
        match parts.len() {
            0 => LtlFormula::True,
            1 => parts.pop().unwrap(),
            _ => {
                let mut out = parts.pop().unwrap();
                while let Some(p) = parts.pop() {
                    out = LtlFormula::and(p, out);
                }
                out
            }
        }
    }

    /// All proposition names appearing in the formula.
    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut BTreeSet<String>) {
        match self {
            LtlFormula::True | LtlFormula::False => {}
            LtlFormula::Prop(p) => {
                out.insert(p.clone());
            }
            LtlFormula::Not(a)
            | LtlFormula::Next(a)
            | LtlFormula::Eventually(a)
            | LtlFormula::Always(a) => a.collect_props(out),
            LtlFormula::And(a, b)
            | LtlFormula::Or(a, b)
            | LtlFormula::Implies(a, b)
            | LtlFormula::Until(a, b)
            | LtlFormula::Release(a, b) => {
                a.collect_props(out);
                b.collect_props(out);
            }
        }
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl LtlFormula {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        let prec = match self {
            LtlFormula::True | LtlFormula::False | LtlFormula::Prop(_) => 6,
            LtlFormula::Not(_)
            | LtlFormula::Next(_)
            | LtlFormula::Eventually(_)
            | LtlFormula::Always(_) => 5,
            LtlFormula::Until(_, _) | LtlFormula::Release(_, _) => 4,
            LtlFormula::And(_, _) => 3,
            LtlFormula::Or(_, _) => 2,
            LtlFormula::Implies(_, _) => 1,
        };
        let parens = prec < parent;
        if parens {
            write!(f, "(")?;
        }
        match self {
            LtlFormula::True => write!(f, "true")?,
            LtlFormula::False => write!(f, "false")?,
            LtlFormula::Prop(p) => write!(f, "{}", p)?,
            LtlFormula::Not(a) => {
                write!(f, "!")?;
                a.fmt_prec(f, 5)?;
            }
            LtlFormula::Next(a) => {
                write!(f, "X ")?;
                a.fmt_prec(f, 5)?;
            }
            LtlFormula::Eventually(a) => {
                write!(f, "F ")?;
                a.fmt_prec(f, 5)?;
            }
            LtlFormula::Always(a) => {
                write!(f, "G ")?;
                a.fmt_prec(f, 5)?;
            }
            LtlFormula::Until(a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, " U ")?;
                b.fmt_prec(f, 5)?;
            }
            LtlFormula::Release(a, b) => {
                a.fmt_prec(f, 5)?;
                write!(f, " R ")?;
                b.fmt_prec(f, 5)?;
            }
            LtlFormula::And(a, b) => {
                a.fmt_prec(f, 3)?;
                write!(f, " & ")?;
                b.fmt_prec(f, 3)?;
            }
            LtlFormula::Or(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " | ")?;
                b.fmt_prec(f, 2)?;
            }
            LtlFormula::Implies(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " -> ")?;
                b.fmt_prec(f, 1)?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Result of abstracting a spec: the LTL formula and the controlled
/// propositions it mentions, in traversal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abstraction {
    pub ltl: LtlFormula,
    pub props: Vec<ControlledProp>,
}

/// Abstracts a spec formula to LTL. `reserved` holds names the proposition
/// namer must avoid (the declared event names).
pub fn abstract_spec(spec: &StlFormula, reserved: &BTreeSet<String>) -> Abstraction {
    let mut namer = Namer {
        used: reserved.clone(),
        props: Vec::new(),
    };
    let ltl = walk(spec, &mut namer);
    Abstraction {
        ltl,
        props: namer.props,
    }
}

struct Namer {
    used: BTreeSet<String>,
    props: Vec<ControlledProp>,
}

impl Namer {
    /// Mints one controlled proposition for a literal occurrence and returns
    /// its LTL atom. Base names repeat across occurrences of the same
    /// literal and interval, so a numeric suffix keeps them unique.
    fn prop(
        &mut self,
        lit: &PredLiteral,
        interval: TimeInterval,
        kind: TemporalKind,
    ) -> LtlFormula {
        let base = format!(
            "p_{}{}_{}_{}",
            if lit.negated { "not_" } else { "" },
            lit.pred.name,
            fmt_bound(interval.a),
            fmt_bound(interval.b),
        );
        let mut name = base.clone();
        let mut n = 1;
        while self.used.contains(&name) {
            n += 1;
            name = format!("{}_{}", base, n);
        }
        self.used.insert(name.clone());
        self.props.push(ControlledProp {
            name: name.clone(),
            literal: lit.clone(),
            interval,
            kind,
        });
        LtlFormula::Prop(name)
    }

    /// A whole conjunction of literals under one operator.
    fn conj(
        &mut self,
        conj: &PredConj,
        interval: TimeInterval,
        kind: TemporalKind,
    ) -> LtlFormula {
        let parts = conj
            .literals
            .iter()
            .map(|l| self.prop(l, interval, kind))
            .collect();
        LtlFormula::and_all(parts)
    }
}

fn fmt_bound(t: f64) -> String {
    if t.is_infinite() {
        "inf".to_string()
    } else {
        format!("{}", t).replace('.', "p")
    }
}

fn walk(spec: &StlFormula, namer: &mut Namer) -> LtlFormula {
    match spec {
        StlFormula::TimedG(iv, c) => {
            LtlFormula::always(namer.conj(c, *iv, TemporalKind::G))
        }
        StlFormula::TimedF(iv, c) => {
            LtlFormula::eventually(namer.conj(c, *iv, TemporalKind::F))
        }
        StlFormula::TimedU(iv, c1, c2) => LtlFormula::until(
            namer.conj(c1, *iv, TemporalKind::UntilLeft),
            namer.conj(c2, *iv, TemporalKind::UntilRight),
        ),
        StlFormula::ImplG(ant, body) => {
            let lhs = match ant {
                Antecedent::Env(e) => env_to_ltl(e),
                Antecedent::Pred(c) => {
                    namer.conj(c, TimeInterval::untimed(), TemporalKind::G)
                }
            };
            let rhs = walk(body, namer);
            LtlFormula::always(LtlFormula::implies(lhs, rhs))
        }
        StlFormula::And(children) => {
            LtlFormula::and_all(children.iter().map(|c| walk(c, namer)).collect())
        }
    }
}

fn env_to_ltl(e: &EnvBool) -> LtlFormula {
    match e {
        EnvBool::Event(name) => LtlFormula::prop(name.clone()),
        EnvBool::Not(a) => LtlFormula::not(env_to_ltl(a)),
        EnvBool::And(a, b) => LtlFormula::and(env_to_ltl(a), env_to_ltl(b)),
        EnvBool::Or(a, b) => LtlFormula::or(env_to_ltl(a), env_to_ltl(b)),
    }
}
