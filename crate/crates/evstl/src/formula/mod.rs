//! Event-based STL formulas.
//!
//! The grammar has three layers. Predicate conjunctions `phi` talk about
//! robot state through scalar functions `h` (true iff `h(x) >= 0`).
//! Environment expressions `alpha` are boolean combinations of event names
//! sensed from outside. Spec formulas `Psi` wrap those in the restricted
//! temporal forms `G_[a,b] phi`, `F_[a,b] phi`, `phi1 U_[a,b] phi2`,
//! `G(alpha => Psi)`, `G(phi => Psi)` and conjunction. No other nesting is
//! allowed; the parser rejects anything outside this shape.

mod monitor;
mod parse;

pub use monitor::{monitor, Trace, Verdict};
pub use parse::{parse, Declarations, ParseError};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Closed time interval `[a, b]` in seconds, relative to activation time.
/// `b` may be `f64::INFINITY` for the untimed always; JSON encodes that as
/// `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub a: f64,
    #[serde(with = "inf_as_null")]
    pub b: f64,
}

impl TimeInterval {
    pub fn new(a: f64, b: f64) -> Self {
        TimeInterval { a, b }
    }

    /// The untimed interval `[0, inf)`.
    pub fn untimed() -> Self {
        TimeInterval {
            a: 0.0,
            b: f64::INFINITY,
        }
    }

    pub fn is_untimed(&self) -> bool {
        self.a == 0.0 && self.b.is_infinite()
    }

    /// The upper bound when finite.
    pub fn finite_b(&self) -> Option<f64> {
        self.b.is_finite().then_some(self.b)
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_infinite() {
            write!(f, "[{},inf]", self.a)
        } else {
            write!(f, "[{},{}]", self.a, self.b)
        }
    }
}

/// Serializes `f64::INFINITY` as JSON `null` (JSON has no infinity literal).
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// The scalar function behind a predicate `mu`: the predicate is true iff
/// `h(x) >= 0` over the joint state `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredicateFunction {
    /// `h = radius - ||x[dims] - center||`: true inside the ball.
    SphereInner {
        dims: Vec<usize>,
        center: Vec<f64>,
        radius: f64,
    },
    /// `h = ||x[dims] - center|| - radius`: true outside the ball.
    SphereOuter {
        dims: Vec<usize>,
        center: Vec<f64>,
        radius: f64,
    },
    /// `h = ||x[dims_a] - x[dims_b]|| - min_distance`: true while the two
    /// dimension groups (one per robot) stay at least `min_distance` apart.
    PairDistanceMin {
        dims_a: Vec<usize>,
        dims_b: Vec<usize>,
        min_distance: f64,
    },
    /// `h = tolerance - | |x[dim]| - target |`: true while the magnitude of
    /// the angle state is within `tolerance` of `target`. Angles are raw
    /// state dimensions; no wrapping is applied.
    AngleAbsTarget {
        dim: usize,
        target: f64,
        tolerance: f64,
    },
    /// `h = normal . x[dims] - offset`: true on the positive side.
    Halfspace {
        dims: Vec<usize>,
        normal: Vec<f64>,
        offset: f64,
    },
}

impl PredicateFunction {
    /// Every joint-state dimension this function reads.
    pub fn dims(&self) -> Vec<usize> {
        match self {
            PredicateFunction::SphereInner { dims, .. }
            | PredicateFunction::SphereOuter { dims, .. }
            | PredicateFunction::Halfspace { dims, .. } => dims.clone(),
            PredicateFunction::PairDistanceMin { dims_a, dims_b, .. } => {
                dims_a.iter().chain(dims_b.iter()).copied().collect()
            }
            PredicateFunction::AngleAbsTarget { dim, .. } => vec![*dim],
        }
    }
}

/// A declared predicate: a name bound to its scalar function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub func: PredicateFunction,
}

/// One literal of a predicate conjunction: `mu` or `!mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredLiteral {
    pub pred: Predicate,
    pub negated: bool,
}

impl PredLiteral {
    /// Display name of the literal, e.g. `near55` or `!near55`.
    pub fn label(&self) -> String {
        if self.negated {
            format!("!{}", self.pred.name)
        } else {
            self.pred.name.clone()
        }
    }
}

/// `phi`: a conjunction of predicate literals. The grammar does not allow
/// disjunction at this layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredConj {
    pub literals: Vec<PredLiteral>,
}

impl PredConj {
    /// True iff every literal holds at `x`. Boundary `h == 0` counts as true
    /// for a positive literal and false for a negated one.
    pub fn holds(&self, x: &[f64]) -> bool {
        self.literals.iter().all(|l| {
            let h = eval_h_raw(&l.pred.func, x);
            if l.negated {
                h < 0.0
            } else {
                h >= 0.0
            }
        })
    }
}

/// `alpha`: a boolean expression over environment event names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvBool {
    Event(String),
    Not(Box<EnvBool>),
    And(Box<EnvBool>, Box<EnvBool>),
    Or(Box<EnvBool>, Box<EnvBool>),
}

impl EnvBool {
    pub fn holds(&self, active: &BTreeSet<String>) -> bool {
        match self {
            EnvBool::Event(e) => active.contains(e),
            EnvBool::Not(a) => !a.holds(active),
            EnvBool::And(a, b) => a.holds(active) && b.holds(active),
            EnvBool::Or(a, b) => a.holds(active) || b.holds(active),
        }
    }

    /// Event names appearing in the expression.
    pub fn events(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_events(&mut out);
        out
    }

    fn collect_events(&self, out: &mut BTreeSet<String>) {
        match self {
            EnvBool::Event(e) => {
                out.insert(e.clone());
            }
            EnvBool::Not(a) => a.collect_events(out),
            EnvBool::And(a, b) | EnvBool::Or(a, b) => {
                a.collect_events(out);
                b.collect_events(out);
            }
        }
    }
}

/// Antecedent of an implication under an untimed always: either an
/// environment expression or a predicate conjunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Antecedent {
    Env(EnvBool),
    Pred(PredConj),
}

/// `Psi`: a spec formula in the restricted event-based STL grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StlFormula {
    /// `G_[a,b] phi`; `b` may be infinite (written without an interval).
    TimedG(TimeInterval, PredConj),
    /// `F_[a,b] phi`; `b` must be finite.
    TimedF(TimeInterval, PredConj),
    /// `phi1 U_[a,b] phi2`; `b` must be finite.
    TimedU(TimeInterval, PredConj, PredConj),
    /// `G(alpha => Psi)` or `G(phi => Psi)`.
    ImplG(Antecedent, Box<StlFormula>),
    /// `Psi1 & Psi2 & ...`, flattened. Duplicate conjuncts are preserved.
    And(Vec<StlFormula>),
}

/// Evaluates the literal's scalar: `h(x)` for `mu`, `-h(x)` for `!mu`.
pub fn eval_h(lit: &PredLiteral, x: &[f64]) -> f64 {
    let h = eval_h_raw(&lit.pred.func, x);
    if lit.negated {
        -h
    } else {
        h
    }
}

/// Evaluates the un-negated scalar `h(x)` of a predicate function.
pub fn eval_h_raw(func: &PredicateFunction, x: &[f64]) -> f64 {
    match func {
        PredicateFunction::SphereInner {
            dims,
            center,
            radius,
        } => radius - dist_to_point(x, dims, center),
        PredicateFunction::SphereOuter {
            dims,
            center,
            radius,
        } => dist_to_point(x, dims, center) - radius,
        PredicateFunction::PairDistanceMin {
            dims_a,
            dims_b,
            min_distance,
        } => {
            let sq: f64 = dims_a
                .iter()
                .zip(dims_b.iter())
                .map(|(&i, &j)| (x[i] - x[j]).powi(2))
                .sum();
            sq.sqrt() - min_distance
        }
        PredicateFunction::AngleAbsTarget {
            dim,
            target,
            tolerance,
        } => tolerance - (x[*dim].abs() - target).abs(),
        PredicateFunction::Halfspace {
            dims,
            normal,
            offset,
        } => {
            let dot: f64 = dims.iter().zip(normal.iter()).map(|(&i, &n)| n * x[i]).sum();
            dot - offset
        }
    }
}

fn dist_to_point(x: &[f64], dims: &[usize], center: &[f64]) -> f64 {
    let sq: f64 = dims
        .iter()
        .zip(center.iter())
        .map(|(&i, &c)| (x[i] - c).powi(2))
        .sum();
    sq.sqrt()
}

fn fmt_time(t: f64) -> String {
    if t.is_infinite() {
        "inf".to_string()
    } else {
        format!("{}", t)
    }
}

impl fmt::Display for PredConj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, lit) in self.literals.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            write!(f, "{}", lit.label())?;
        }
        Ok(())
    }
}

impl EnvBool {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        // Precedence: ! (3) > & (2) > | (1).
        let prec = match self {
            EnvBool::Event(_) => 4,
            EnvBool::Not(_) => 3,
            EnvBool::And(_, _) => 2,
            EnvBool::Or(_, _) => 1,
        };
        let need_parens = prec < parent;
        if need_parens {
            write!(f, "(")?;
        }
        match self {
            EnvBool::Event(e) => write!(f, "{}", e)?,
            EnvBool::Not(a) => {
                write!(f, "!")?;
                a.fmt_prec(f, 3)?;
            }
            EnvBool::And(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " & ")?;
                b.fmt_prec(f, 2)?;
            }
            EnvBool::Or(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " | ")?;
                b.fmt_prec(f, 1)?;
            }
        }
        if need_parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for EnvBool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StlFormula::TimedG(iv, c) => {
                if iv.is_untimed() {
                    write!(f, "G({})", c)
                } else {
                    write!(f, "G[{},{}]({})", fmt_time(iv.a), fmt_time(iv.b), c)
                }
            }
            StlFormula::TimedF(iv, c) => {
                write!(f, "F[{},{}]({})", fmt_time(iv.a), fmt_time(iv.b), c)
            }
            StlFormula::TimedU(iv, c1, c2) => {
                write!(
                    f,
                    "({}) U[{},{}] ({})",
                    c1,
                    fmt_time(iv.a),
                    fmt_time(iv.b),
                    c2
                )
            }
            StlFormula::ImplG(ant, body) => {
                match ant {
                    Antecedent::Env(a) => write!(f, "G({} -> {})", a, body),
                    Antecedent::Pred(c) => write!(f, "G({} -> {})", c, body),
                }
            }
            StlFormula::And(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    write!(f, "{}", c)?;
                }
                Ok(())
            }
        }
    }
}
