//! Finite-trace monitor for event-based STL.
//!
//! Evaluates a spec over a sampled trace of joint states and event sets and
//! returns the verdict at t = 0. Timed obligations whose windows extend past
//! the end of the trace are inconclusive rather than violated; the untimed
//! always is checked over the recorded horizon only, a documented
//! finite-trace approximation.
//!
//! An implication `G(ant => Psi)` restarts the inner interval clocks at each
//! rising edge of the antecedent (the first sample of the evaluation window
//! counts as rising if the antecedent already holds). This matches the
//! executor, which activates barrier functions once per event arrival, not
//! anew at every sample the event stays latched.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Antecedent, PredConj, StlFormula};

/// A sampled execution: `states[k]` and `events[k]` describe t = k * dt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub events: Vec<BTreeSet<String>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Monitor verdict at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Satisfied,
    /// `time` is the earliest witnessing time: for a failed `F` or window-
    /// exhausted `U` the instant the obligation started, for a breached `G`
    /// or broken until-prefix the sample of the breach itself.
    Violated { time: f64, subformula: String },
    Inconclusive { reason: String },
}

/// Three-valued result of evaluating a subformula at one sample.
#[derive(Debug, Clone, PartialEq)]
enum Tv {
    True,
    False { witness: usize, subformula: String },
    Unknown { reason: String },
}

/// Evaluates `spec` over `trace` and returns the verdict at t = 0.
pub fn monitor(trace: &Trace, spec: &StlFormula) -> Verdict {
    assert_eq!(
        trace.states.len(),
        trace.events.len(),
        "trace states and events must be sampled together"
    );
    if trace.is_empty() {
        return Verdict::Inconclusive {
            reason: "empty trace".into(),
        };
    }
    match eval(spec, 0, trace) {
        Tv::True => Verdict::Satisfied,
        Tv::False { witness, subformula } => Verdict::Violated {
            time: witness as f64 * trace.dt,
            subformula,
        },
        Tv::Unknown { reason } => Verdict::Inconclusive { reason },
    }
}

/// Converts a time offset in seconds to a sample count. Interval bounds are
/// required to be multiples of the sample period; rounding here only absorbs
/// representation noise.
fn to_samples(t: f64, dt: f64) -> Option<usize> {
    if t.is_infinite() {
        None
    } else {
        Some((t / dt).round() as usize)
    }
}

fn eval(f: &StlFormula, k: usize, trace: &Trace) -> Tv {
    match f {
        StlFormula::TimedG(iv, conj) => eval_g(f, iv.a, iv.b, conj, k, trace),
        StlFormula::TimedF(iv, conj) => eval_f(f, iv.a, iv.b, conj, k, trace),
        StlFormula::TimedU(iv, c1, c2) => eval_u(f, iv.a, iv.b, c1, c2, k, trace),
        StlFormula::ImplG(ant, body) => eval_impl(ant, body, k, trace),
        StlFormula::And(children) => {
            let mut worst_false: Option<(usize, String)> = None;
            let mut unknown: Option<String> = None;
            for c in children {
                match eval(c, k, trace) {
                    Tv::True => {}
                    Tv::False { witness, subformula } => {
                        let earlier = worst_false
                            .as_ref()
                            .map_or(true, |(w, _)| witness < *w);
                        if earlier {
                            worst_false = Some((witness, subformula));
                        }
                    }
                    Tv::Unknown { reason } => {
                        unknown.get_or_insert(reason);
                    }
                }
            }
            if let Some((witness, subformula)) = worst_false {
                Tv::False { witness, subformula }
            } else if let Some(reason) = unknown {
                Tv::Unknown { reason }
            } else {
                Tv::True
            }
        }
    }
}

fn eval_g(f: &StlFormula, a: f64, b: f64, conj: &PredConj, k: usize, trace: &Trace) -> Tv {
    let ka = to_samples(a, trace.dt).expect("lower bounds are finite");
    let start = k + ka;
    let end = to_samples(b, trace.dt).map(|kb| k + kb);
    let last_recorded = trace.len() - 1;
    let scan_end = end.map_or(last_recorded, |e| e.min(last_recorded));
    for j in start..=scan_end {
        if j >= trace.len() {
            break;
        }
        if !conj.holds(&trace.states[j]) {
            return Tv::False {
                witness: j,
                subformula: f.to_string(),
            };
        }
    }
    match end {
        // Finite window extends past the trace: cannot conclude.
        Some(e) if e > last_recorded => Tv::Unknown {
            reason: format!(
                "window of `{}` extends past the end of the trace",
                f
            ),
        },
        // Untimed always: satisfied over the recorded horizon.
        _ => Tv::True,
    }
}

fn eval_f(f: &StlFormula, a: f64, b: f64, conj: &PredConj, k: usize, trace: &Trace) -> Tv {
    let ka = to_samples(a, trace.dt).expect("lower bounds are finite");
    let start = k + ka;
    match to_samples(b, trace.dt) {
        Some(kb) => {
            let end = k + kb;
            for j in start..=end.min(trace.len() - 1) {
                if conj.holds(&trace.states[j]) {
                    return Tv::True;
                }
            }
            if end >= trace.len() {
                Tv::Unknown {
                    reason: format!(
                        "window of `{}` extends past the end of the trace",
                        f
                    ),
                }
            } else {
                Tv::False {
                    witness: k,
                    subformula: f.to_string(),
                }
            }
        }
        // An unbounded eventually can never be refuted on a finite trace.
        None => {
            for j in start..trace.len() {
                if conj.holds(&trace.states[j]) {
                    return Tv::True;
                }
            }
            Tv::Unknown {
                reason: format!("`{}` found no witness before the trace ended", f),
            }
        }
    }
}

fn eval_u(
    f: &StlFormula,
    a: f64,
    b: f64,
    c1: &PredConj,
    c2: &PredConj,
    k: usize,
    trace: &Trace,
) -> Tv {
    let ka = to_samples(a, trace.dt).expect("lower bounds are finite");
    let kb = to_samples(b, trace.dt).expect("until deadlines are finite");
    let start = k + ka;
    let end = k + kb;
    for j in start..=end {
        if j >= trace.len() {
            return Tv::Unknown {
                reason: format!(
                    "window of `{}` extends past the end of the trace",
                    f
                ),
            };
        }
        // The witness time t2 must itself satisfy the left conjunct: the
        // semantics quantify phi1 over the closed interval [t+a, t2].
        if !c1.holds(&trace.states[j]) {
            return Tv::False {
                witness: j,
                subformula: f.to_string(),
            };
        }
        if c2.holds(&trace.states[j]) {
            return Tv::True;
        }
    }
    Tv::False {
        witness: k,
        subformula: f.to_string(),
    }
}

fn eval_impl(ant: &Antecedent, body: &StlFormula, k: usize, trace: &Trace) -> Tv {
    let holds_at = |j: usize| match ant {
        Antecedent::Env(e) => e.holds(&trace.events[j]),
        Antecedent::Pred(c) => c.holds(&trace.states[j]),
    };
    let mut worst_false: Option<(usize, String)> = None;
    let mut unknown: Option<String> = None;
    for j in k..trace.len() {
        let rising = holds_at(j) && (j == k || !holds_at(j - 1));
        if !rising {
            continue;
        }
        match eval(body, j, trace) {
            Tv::True => {}
            Tv::False { witness, subformula } => {
                let earlier = worst_false.as_ref().map_or(true, |(w, _)| witness < *w);
                if earlier {
                    worst_false = Some((witness, subformula));
                }
            }
            Tv::Unknown { reason } => {
                unknown.get_or_insert(reason);
            }
        }
    }
    if let Some((witness, subformula)) = worst_false {
        Tv::False { witness, subformula }
    } else if let Some(reason) = unknown {
        Tv::Unknown { reason }
    } else {
        Tv::True
    }
}
