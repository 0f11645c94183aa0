//! Symbolic planning on the Buchi automaton.
//!
//! At every sample the planner holds one active transition. When the
//! transition's label becomes true under the current state and events, the
//! automaton advances (at most one hop per sample); whenever the event set
//! changes or an advance happens, the plan is recomputed as the shortest
//! path to an accepting state that lies on a cycle, restricted to
//! transitions the current environment can satisfy. The controlled
//! propositions of the chosen transition's minimal satisfying set become
//! the active set driving the barrier controller.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::abstraction::ControlledProp;
use crate::buchi::{BoolExpr, BuchiAutomaton, Letter, StateSet};
use crate::formula::eval_h;

/// Subset enumeration limit for one label's controlled propositions.
pub const MAX_LABEL_PROPS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("no transition from state s{state} is admissible under events {{{events}}}")]
    InadmissibleEnvironment { state: usize, events: String },
    #[error("specification unrealizable: state s{state} cannot reach an accepting cycle")]
    SpecificationUnrealizable { state: usize },
    #[error("proposition `{name}` appears in the automaton but is neither an event nor a controlled proposition")]
    UnknownProposition { name: String },
    #[error("transition label mentions {count} controlled propositions, more than the supported {MAX_LABEL_PROPS}")]
    LabelTooWide { count: usize },
}

fn events_string(sigma: &Letter) -> String {
    sigma.iter().cloned().collect::<Vec<_>>().join(", ")
}

/// The transition the controller is currently trying to take.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveTransition {
    pub source: usize,
    pub target: usize,
    pub label: BoolExpr,
    /// Minimal set of controlled propositions that, made true, satisfy the
    /// label under the current events.
    pub active_props: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanStep {
    pub advanced: bool,
    pub replanned: bool,
}

#[derive(Debug)]
pub struct Planner {
    automaton: BuchiAutomaton,
    events: BTreeSet<String>,
    props: BTreeMap<String, ControlledProp>,
    /// Accepting states on a cycle: valid plan endpoints.
    good: StateSet,
    current: usize,
    active: ActiveTransition,
    last_events: Letter,
}

impl Planner {
    pub fn new(
        automaton: BuchiAutomaton,
        events: BTreeSet<String>,
        props: Vec<ControlledProp>,
        sigma0: &Letter,
    ) -> Result<Self, PlanError> {
        let props: BTreeMap<String, ControlledProp> =
            props.into_iter().map(|p| (p.name.clone(), p)).collect();
        for ap in &automaton.aps {
            if !events.contains(ap) && !props.contains_key(ap) {
                return Err(PlanError::UnknownProposition { name: ap.clone() });
            }
        }
        let good = automaton.accepting_cycle_anchors();
        let current = automaton.initial;
        let active = plan_from(&automaton, &events, &good, current, sigma0)?;
        Ok(Planner {
            automaton,
            events,
            props,
            good,
            current,
            active,
            last_events: sigma0.clone(),
        })
    }

    pub fn automaton(&self) -> &BuchiAutomaton {
        &self.automaton
    }

    pub fn events(&self) -> &BTreeSet<String> {
        &self.events
    }

    pub fn controlled_props(&self) -> &BTreeMap<String, ControlledProp> {
        &self.props
    }

    pub fn current_state(&self) -> usize {
        self.current
    }

    pub fn active(&self) -> &ActiveTransition {
        &self.active
    }

    /// Full truth assignment at one sample: events from sigma, controlled
    /// propositions from the sign of their predicate, active or not.
    pub fn assignment<'a>(&'a self, x: &'a [f64], sigma: &'a Letter) -> impl Fn(&str) -> bool + 'a {
        move |p: &str| {
            if self.events.contains(p) {
                sigma.contains(p)
            } else if let Some(cp) = self.props.get(p) {
                eval_h(&cp.literal, x) >= 0.0
            } else {
                false
            }
        }
    }

    /// One sample. Replanning fires iff the active label holds or the
    /// events changed; the replan first advances the automaton along a
    /// transition whose label is already true (at most one hop per sample),
    /// then searches for a fresh active transition from the new state.
    pub fn step(&mut self, x: &[f64], sigma: &Letter) -> Result<PlanStep, PlanError> {
        let truth = self.assignment(x, sigma);
        let active_true = self.active.label.eval(&truth);
        let replanned = active_true || *sigma != self.last_events;
        let next = if replanned {
            advance_state(
                &self.automaton,
                &self.events,
                &self.good,
                self.current,
                &self.active,
                &truth,
                sigma,
            )
        } else {
            None
        };
        drop(truth);
        let advanced = next.is_some();
        let before = self.current;
        if let Some(next) = next {
            self.current = next;
        }
        // Re-running the search is pointless when nothing it reads changed:
        // a self-loop fired in a state already planned from, under the same
        // events. That is every sample once the goal conjuncts discharge.
        let self_loop_held = advanced
            && self.current == before
            && *sigma == self.last_events
            && self.active.source == self.current;
        if replanned && !self_loop_held {
            self.active =
                plan_from(&self.automaton, &self.events, &self.good, self.current, sigma)?;
        }
        self.last_events = sigma.clone();
        Ok(PlanStep {
            advanced,
            replanned,
        })
    }
}

/// The advance half of replanning: take one transition whose label is
/// already true under the current assignment, so the automaton reads the
/// sample. Prefers the active transition when its label holds; otherwise
/// picks the true-labeled transition closest to acceptance (then smallest
/// target, then label order) for determinism. Returns None when no label
/// holds, in which case the automaton stays put.
#[allow(clippy::too_many_arguments)]
fn advance_state(
    automaton: &BuchiAutomaton,
    events: &BTreeSet<String>,
    good: &StateSet,
    from: usize,
    active: &ActiveTransition,
    truth: &impl Fn(&str) -> bool,
    sigma: &Letter,
) -> Option<usize> {
    if active.source == from && active.label.eval(truth) {
        return Some(active.target);
    }
    let candidates: Vec<&(BoolExpr, usize)> = automaton.transitions[from]
        .iter()
        .filter(|(label, _)| label.eval(truth))
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let dist = distances_to_good(automaton, good, |label| admissible(label, events, sigma));
    candidates
        .into_iter()
        .min_by(|(la, da), (lb, db)| {
            let ka = dist[*da].unwrap_or(usize::MAX);
            let kb = dist[*db].unwrap_or(usize::MAX);
            ka.cmp(&kb).then(da.cmp(db)).then(la.cmp(lb))
        })
        .map(|&(_, dst)| dst)
}

/// All inclusion-minimal sets of controlled propositions that satisfy
/// `label` when the events are fixed to `sigma`, ordered by cardinality and
/// then lexicographically. Empty result means the label is unsatisfiable
/// under this environment.
pub fn minimal_true_sets(
    label: &BoolExpr,
    events: &BTreeSet<String>,
    sigma: &Letter,
) -> Result<Vec<BTreeSet<String>>, PlanError> {
    if let Some(result) = literal_conj_fast_path(label, events, sigma) {
        return Ok(result);
    }
    let controlled: Vec<String> = label
        .props()
        .into_iter()
        .filter(|p| !events.contains(p))
        .collect();
    if controlled.len() > MAX_LABEL_PROPS {
        return Err(PlanError::LabelTooWide {
            count: controlled.len(),
        });
    }
    let mut sets: Vec<BTreeSet<String>> = Vec::new();
    for mask in 0..(1u32 << controlled.len()) {
        let chosen: BTreeSet<String> = controlled
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask & (1 << i) != 0)
            .map(|(_, p)| p.clone())
            .collect();
        let truth = |p: &str| {
            if events.contains(p) {
                sigma.contains(p)
            } else {
                chosen.contains(p)
            }
        };
        if label.eval(&truth) {
            sets.push(chosen);
        }
    }
    let mut minimal: Vec<BTreeSet<String>> = Vec::new();
    for s in &sets {
        if !sets.iter().any(|t| t.len() < s.len() && t.is_subset(s)) {
            minimal.push(s.clone());
        }
    }
    minimal.sort_by(|a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| a.iter().cmp(b.iter()))
    });
    minimal.dedup();
    Ok(minimal)
}

/// Labels produced by translation are conjunctions of literals, for which
/// satisfiability under fixed events and the unique minimal set are direct:
/// event literals must already agree with sigma, and the positive
/// controlled literals form the set.
fn literal_conj_fast_path(
    label: &BoolExpr,
    events: &BTreeSet<String>,
    sigma: &Letter,
) -> Option<Vec<BTreeSet<String>>> {
    fn literals<'l>(e: &'l BoolExpr, out: &mut Vec<(&'l str, bool)>) -> bool {
        match e {
            BoolExpr::True => true,
            BoolExpr::Prop(p) => {
                out.push((p, false));
                true
            }
            BoolExpr::Not(inner) => match inner.as_ref() {
                BoolExpr::Prop(p) => {
                    out.push((p, true));
                    true
                }
                _ => false,
            },
            BoolExpr::And(es) => es.iter().all(|e| literals(e, out)),
            _ => false,
        }
    }
    let mut lits = Vec::new();
    if !literals(label, &mut lits) {
        return None;
    }
    let mut positive = BTreeSet::new();
    let mut negative = BTreeSet::new();
    for (p, neg) in lits {
        if events.contains(p) {
            if sigma.contains(p) == neg {
                return Some(Vec::new());
            }
        } else if neg {
            negative.insert(p.to_string());
        } else {
            positive.insert(p.to_string());
        }
    }
    if positive.intersection(&negative).next().is_some() {
        return Some(Vec::new());
    }
    Some(vec![positive])
}

/// Whether some controlled-prop valuation makes `label` true under the
/// fixed environment letter `sigma`.
pub fn admissible(label: &BoolExpr, events: &BTreeSet<String>, sigma: &Letter) -> bool {
    match minimal_true_sets(label, events, sigma) {
        Ok(sets) => !sets.is_empty(),
        Err(_) => false,
    }
}

/// Shortest-path plan selection. Returns the first transition of a
/// minimal-length admissible path (at least one step) from `from` to an
/// accepting state on a cycle; ties break toward the smallest active set,
/// then the smallest target id.
pub fn plan_from(
    automaton: &BuchiAutomaton,
    events: &BTreeSet<String>,
    good: &StateSet,
    from: usize,
    sigma: &Letter,
) -> Result<ActiveTransition, PlanError> {
    let n = automaton.num_states;
    let first_steps: Vec<&(BoolExpr, usize)> = automaton.transitions[from]
        .iter()
        .filter(|(label, _)| admissible(label, events, sigma))
        .collect();

    // Distance from every state to the nearest good state over admissible
    // transitions, by reverse breadth-first search.
    let dist = distances_to_good(automaton, good, |label| admissible(label, events, sigma));
    let best = first_steps
        .iter()
        .filter_map(|(_, dst)| dist[*dst].map(|d| d + 1))
        .min();
    let Some(best) = best else {
        // Nothing admissible leads anywhere. Blame the environment when
        // acceptance would be reachable with different events, and the
        // specification itself when it would not.
        let unrestricted = distances_to_good(automaton, good, |_| true);
        let reachable_ignoring_env = automaton.transitions[from]
            .iter()
            .any(|(_, dst)| unrestricted[*dst].is_some());
        return Err(if reachable_ignoring_env {
            PlanError::InadmissibleEnvironment {
                state: from,
                events: events_string(sigma),
            }
        } else {
            PlanError::SpecificationUnrealizable { state: from }
        });
    };

    let mut chosen: Option<(usize, usize, ActiveTransition)> = None;
    for (label, dst) in first_steps {
        let Some(d) = dist[*dst] else { continue };
        if d + 1 != best {
            continue;
        }
        let sets = minimal_true_sets(label, events, sigma)?;
        let set = sets.into_iter().next().expect("admissible label has a set");
        let candidate = (set.len(), *dst);
        let better = match &chosen {
            None => true,
            Some((len, dst0, _)) => candidate < (*len, *dst0),
        };
        if better {
            chosen = Some((
                candidate.0,
                candidate.1,
                ActiveTransition {
                    source: from,
                    target: *dst,
                    label: label.clone(),
                    active_props: set,
                },
            ));
        }
    }
    debug_assert!(n > 0);
    Ok(chosen.expect("a best first step exists").2)
}

fn distances_to_good(
    automaton: &BuchiAutomaton,
    good: &StateSet,
    usable: impl Fn(&BoolExpr) -> bool,
) -> Vec<Option<usize>> {
    let n = automaton.num_states;
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (src, edges) in automaton.transitions.iter().enumerate() {
        for (label, dst) in edges {
            if usable(label) {
                radj[*dst].push(src);
            }
        }
    }
    let mut dist = vec![None; n];
    let mut queue = VecDeque::new();
    for s in good.iter() {
        dist[s] = Some(0);
        queue.push_back(s);
    }
    while let Some(s) = queue.pop_front() {
        let d = dist[s].unwrap();
        for &p in &radj[s] {
            if dist[p].is_none() {
                dist[p] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}
