//! Buchi automata over symbolic transition labels.
//!
//! States are dense indices; every transition carries a boolean expression
//! over atomic propositions (environment events plus controlled props). A
//! word letter is the set of propositions true at that sample, so a
//! transition can fire iff its label evaluates true under the letter.

mod oracle;
mod translate;

pub use oracle::{ltl_holds_on_lasso, CycleOracle};
pub use translate::{translate, translate_with_cap, TranslateError, DEFAULT_STATE_CAP};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A word letter: the set of propositions that are true at one sample.
pub type Letter = BTreeSet<String>;

/// Boolean expression over proposition names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoolExpr {
    True,
    False,
    Prop(String),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn prop(name: impl Into<String>) -> Self {
        BoolExpr::Prop(name.into())
    }

    pub fn not(e: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(e))
    }

    /// Conjunction of literals in canonical (sorted) order.
    pub fn conj_of_literals(mut lits: Vec<(String, bool)>) -> Self {
        lits.sort();
        lits.dedup();
        if lits.is_empty() {
            return BoolExpr::True;
        }
        let parts: Vec<BoolExpr> = lits
            .into_iter()
            .map(|(name, neg)| {
                if neg {
                    BoolExpr::not(BoolExpr::Prop(name))
                } else {
                    BoolExpr::Prop(name)
                }
            })
            .collect();
        if parts.len() == 1 {
            parts.into_iter().next().unwrap()
        } else {
            BoolExpr::And(parts)
        }
    }

    pub fn eval(&self, truth: &impl Fn(&str) -> bool) -> bool {
        match self {
            BoolExpr::True => true,
            BoolExpr::False => false,
            BoolExpr::Prop(p) => truth(p),
            BoolExpr::Not(e) => !e.eval(truth),
            BoolExpr::And(es) => es.iter().all(|e| e.eval(truth)),
            BoolExpr::Or(es) => es.iter().any(|e| e.eval(truth)),
        }
    }

    /// Truth under a letter (props in the set are true, all others false).
    pub fn eval_letter(&self, letter: &Letter) -> bool {
        self.eval(&|p| letter.contains(p))
    }

    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut BTreeSet<String>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Prop(p) => {
                out.insert(p.clone());
            }
            BoolExpr::Not(e) => e.collect_props(out),
            BoolExpr::And(es) | BoolExpr::Or(es) => {
                for e in es {
                    e.collect_props(out);
                }
            }
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl BoolExpr {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        let prec = match self {
            BoolExpr::True | BoolExpr::False | BoolExpr::Prop(_) => 4,
            BoolExpr::Not(_) => 3,
            BoolExpr::And(_) => 2,
            BoolExpr::Or(_) => 1,
        };
        let parens = prec < parent;
        if parens {
            write!(f, "(")?;
        }
        match self {
            BoolExpr::True => write!(f, "true")?,
            BoolExpr::False => write!(f, "false")?,
            BoolExpr::Prop(p) => write!(f, "{}", p)?,
            BoolExpr::Not(e) => {
                write!(f, "!")?;
                e.fmt_prec(f, 3)?;
            }
            BoolExpr::And(es) => {
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    e.fmt_prec(f, 2)?;
                }
            }
            BoolExpr::Or(es) => {
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    e.fmt_prec(f, 1)?;
                }
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// A nondeterministic Buchi automaton with symbolic transition labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuchiAutomaton {
    /// Number of states; state ids are `0..num_states`.
    pub num_states: usize,
    pub initial: usize,
    /// `accepting[s]` marks Buchi-accepting states.
    pub accepting: Vec<bool>,
    /// Outgoing transitions per state, sorted by (label, dst).
    pub transitions: Vec<Vec<(BoolExpr, usize)>>,
    /// Every proposition mentioned by any label.
    pub aps: BTreeSet<String>,
}

impl BuchiAutomaton {
    pub fn state_name(&self, s: usize) -> String {
        format!("s{}", s)
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().map(|t| t.len()).sum()
    }

    /// Renders one transition per line: `src -- label --> dst`, with
    /// accepting states flagged on their own lines first.
    pub fn dump(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        writeln!(out, "states: {}", self.num_states).unwrap();
        writeln!(out, "initial: {}", self.state_name(self.initial)).unwrap();
        let acc: Vec<String> = (0..self.num_states)
            .filter(|&s| self.accepting[s])
            .map(|s| self.state_name(s))
            .collect();
        writeln!(out, "accepting: {}", acc.join(" ")).unwrap();
        for (src, edges) in self.transitions.iter().enumerate() {
            for (label, dst) in edges {
                writeln!(
                    out,
                    "{} -- {} --> {}",
                    self.state_name(src),
                    label,
                    self.state_name(*dst)
                )
                .unwrap();
            }
        }
        out
    }

    /// States reachable from the initial state by reading `word`.
    pub fn reach_after_word(&self, word: &[Letter]) -> StateSet {
        let mut cur = StateSet::new(self.num_states);
        cur.insert(self.initial);
        for letter in word {
            let mut next = StateSet::new(self.num_states);
            for s in cur.iter() {
                for (label, dst) in &self.transitions[s] {
                    if label.eval_letter(letter) {
                        next.insert(*dst);
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// States `s` such that reading `cycle` forever from `s` admits an
    /// accepting run. A run is accepting iff the product of automaton states
    /// and cycle positions reaches a cycle through an accepting state.
    pub fn cycle_accepting_states(&self, cycle: &[Letter]) -> StateSet {
        assert!(!cycle.is_empty(), "a lasso cycle must be non-empty");
        let len = cycle.len();
        let n = self.num_states * len;
        let node = |s: usize, i: usize| s * len + i;
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for s in 0..self.num_states {
            for (i, letter) in cycle.iter().enumerate() {
                let j = (i + 1) % len;
                for (label, dst) in &self.transitions[s] {
                    if label.eval_letter(letter) {
                        adj[node(s, i)].push(node(*dst, j) as u32);
                    }
                }
            }
        }
        // Nodes on a cycle through an accepting automaton state: nontrivial
        // SCCs containing one, plus accepting self-loops.
        let scc = tarjan_scc(&adj);
        let mut scc_size = vec![0usize; scc.count];
        for &c in &scc.comp {
            scc_size[c] += 1;
        }
        let mut scc_good = vec![false; scc.count];
        let mut scc_nontrivial = vec![false; scc.count];
        for v in 0..n {
            let c = scc.comp[v];
            if scc_size[c] > 1 {
                scc_nontrivial[c] = true;
            }
            if adj[v].contains(&(v as u32)) {
                scc_nontrivial[c] = true;
            }
        }
        for v in 0..n {
            if self.accepting[v / len] {
                scc_good[scc.comp[v]] = true;
            }
        }
        let mut target = vec![false; n];
        for v in 0..n {
            let c = scc.comp[v];
            if scc_nontrivial[c] && scc_good[c] && self.accepting[v / len] {
                target[v] = true;
            }
        }
        // Backward reachability to the targets.
        let mut radj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (v, outs) in adj.iter().enumerate() {
            for &w in outs {
                radj[w as usize].push(v as u32);
            }
        }
        let mut can_reach = target.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&v| target[v]).collect();
        while let Some(v) = stack.pop() {
            for &w in &radj[v] {
                if !can_reach[w as usize] {
                    can_reach[w as usize] = true;
                    stack.push(w as usize);
                }
            }
        }
        let mut out = StateSet::new(self.num_states);
        for s in 0..self.num_states {
            if can_reach[node(s, 0)] {
                out.insert(s);
            }
        }
        out
    }

    /// Does the automaton accept the ultimately periodic word
    /// `prefix . cycle^omega`?
    pub fn accepts_lasso(&self, prefix: &[Letter], cycle: &[Letter]) -> bool {
        let reached = self.reach_after_word(prefix);
        let good = self.cycle_accepting_states(cycle);
        reached.intersects(&good)
    }

    /// Accepting states that lie on a cycle (of any labels): the valid
    /// endpoints of a planning prefix.
    pub fn accepting_cycle_anchors(&self) -> StateSet {
        let on_cycle = self.states_on_cycles();
        let mut out = StateSet::new(self.num_states);
        for s in 0..self.num_states {
            if self.accepting[s] && on_cycle.contains(s) {
                out.insert(s);
            }
        }
        out
    }

    /// States lying on some cycle that contains an accepting state; a run
    /// parked anywhere on such a cycle can still visit accepting states
    /// forever.
    pub fn states_on_accepting_cycles(&self) -> StateSet {
        let adj = self.adjacency();
        let scc = tarjan_scc(&adj);
        let mut nontrivial = vec![false; scc.count];
        let mut has_accepting = vec![false; scc.count];
        let mut size = vec![0usize; scc.count];
        for v in 0..self.num_states {
            size[scc.comp[v]] += 1;
        }
        for v in 0..self.num_states {
            let c = scc.comp[v];
            if size[c] > 1 || adj[v].contains(&(v as u32)) {
                nontrivial[c] = true;
            }
            if self.accepting[v] {
                has_accepting[c] = true;
            }
        }
        let mut out = StateSet::new(self.num_states);
        for v in 0..self.num_states {
            let c = scc.comp[v];
            if nontrivial[c] && has_accepting[c] {
                out.insert(v);
            }
        }
        out
    }

    fn states_on_cycles(&self) -> StateSet {
        let adj = self.adjacency();
        let scc = tarjan_scc(&adj);
        let mut size = vec![0usize; scc.count];
        for v in 0..self.num_states {
            size[scc.comp[v]] += 1;
        }
        let mut out = StateSet::new(self.num_states);
        for v in 0..self.num_states {
            if size[scc.comp[v]] > 1 || adj[v].contains(&(v as u32)) {
                out.insert(v);
            }
        }
        out
    }

    fn adjacency(&self) -> Vec<Vec<u32>> {
        self.transitions
            .iter()
            .map(|edges| edges.iter().map(|&(_, dst)| dst as u32).collect())
            .collect()
    }
}

/// Dense bitset over state ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSet {
    words: Vec<u64>,
    len: usize,
}

impl StateSet {
    pub fn new(len: usize) -> Self {
        StateSet {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersects(&self, other: &StateSet) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }
}

struct SccResult {
    /// Component index per node.
    comp: Vec<usize>,
    count: usize,
}

/// Iterative Tarjan strongly-connected components.
fn tarjan_scc(adj: &[Vec<u32>]) -> SccResult {
    const UNSET: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSET; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut count = 0usize;
    // Explicit DFS frames: (node, next edge offset).
    let mut frames: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        frames.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut ei)) = frames.last_mut() {
            if *ei < adj[v].len() {
                let w = adj[v][*ei] as usize;
                *ei += 1;
                if index[w] == UNSET {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp[w] = count;
                        if w == v {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    SccResult { comp, count }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letter(props: &[&str]) -> Letter {
        props.iter().map(|p| p.to_string()).collect()
    }

    /// Hand-built two-state automaton for `F p`: wait in s0, accept in s1.
    fn f_p_automaton() -> BuchiAutomaton {
        BuchiAutomaton {
            num_states: 2,
            initial: 0,
            accepting: vec![false, true],
            transitions: vec![
                vec![
                    (BoolExpr::True, 0),
                    (BoolExpr::prop("p"), 1),
                ],
                vec![(BoolExpr::True, 1)],
            ],
            aps: BTreeSet::from(["p".to_string()]),
        }
    }

    #[test]
    fn accepts_lasso_for_f_p() {
        let b = f_p_automaton();
        let none = letter(&[]);
        let p = letter(&["p"]);
        assert!(!b.accepts_lasso(&[], &[none.clone()]));
        assert!(b.accepts_lasso(&[], &[p.clone()]));
        assert!(b.accepts_lasso(&[p.clone()], &[none.clone()]));
        assert!(b.accepts_lasso(
            &[none.clone(), none.clone()],
            &[none.clone(), p, none]
        ));
    }

    #[test]
    fn cycle_analysis_anchors() {
        let b = f_p_automaton();
        let anchors = b.accepting_cycle_anchors();
        assert!(!anchors.contains(0));
        assert!(anchors.contains(1));
        let on = b.states_on_accepting_cycles();
        assert!(on.contains(1));
        assert!(!on.contains(0), "s0's self-loop cycle has no accepting state");
    }

    #[test]
    fn bool_expr_eval_and_display() {
        let e = BoolExpr::conj_of_literals(vec![
            ("alarm".to_string(), false),
            ("p".to_string(), true),
        ]);
        assert_eq!(e.to_string(), "alarm & !p");
        assert!(e.eval_letter(&letter(&["alarm"])));
        assert!(!e.eval_letter(&letter(&["alarm", "p"])));
        assert!(!e.eval_letter(&letter(&[])));
        assert_eq!(BoolExpr::conj_of_literals(vec![]), BoolExpr::True);
    }

    #[test]
    fn stateset_ops() {
        let mut a = StateSet::new(130);
        a.insert(0);
        a.insert(129);
        let mut b = StateSet::new(130);
        b.insert(129);
        assert!(a.intersects(&b));
        assert!(a.contains(129));
        assert!(!a.contains(64));
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![0, 129]);
    }

    #[test]
    fn tarjan_finds_components() {
        // 0 -> 1 -> 2 -> 0 forms an SCC; 3 hangs off it.
        let adj = vec![vec![1], vec![2], vec![0, 3], vec![]];
        let scc = tarjan_scc(&adj);
        assert_eq!(scc.comp[0], scc.comp[1]);
        assert_eq!(scc.comp[1], scc.comp[2]);
        assert_ne!(scc.comp[0], scc.comp[3]);
    }
}
