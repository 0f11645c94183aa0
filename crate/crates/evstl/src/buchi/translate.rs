//! LTL to Buchi translation.
//!
//! Pipeline: rewrite to negation normal form over an interned arena (with
//! constant folding and `G a & G b => G (a & b)` merging), run the classic
//! tableau expansion into a generalized automaton whose acceptance sets come
//! from the until-subformulas, degeneralize lazily over reachable
//! (node, acceptance-level) pairs, then shrink the result by pruning
//! unreachable or dead states and merging states with identical outgoing
//! behavior.
//!
//! Two choices keep conjunctions of many obligations tractable. Tableau
//! nodes are identified only by their observable parts (literals, pending
//! obligations, acceptance bits), not by the full processed-formula set, so
//! branches that differ in bookkeeping collapse. And the degeneralization
//! counter jumps past every acceptance set the current node satisfies
//! instead of advancing one set per step, so most nodes live on a handful
//! of counter levels rather than all of them.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::abstraction::LtlFormula;

use super::{BoolExpr, BuchiAutomaton};

/// Construction aborts once this many states exist, unless overridden.
pub const DEFAULT_STATE_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error(
        "automaton construction exceeded {cap} states; simplify the specification or raise the state cap"
    )]
    StateCap { cap: usize },
}

pub fn translate(formula: &LtlFormula) -> Result<BuchiAutomaton, TranslateError> {
    translate_with_cap(formula, DEFAULT_STATE_CAP)
}

pub fn translate_with_cap(
    formula: &LtlFormula,
    cap: usize,
) -> Result<BuchiAutomaton, TranslateError> {
    let merged = merge_always(formula);
    let mut arena = Arena::new();
    let root = nnf(&merged, false, &mut arena);
    let seal = arena.seal();
    let untils = until_subformulas(root, &arena);
    let tableau = expand(root, &arena, &seal, &untils, cap)?;
    let ir = degeneralize(&tableau, untils.len(), cap)?;
    let ir = shrink(ir, &tableau.labels);
    Ok(materialize(&ir, &tableau.labels, &arena))
}

/// Rewrites every conjunction so that its `G`-conjuncts collapse into one.
/// `G a & G b` and `G (a & b)` have the same models, and a single `G` keeps
/// the tableau from tracking the conjuncts as independent obligations.
fn merge_always(f: &LtlFormula) -> LtlFormula {
    match f {
        LtlFormula::And(..) => {
            let mut flat = Vec::new();
            flatten_and(f, &mut flat);
            let mut bodies = Vec::new();
            let mut rest = Vec::new();
            for part in flat {
                match part {
                    LtlFormula::Always(b) => bodies.push(*b),
                    other => rest.push(other),
                }
            }
            if !bodies.is_empty() {
                rest.push(LtlFormula::always(LtlFormula::and_all(bodies)));
            }
            LtlFormula::and_all(rest)
        }
        LtlFormula::True | LtlFormula::False | LtlFormula::Prop(_) => f.clone(),
        LtlFormula::Not(a) => LtlFormula::not(merge_always(a)),
        LtlFormula::Or(a, b) => LtlFormula::or(merge_always(a), merge_always(b)),
        LtlFormula::Implies(a, b) => LtlFormula::implies(merge_always(a), merge_always(b)),
        LtlFormula::Next(a) => LtlFormula::next(merge_always(a)),
        LtlFormula::Until(a, b) => LtlFormula::until(merge_always(a), merge_always(b)),
        LtlFormula::Release(a, b) => LtlFormula::release(merge_always(a), merge_always(b)),
        LtlFormula::Eventually(a) => LtlFormula::eventually(merge_always(a)),
        LtlFormula::Always(a) => LtlFormula::always(merge_always(a)),
    }
}

fn flatten_and(f: &LtlFormula, out: &mut Vec<LtlFormula>) {
    if let LtlFormula::And(a, b) = f {
        flatten_and(a, out);
        flatten_and(b, out);
    } else {
        out.push(merge_always(f));
    }
}

/// Interned negation-normal-form node. Ids index into `Arena::nodes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum N {
    True,
    False,
    Lit { prop: u32, neg: bool },
    And(u32, u32),
    Or(u32, u32),
    X(u32),
    U(u32, u32),
    R(u32, u32),
}

struct Arena {
    nodes: Vec<N>,
    ids: HashMap<N, u32>,
    props: Vec<String>,
    prop_ids: HashMap<String, u32>,
}

const TRUE_ID: u32 = 0;
const FALSE_ID: u32 = 1;

impl Arena {
    fn new() -> Self {
        let mut a = Arena {
            nodes: Vec::new(),
            ids: HashMap::new(),
            props: Vec::new(),
            prop_ids: HashMap::new(),
        };
        assert_eq!(a.intern(N::True), TRUE_ID);
        assert_eq!(a.intern(N::False), FALSE_ID);
        a
    }

    fn intern(&mut self, n: N) -> u32 {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(n);
        self.ids.insert(n, id);
        id
    }

    fn prop_id(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.prop_ids.get(name) {
            return id;
        }
        let id = self.props.len() as u32;
        self.props.push(name.to_string());
        self.prop_ids.insert(name.to_string(), id);
        id
    }

    fn lit(&mut self, name: &str, neg: bool) -> u32 {
        let prop = self.prop_id(name);
        self.intern(N::Lit { prop, neg })
    }

    fn and(&mut self, a: u32, b: u32) -> u32 {
        if a == FALSE_ID || b == FALSE_ID {
            return FALSE_ID;
        }
        if a == TRUE_ID {
            return b;
        }
        if b == TRUE_ID || a == b {
            return a;
        }
        let (a, b) = (a.min(b), a.max(b));
        self.intern(N::And(a, b))
    }

    fn or(&mut self, a: u32, b: u32) -> u32 {
        if a == TRUE_ID || b == TRUE_ID {
            return TRUE_ID;
        }
        if a == FALSE_ID {
            return b;
        }
        if b == FALSE_ID || a == b {
            return a;
        }
        let (a, b) = (a.min(b), a.max(b));
        self.intern(N::Or(a, b))
    }

    fn next(&mut self, a: u32) -> u32 {
        if a == TRUE_ID || a == FALSE_ID {
            return a;
        }
        self.intern(N::X(a))
    }

    fn until(&mut self, a: u32, b: u32) -> u32 {
        if b == TRUE_ID || b == FALSE_ID {
            return b;
        }
        if a == FALSE_ID {
            return b;
        }
        self.intern(N::U(a, b))
    }

    fn release(&mut self, a: u32, b: u32) -> u32 {
        if b == TRUE_ID || b == FALSE_ID {
            return b;
        }
        if a == TRUE_ID {
            return b;
        }
        self.intern(N::R(a, b))
    }

    /// Interns the complement of every literal (so expansion never mutates
    /// the arena) and returns the complement table plus a mask of literal
    /// ids, both indexed by node id.
    fn seal(&mut self) -> Seal {
        let lits: Vec<(u32, N)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(id, &n)| match n {
                N::Lit { prop, neg } => Some((id as u32, N::Lit { prop, neg: !neg })),
                _ => None,
            })
            .collect();
        for &(_, compl) in &lits {
            self.intern(compl);
        }
        let words = bits_words(self.nodes.len());
        let mut complement = vec![u32::MAX; self.nodes.len()];
        let mut lit_mask = vec![0u64; words].into_boxed_slice();
        for (id, n) in self.nodes.iter().enumerate() {
            if let N::Lit { prop, neg } = *n {
                complement[id] = self.ids[&N::Lit { prop, neg: !neg }];
                bit_set(&mut lit_mask, id as u32);
            }
        }
        Seal {
            complement,
            lit_mask,
            words,
        }
    }
}

struct Seal {
    complement: Vec<u32>,
    lit_mask: Box<[u64]>,
    words: usize,
}

fn nnf(f: &LtlFormula, neg: bool, arena: &mut Arena) -> u32 {
    match f {
        LtlFormula::True => {
            if neg {
                FALSE_ID
            } else {
                TRUE_ID
            }
        }
        LtlFormula::False => {
            if neg {
                TRUE_ID
            } else {
                FALSE_ID
            }
        }
        LtlFormula::Prop(p) => arena.lit(p, neg),
        LtlFormula::Not(a) => nnf(a, !neg, arena),
        LtlFormula::And(a, b) => {
            let (x, y) = (nnf(a, neg, arena), nnf(b, neg, arena));
            if neg {
                arena.or(x, y)
            } else {
                arena.and(x, y)
            }
        }
        LtlFormula::Or(a, b) => {
            let (x, y) = (nnf(a, neg, arena), nnf(b, neg, arena));
            if neg {
                arena.and(x, y)
            } else {
                arena.or(x, y)
            }
        }
        LtlFormula::Implies(a, b) => {
            let (x, y) = (nnf(a, !neg, arena), nnf(b, neg, arena));
            if neg {
                // !(a -> b) == a & !b, with x = nnf(a, false)
                arena.and(x, y)
            } else {
                arena.or(x, y)
            }
        }
        LtlFormula::Next(a) => {
            let x = nnf(a, neg, arena);
            arena.next(x)
        }
        LtlFormula::Until(a, b) => {
            let (x, y) = (nnf(a, neg, arena), nnf(b, neg, arena));
            if neg {
                arena.release(x, y)
            } else {
                arena.until(x, y)
            }
        }
        LtlFormula::Release(a, b) => {
            let (x, y) = (nnf(a, neg, arena), nnf(b, neg, arena));
            if neg {
                arena.until(x, y)
            } else {
                arena.release(x, y)
            }
        }
        LtlFormula::Eventually(a) => {
            let x = nnf(a, neg, arena);
            if neg {
                arena.release(FALSE_ID, x)
            } else {
                arena.until(TRUE_ID, x)
            }
        }
        LtlFormula::Always(a) => {
            let x = nnf(a, neg, arena);
            if neg {
                arena.until(TRUE_ID, x)
            } else {
                arena.release(FALSE_ID, x)
            }
        }
    }
}

type Bits = Box<[u64]>;

fn bits_words(len: usize) -> usize {
    len.div_ceil(64).max(1)
}

fn bits_new(words: usize) -> Bits {
    vec![0u64; words].into_boxed_slice()
}

fn bit_set(b: &mut [u64], i: u32) {
    b[(i / 64) as usize] |= 1 << (i % 64);
}

fn bit_clear(b: &mut [u64], i: u32) {
    b[(i / 64) as usize] &= !(1 << (i % 64));
}

fn bit_get(b: &[u64], i: u32) -> bool {
    b[(i / 64) as usize] & (1 << (i % 64)) != 0
}

fn bits_first(b: &[u64]) -> Option<u32> {
    for (w, &word) in b.iter().enumerate() {
        if word != 0 {
            return Some(w as u32 * 64 + word.trailing_zeros());
        }
    }
    None
}

fn bits_iter(b: &[u64]) -> impl Iterator<Item = u32> + '_ {
    b.iter().enumerate().flat_map(|(w, &word)| {
        let mut rest = word;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let i = rest.trailing_zeros();
            rest &= rest - 1;
            Some(w as u32 * 64 + i)
        })
    })
}

/// Sentinel incoming-edge source for the initial node.
const INIT: usize = usize::MAX;

struct TNode {
    /// Index into `Tableau::labels`: the literal set entering edges assert.
    label: u32,
    /// Acceptance bit per until-subformula: the until is not pending here or
    /// its right side already holds.
    inset: Bits,
    incoming: BTreeSet<usize>,
}

struct Tableau {
    nodes: Vec<TNode>,
    /// Distinct literal sets, each a sorted list of literal node ids.
    labels: Vec<Vec<u32>>,
}

/// Tableau expansion. Work items split on disjunctions and on the
/// until/release fixpoint unfoldings until every obligation is atomic; each
/// finished node is keyed by its literals, acceptance bits, and deferred
/// obligations, so branches that differ only in which compound subformulas
/// were processed along the way collapse into one state.
fn expand(
    root: u32,
    arena: &Arena,
    seal: &Seal,
    untils: &[(u32, u32)],
    cap: usize,
) -> Result<Tableau, TranslateError> {
    #[derive(Clone)]
    struct Work {
        new: Bits,
        old: Bits,
        next: Bits,
        incoming: usize,
    }
    let words = seal.words;
    let inset_words = bits_words(untils.len());
    let mut nodes: Vec<TNode> = Vec::new();
    let mut labels: Vec<Vec<u32>> = Vec::new();
    let mut label_ids: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut lookup: HashMap<(Bits, Bits, Bits), usize> = HashMap::new();
    let mut first = Work {
        new: bits_new(words),
        old: bits_new(words),
        next: bits_new(words),
        incoming: INIT,
    };
    bit_set(&mut first.new, root);
    let mut stack = vec![first];
    while let Some(mut w) = stack.pop() {
        let Some(f) = bits_first(&w.new) else {
            let mut lit_words = w.old.clone();
            for (i, word) in lit_words.iter_mut().enumerate() {
                *word &= seal.lit_mask[i];
            }
            let mut inset = bits_new(inset_words);
            for (i, &(u, rhs)) in untils.iter().enumerate() {
                if !bit_get(&w.old, u) || bit_get(&w.old, rhs) {
                    bit_set(&mut inset, i as u32);
                }
            }
            let key = (lit_words.clone(), inset.clone(), w.next.clone());
            if let Some(&i) = lookup.get(&key) {
                nodes[i].incoming.insert(w.incoming);
            } else {
                let i = nodes.len();
                if i >= cap {
                    return Err(TranslateError::StateCap { cap });
                }
                lookup.insert(key, i);
                let lits: Vec<u32> = bits_iter(&lit_words).collect();
                let label = *label_ids.entry(lits).or_insert_with_key(|lits| {
                    labels.push(lits.clone());
                    (labels.len() - 1) as u32
                });
                stack.push(Work {
                    new: w.next.clone(),
                    old: bits_new(words),
                    next: bits_new(words),
                    incoming: i,
                });
                nodes.push(TNode {
                    label,
                    inset,
                    incoming: BTreeSet::from([w.incoming]),
                });
            }
            continue;
        };
        bit_clear(&mut w.new, f);
        if bit_get(&w.old, f) {
            stack.push(w);
            continue;
        }
        match arena.nodes[f as usize] {
            // True imposes nothing; False kills the branch.
            N::True => stack.push(w),
            N::False => {}
            N::Lit { .. } => {
                if !bit_get(&w.old, seal.complement[f as usize]) {
                    bit_set(&mut w.old, f);
                    stack.push(w);
                }
            }
            N::And(a, b) => {
                bit_set(&mut w.old, f);
                for c in [a, b] {
                    if !bit_get(&w.old, c) {
                        bit_set(&mut w.new, c);
                    }
                }
                stack.push(w);
            }
            N::Or(a, b) => {
                let mut w2 = w.clone();
                bit_set(&mut w.old, f);
                if !bit_get(&w.old, a) {
                    bit_set(&mut w.new, a);
                }
                stack.push(w);
                bit_set(&mut w2.old, f);
                if !bit_get(&w2.old, b) {
                    bit_set(&mut w2.new, b);
                }
                stack.push(w2);
            }
            N::X(a) => {
                bit_set(&mut w.old, f);
                bit_set(&mut w.next, a);
                stack.push(w);
            }
            // a U b: either b now, or a now and the until again next step.
            N::U(a, b) => {
                let mut w2 = w.clone();
                bit_set(&mut w.old, f);
                if !bit_get(&w.old, a) {
                    bit_set(&mut w.new, a);
                }
                bit_set(&mut w.next, f);
                stack.push(w);
                bit_set(&mut w2.old, f);
                if !bit_get(&w2.old, b) {
                    bit_set(&mut w2.new, b);
                }
                stack.push(w2);
            }
            // a R b: b now and either a now (released) or the release again.
            N::R(a, b) => {
                let mut w2 = w.clone();
                bit_set(&mut w.old, f);
                if !bit_get(&w.old, b) {
                    bit_set(&mut w.new, b);
                }
                bit_set(&mut w.next, f);
                stack.push(w);
                bit_set(&mut w2.old, f);
                for c in [a, b] {
                    if !bit_get(&w2.old, c) {
                        bit_set(&mut w2.new, c);
                    }
                }
                stack.push(w2);
            }
        }
    }
    Ok(Tableau { nodes, labels })
}

/// Until-subformulas reachable from the root, in interning order. Each one
/// contributes an acceptance set to the generalized automaton.
fn until_subformulas(root: u32, arena: &Arena) -> Vec<(u32, u32)> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![root];
    let mut out = Vec::new();
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        match arena.nodes[id as usize] {
            N::True | N::False | N::Lit { .. } => {}
            N::X(a) => stack.push(a),
            N::And(a, b) | N::Or(a, b) | N::R(a, b) => {
                stack.push(a);
                stack.push(b);
            }
            N::U(a, b) => {
                out.push((id, b));
                stack.push(a);
                stack.push(b);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Automaton over interned labels: `edges[s]` lists `(label, dst)` pairs
/// where `label` indexes the tableau's literal-set table.
struct Ir {
    initial: usize,
    accepting: Vec<bool>,
    edges: Vec<Vec<(u32, usize)>>,
}

impl Ir {
    fn num_states(&self) -> usize {
        self.accepting.len()
    }

    fn num_edges(&self) -> usize {
        self.edges.iter().map(|e| e.len()).sum()
    }
}

/// Builds the Buchi automaton from the tableau by walking only reachable
/// (node, level) pairs. Level `i` waits for acceptance set `i`; a node
/// advances the counter past every consecutive set it satisfies, and
/// completing the full round marks the pair accepting and restarts at zero.
fn degeneralize(tableau: &Tableau, k: usize, cap: usize) -> Result<Ir, TranslateError> {
    let n = tableau.nodes.len();
    let init = n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for (q, node) in tableau.nodes.iter().enumerate() {
        for &src in &node.incoming {
            adj[if src == INIT { init } else { src }].push(q);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    // scan(q, i): advance past consecutive satisfied sets; a full wrap to k
    // witnesses one round through every acceptance set.
    let scan = |q: usize, i: usize| -> (bool, usize) {
        let mut j = i;
        while j < k && (q == init || bit_get(&tableau.nodes[q].inset, j as u32)) {
            j += 1;
        }
        if j == k {
            (true, 0)
        } else {
            (false, j)
        }
    };
    if k == 0 {
        let edges = adj
            .iter()
            .map(|list| {
                list.iter()
                    .map(|&dst| (tableau.nodes[dst].label, dst))
                    .collect()
            })
            .collect();
        return Ok(Ir {
            initial: init,
            accepting: vec![true; n + 1],
            edges,
        });
    }
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut list: Vec<(usize, usize)> = Vec::new();
    let mut edges: Vec<Vec<(u32, usize)>> = Vec::new();
    let mut accepting: Vec<bool> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |q: usize,
                      lvl: usize,
                      list: &mut Vec<(usize, usize)>,
                      accepting: &mut Vec<bool>,
                      edges: &mut Vec<Vec<(u32, usize)>>,
                      queue: &mut VecDeque<usize>|
     -> Result<usize, TranslateError> {
        if let Some(&id) = ids.get(&(q, lvl)) {
            return Ok(id);
        }
        let id = list.len();
        if id >= cap {
            return Err(TranslateError::StateCap { cap });
        }
        ids.insert((q, lvl), id);
        list.push((q, lvl));
        accepting.push(scan(q, lvl).0);
        edges.push(Vec::new());
        queue.push_back(id);
        Ok(id)
    };
    let initial = intern(
        init,
        0,
        &mut list,
        &mut accepting,
        &mut edges,
        &mut queue,
    )?;
    while let Some(id) = queue.pop_front() {
        let (q, lvl) = list[id];
        let (_, next_lvl) = scan(q, lvl);
        let mut out = Vec::with_capacity(adj[q].len());
        for &dst in &adj[q] {
            let target = intern(
                dst,
                next_lvl,
                &mut list,
                &mut accepting,
                &mut edges,
                &mut queue,
            )?;
            out.push((tableau.nodes[dst].label, target));
        }
        edges[id] = out;
    }
    Ok(Ir {
        initial,
        accepting,
        edges,
    })
}

/// Size reduction that preserves the accepted language: prune states that
/// are unreachable or cannot reach an accepting cycle, and merge states with
/// identical acceptance and outgoing edges.
fn shrink(mut ir: Ir, labels: &[Vec<u32>]) -> Ir {
    for edges in &mut ir.edges {
        edges.sort_unstable();
        edges.dedup();
    }
    subsume_labels(&mut ir, labels);
    loop {
        let before = (ir.num_states(), ir.num_edges());
        let keep = reachable_filter(&ir);
        ir = prune(ir, keep);
        // A state nothing loops back into is visited at most once, so its
        // acceptance flag cannot matter; aligning the initial state's flag
        // with a behavioral twin lets the merge below collapse them.
        let init_has_incoming = ir
            .edges
            .iter()
            .flatten()
            .any(|&(_, dst)| dst == ir.initial);
        if !init_has_incoming {
            for s in 0..ir.num_states() {
                if s != ir.initial && ir.edges[s] == ir.edges[ir.initial] {
                    ir.accepting[ir.initial] = ir.accepting[s];
                    break;
                }
            }
        }
        while let Some(merged) = merge_once(&ir) {
            ir = merged;
        }
        // Merging can land edges with different labels on the same target,
        // opening fresh subsumption chances.
        subsume_labels(&mut ir, labels);
        let keep = live_filter(&ir);
        ir = prune(ir, keep);
        if (ir.num_states(), ir.num_edges()) == before {
            break;
        }
    }
    ir
}

/// Drops edges whose label conjunction contains another edge's label to the
/// same target: the wider conjunction admits a subset of the assignments, so
/// removing it keeps the language intact.
fn subsume_labels(ir: &mut Ir, labels: &[Vec<u32>]) {
    for edges in &mut ir.edges {
        if edges.len() < 2 {
            continue;
        }
        // Group by target, shortest label first, so each candidate only has
        // to look at already-kept labels in its own group.
        edges.sort_unstable_by_key(|&(l, dst)| (dst, labels[l as usize].len()));
        let mut kept: Vec<(u32, usize)> = Vec::with_capacity(edges.len());
        let mut group_start = 0usize;
        for i in 0..edges.len() {
            if i > 0 && edges[i].1 != edges[i - 1].1 {
                group_start = kept.len();
            }
            let cand = &labels[edges[i].0 as usize];
            let redundant = kept[group_start..]
                .iter()
                .any(|&(l, _)| subset_of(&labels[l as usize], cand));
            if !redundant {
                kept.push(edges[i]);
            }
        }
        kept.sort_unstable();
        *edges = kept;
    }
}

/// Subset test on sorted literal-id lists.
fn subset_of(small: &[u32], big: &[u32]) -> bool {
    if small.len() > big.len() {
        return false;
    }
    let mut j = 0;
    for &x in small {
        while j < big.len() && big[j] < x {
            j += 1;
        }
        if j == big.len() || big[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

fn reachable_filter(ir: &Ir) -> Vec<bool> {
    let mut keep = vec![false; ir.num_states()];
    let mut stack = vec![ir.initial];
    keep[ir.initial] = true;
    while let Some(s) = stack.pop() {
        for &(_, dst) in &ir.edges[s] {
            if !keep[dst] {
                keep[dst] = true;
                stack.push(dst);
            }
        }
    }
    keep
}

/// Keeps states that can still reach a cycle through an accepting state
/// (plus the initial state, so the automaton stays well-formed even when it
/// accepts nothing).
fn live_filter(ir: &Ir) -> Vec<bool> {
    let n = ir.num_states();
    let adj: Vec<Vec<u32>> = ir
        .edges
        .iter()
        .map(|edges| edges.iter().map(|&(_, dst)| dst as u32).collect())
        .collect();
    let scc = super::tarjan_scc(&adj);
    let mut nontrivial = vec![false; scc.count];
    let mut has_accepting = vec![false; scc.count];
    let mut size = vec![0usize; scc.count];
    for v in 0..n {
        size[scc.comp[v]] += 1;
    }
    for v in 0..n {
        let c = scc.comp[v];
        if size[c] > 1 || adj[v].contains(&(v as u32)) {
            nontrivial[c] = true;
        }
        if ir.accepting[v] {
            has_accepting[c] = true;
        }
    }
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (src, outs) in adj.iter().enumerate() {
        for &dst in outs {
            radj[dst as usize].push(src);
        }
    }
    let mut keep = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    for v in 0..n {
        let c = scc.comp[v];
        if nontrivial[c] && has_accepting[c] {
            keep[v] = true;
            stack.push(v);
        }
    }
    while let Some(s) = stack.pop() {
        for &p in &radj[s] {
            if !keep[p] {
                keep[p] = true;
                stack.push(p);
            }
        }
    }
    keep[ir.initial] = true;
    keep
}

fn prune(ir: Ir, keep: Vec<bool>) -> Ir {
    if keep.iter().all(|&k| k) {
        return ir;
    }
    let mut renumber = vec![usize::MAX; ir.num_states()];
    let mut n = 0;
    for s in 0..ir.num_states() {
        if keep[s] {
            renumber[s] = n;
            n += 1;
        }
    }
    let mut edges = vec![Vec::new(); n];
    let mut accepting = vec![false; n];
    for s in 0..ir.num_states() {
        if !keep[s] {
            continue;
        }
        accepting[renumber[s]] = ir.accepting[s];
        edges[renumber[s]] = ir.edges[s]
            .iter()
            .filter(|&&(_, dst)| keep[dst])
            .map(|&(label, dst)| (label, renumber[dst]))
            .collect();
    }
    Ir {
        initial: renumber[ir.initial],
        accepting,
        edges,
    }
}

/// One round of merging states whose acceptance flag and outgoing edge sets
/// coincide. Returns None when nothing merges.
fn merge_once(ir: &Ir) -> Option<Ir> {
    let mut rep_of_sig: BTreeMap<(bool, &[(u32, usize)]), usize> = BTreeMap::new();
    let mut rep = vec![0usize; ir.num_states()];
    let mut changed = false;
    for s in 0..ir.num_states() {
        let r = *rep_of_sig
            .entry((ir.accepting[s], ir.edges[s].as_slice()))
            .or_insert(s);
        rep[s] = r;
        if r != s {
            changed = true;
        }
    }
    if !changed {
        return None;
    }
    let keep: Vec<bool> = (0..ir.num_states()).map(|s| rep[s] == s).collect();
    let mut renumber = vec![usize::MAX; ir.num_states()];
    let mut n = 0;
    for s in 0..ir.num_states() {
        if keep[s] {
            renumber[s] = n;
            n += 1;
        }
    }
    let mut edges = vec![Vec::new(); n];
    let mut accepting = vec![false; n];
    for s in 0..ir.num_states() {
        if !keep[s] {
            continue;
        }
        accepting[renumber[s]] = ir.accepting[s];
        let mut out: Vec<(u32, usize)> = ir.edges[s]
            .iter()
            .map(|&(label, dst)| (label, renumber[rep[dst]]))
            .collect();
        out.sort_unstable();
        out.dedup();
        edges[renumber[s]] = out;
    }
    Some(Ir {
        initial: renumber[rep[ir.initial]],
        accepting,
        edges,
    })
}

fn materialize(ir: &Ir, labels: &[Vec<u32>], arena: &Arena) -> BuchiAutomaton {
    let exprs: Vec<BoolExpr> = labels
        .iter()
        .map(|lits| {
            BoolExpr::conj_of_literals(
                lits.iter()
                    .map(|&id| match arena.nodes[id as usize] {
                        N::Lit { prop, neg } => (arena.props[prop as usize].clone(), neg),
                        _ => unreachable!("labels hold only literal ids"),
                    })
                    .collect(),
            )
        })
        .collect();
    let transitions: Vec<Vec<(BoolExpr, usize)>> = ir
        .edges
        .iter()
        .map(|edges| {
            let mut out: Vec<(BoolExpr, usize)> = edges
                .iter()
                .map(|&(label, dst)| (exprs[label as usize].clone(), dst))
                .collect();
            out.sort();
            out.dedup();
            out
        })
        .collect();
    let mut aps = BTreeSet::new();
    for edges in &transitions {
        for (label, _) in edges {
            aps.extend(label.props());
        }
    }
    BuchiAutomaton {
        num_states: ir.num_states(),
        initial: ir.initial,
        accepting: ir.accepting.clone(),
        transitions,
        aps,
    }
}

/// A conjunction of literals is unsatisfiable iff it contains `false` or a
/// complementary pair.
#[cfg(test)]
fn conj_unsat(label: &BoolExpr) -> bool {
    fn walk(e: &BoolExpr, pos: &mut BTreeSet<String>, neg: &mut BTreeSet<String>) -> bool {
        match e {
            BoolExpr::True => false,
            BoolExpr::False => true,
            BoolExpr::Prop(p) => {
                pos.insert(p.clone());
                neg.contains(p)
            }
            BoolExpr::Not(inner) => match inner.as_ref() {
                BoolExpr::Prop(p) => {
                    neg.insert(p.clone());
                    pos.contains(p)
                }
                _ => false,
            },
            BoolExpr::And(es) => es.iter().any(|e| walk(e, pos, neg)),
            BoolExpr::Or(_) => false,
        }
    }
    walk(label, &mut BTreeSet::new(), &mut BTreeSet::new())
}
