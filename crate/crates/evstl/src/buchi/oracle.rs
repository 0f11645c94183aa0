//! Direct LTL evaluation on ultimately periodic words.
//!
//! This is the reference semantics the automaton construction is tested
//! against, so it deliberately shares nothing with the tableau: subformulas
//! are evaluated bottom-up on the finite quotient of `prefix . cycle^omega`,
//! with least fixpoints for until/eventually and greatest fixpoints for
//! release/always.
//!
//! The cycle part is solved once per cycle; prefixes then cost a single
//! backward pass each, which keeps exhaustive lasso enumeration cheap when
//! many prefixes share a cycle.

use crate::abstraction::LtlFormula;

use super::Letter;

pub fn ltl_holds_on_lasso(f: &LtlFormula, prefix: &[Letter], cycle: &[Letter]) -> bool {
    CycleOracle::new(f, cycle).holds_with_prefix(prefix)
}

enum SubOp<'f> {
    True,
    False,
    Prop(&'f str),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Implies(usize, usize),
    Next(usize),
    Until(usize, usize),
    Release(usize, usize),
    Eventually(usize),
    Always(usize),
}

/// Truth tables for every subformula of one LTL formula on the positions of
/// a fixed cycle, reusable across lasso prefixes.
pub struct CycleOracle<'f> {
    /// Subformulas in post-order, children before parents.
    subs: Vec<SubOp<'f>>,
    root: usize,
    tables: Vec<Vec<bool>>,
}

impl<'f> CycleOracle<'f> {
    pub fn new(f: &'f LtlFormula, cycle: &[Letter]) -> Self {
        assert!(!cycle.is_empty(), "a lasso cycle must be non-empty");
        let mut subs = Vec::new();
        let root = index_subformulas(f, &mut subs);
        let len = cycle.len();
        let mut tables: Vec<Vec<bool>> = Vec::with_capacity(subs.len());
        for (i, op) in subs.iter().enumerate() {
            let table = match op {
                SubOp::True => vec![true; len],
                SubOp::False => vec![false; len],
                SubOp::Prop(p) => cycle.iter().map(|l| l.contains(*p)).collect(),
                SubOp::Not(a) => tables[*a].iter().map(|v| !v).collect(),
                SubOp::And(a, b) => zip_with(&tables[*a], &tables[*b], |x, y| x && y),
                SubOp::Or(a, b) => zip_with(&tables[*a], &tables[*b], |x, y| x || y),
                SubOp::Implies(a, b) => zip_with(&tables[*a], &tables[*b], |x, y| !x || y),
                SubOp::Next(a) => (0..len).map(|t| tables[*a][(t + 1) % len]).collect(),
                SubOp::Until(a, b) => {
                    let (ta, tb) = (&tables[*a], &tables[*b]);
                    fixpoint(len, false, |v, t| tb[t] || (ta[t] && v[(t + 1) % len]))
                }
                SubOp::Release(a, b) => {
                    let (ta, tb) = (&tables[*a], &tables[*b]);
                    fixpoint(len, true, |v, t| tb[t] && (ta[t] || v[(t + 1) % len]))
                }
                SubOp::Eventually(a) => {
                    let ta = &tables[*a];
                    fixpoint(len, false, |v, t| ta[t] || v[(t + 1) % len])
                }
                SubOp::Always(a) => {
                    let ta = &tables[*a];
                    fixpoint(len, true, |v, t| ta[t] && v[(t + 1) % len])
                }
            };
            debug_assert_eq!(i, tables.len());
            tables.push(table);
        }
        CycleOracle { subs, root, tables }
    }

    /// Truth of the formula at position zero of `prefix . cycle^omega`.
    /// The prefix positions are acyclic, so one backward pass is exact.
    pub fn holds_with_prefix(&self, prefix: &[Letter]) -> bool {
        if prefix.is_empty() {
            return self.tables[self.root][0];
        }
        let mut after: Vec<bool> = (0..self.subs.len()).map(|i| self.tables[i][0]).collect();
        let mut cur = vec![false; self.subs.len()];
        for letter in prefix.iter().rev() {
            for (i, op) in self.subs.iter().enumerate() {
                cur[i] = match op {
                    SubOp::True => true,
                    SubOp::False => false,
                    SubOp::Prop(p) => letter.contains(*p),
                    SubOp::Not(a) => !cur[*a],
                    SubOp::And(a, b) => cur[*a] && cur[*b],
                    SubOp::Or(a, b) => cur[*a] || cur[*b],
                    SubOp::Implies(a, b) => !cur[*a] || cur[*b],
                    SubOp::Next(a) => after[*a],
                    SubOp::Until(a, b) => cur[*b] || (cur[*a] && after[i]),
                    SubOp::Release(a, b) => cur[*b] && (cur[*a] || after[i]),
                    SubOp::Eventually(a) => cur[*a] || after[i],
                    SubOp::Always(a) => cur[*a] && after[i],
                };
            }
            std::mem::swap(&mut after, &mut cur);
        }
        after[self.root]
    }
}

fn index_subformulas<'f>(f: &'f LtlFormula, subs: &mut Vec<SubOp<'f>>) -> usize {
    let op = match f {
        LtlFormula::True => SubOp::True,
        LtlFormula::False => SubOp::False,
        LtlFormula::Prop(p) => SubOp::Prop(p.as_str()),
        LtlFormula::Not(a) => SubOp::Not(index_subformulas(a, subs)),
        LtlFormula::And(a, b) => {
            SubOp::And(index_subformulas(a, subs), index_subformulas(b, subs))
        }
        LtlFormula::Or(a, b) => SubOp::Or(index_subformulas(a, subs), index_subformulas(b, subs)),
        LtlFormula::Implies(a, b) => {
            SubOp::Implies(index_subformulas(a, subs), index_subformulas(b, subs))
        }
        LtlFormula::Next(a) => SubOp::Next(index_subformulas(a, subs)),
        LtlFormula::Until(a, b) => {
            SubOp::Until(index_subformulas(a, subs), index_subformulas(b, subs))
        }
        LtlFormula::Release(a, b) => {
            SubOp::Release(index_subformulas(a, subs), index_subformulas(b, subs))
        }
        LtlFormula::Eventually(a) => SubOp::Eventually(index_subformulas(a, subs)),
        LtlFormula::Always(a) => SubOp::Always(index_subformulas(a, subs)),
    };
    subs.push(op);
    subs.len() - 1
}

fn zip_with(a: &[bool], b: &[bool], f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect()
}

/// Iterates `step` over all positions until stable. Monotone updates from a
/// uniform initial value converge within `len` sweeps.
fn fixpoint(len: usize, init: bool, step: impl Fn(&[bool], usize) -> bool) -> Vec<bool> {
    let mut v = vec![init; len];
    loop {
        let mut changed = false;
        for t in 0..len {
            let nv = step(&v, t);
            if nv != v[t] {
                v[t] = nv;
                changed = true;
            }
        }
        if !changed {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letter(props: &[&str]) -> Letter {
        props.iter().map(|p| p.to_string()).collect()
    }

    fn p() -> LtlFormula {
        LtlFormula::prop("p")
    }

    fn q() -> LtlFormula {
        LtlFormula::prop("q")
    }

    #[test]
    fn eventually_and_always_basics() {
        let fp = LtlFormula::eventually(p());
        assert!(ltl_holds_on_lasso(&fp, &[], &[letter(&["p"])]));
        assert!(!ltl_holds_on_lasso(&fp, &[], &[letter(&[])]));
        assert!(ltl_holds_on_lasso(&fp, &[letter(&["p"])], &[letter(&[])]));

        let gp = LtlFormula::always(p());
        assert!(ltl_holds_on_lasso(&gp, &[], &[letter(&["p"])]));
        assert!(!ltl_holds_on_lasso(&gp, &[letter(&[])], &[letter(&["p"])]));
        assert!(!ltl_holds_on_lasso(&gp, &[letter(&["p"])], &[letter(&[])]));
    }

    #[test]
    fn until_needs_left_side_up_to_witness() {
        let u = LtlFormula::until(p(), q());
        assert!(ltl_holds_on_lasso(
            &u,
            &[letter(&["p"]), letter(&["p"])],
            &[letter(&["q"])]
        ));
        // p fails before q arrives.
        assert!(!ltl_holds_on_lasso(
            &u,
            &[letter(&["p"]), letter(&[])],
            &[letter(&["q"])]
        ));
        // q never arrives.
        assert!(!ltl_holds_on_lasso(&u, &[], &[letter(&["p"])]));
    }

    #[test]
    fn next_wraps_into_the_cycle() {
        let xp = LtlFormula::next(p());
        assert!(ltl_holds_on_lasso(&xp, &[letter(&[])], &[letter(&["p"])]));
        assert!(ltl_holds_on_lasso(&xp, &[], &[letter(&["p"])]));
        assert!(!ltl_holds_on_lasso(
            &xp,
            &[],
            &[letter(&["p"]), letter(&[])]
        ));
    }

    #[test]
    fn response_shape_with_vacuous_and_real_cases() {
        let f = LtlFormula::always(LtlFormula::implies(
            LtlFormula::prop("alarm"),
            LtlFormula::eventually(p()),
        ));
        // No alarm ever: vacuously true.
        assert!(ltl_holds_on_lasso(&f, &[], &[letter(&[])]));
        // Alarm answered inside the cycle.
        assert!(ltl_holds_on_lasso(
            &f,
            &[],
            &[letter(&["alarm"]), letter(&["p"])]
        ));
        // Alarm in the cycle, p only in the prefix: violated.
        assert!(!ltl_holds_on_lasso(
            &f,
            &[letter(&["p"])],
            &[letter(&["alarm"])]
        ));
    }

    #[test]
    fn release_is_dual_to_until() {
        let r = LtlFormula::release(p(), q());
        let not_u = LtlFormula::not(LtlFormula::until(
            LtlFormula::not(p()),
            LtlFormula::not(q()),
        ));
        let alphabet = [letter(&[]), letter(&["p"]), letter(&["q"]), letter(&["p", "q"])];
        for a in &alphabet {
            for b in &alphabet {
                for split in 0..2 {
                    let word = [a.clone(), b.clone()];
                    let (prefix, cycle) = word.split_at(split);
                    assert_eq!(
                        ltl_holds_on_lasso(&r, prefix, &cycle.to_vec()),
                        ltl_holds_on_lasso(&not_u, prefix, &cycle.to_vec()),
                    );
                }
            }
        }
    }

    /// One-shot fixpoint evaluation over the whole quotient (prefix and
    /// cycle together), used to cross-check the incremental implementation.
    fn holds_one_shot(f: &LtlFormula, prefix: &[Letter], cycle: &[Letter]) -> bool {
        let word: Vec<&Letter> = prefix.iter().chain(cycle.iter()).collect();
        let n = word.len();
        let succ = |t: usize| if t + 1 < n { t + 1 } else { prefix.len() };
        fn truth(
            f: &LtlFormula,
            word: &[&Letter],
            succ: &dyn Fn(usize) -> usize,
        ) -> Vec<bool> {
            let n = word.len();
            match f {
                LtlFormula::True => vec![true; n],
                LtlFormula::False => vec![false; n],
                LtlFormula::Prop(p) => word.iter().map(|l| l.contains(p)).collect(),
                LtlFormula::Not(a) => truth(a, word, succ).iter().map(|v| !v).collect(),
                LtlFormula::And(a, b) => {
                    zip_with(&truth(a, word, succ), &truth(b, word, succ), |x, y| x && y)
                }
                LtlFormula::Or(a, b) => {
                    zip_with(&truth(a, word, succ), &truth(b, word, succ), |x, y| x || y)
                }
                LtlFormula::Implies(a, b) => {
                    zip_with(&truth(a, word, succ), &truth(b, word, succ), |x, y| !x || y)
                }
                LtlFormula::Next(a) => {
                    let ta = truth(a, word, succ);
                    (0..n).map(|t| ta[succ(t)]).collect()
                }
                LtlFormula::Until(a, b) => {
                    let (ta, tb) = (truth(a, word, succ), truth(b, word, succ));
                    fixpoint(n, false, |v, t| tb[t] || (ta[t] && v[succ(t)]))
                }
                LtlFormula::Release(a, b) => {
                    let (ta, tb) = (truth(a, word, succ), truth(b, word, succ));
                    fixpoint(n, true, |v, t| tb[t] && (ta[t] || v[succ(t)]))
                }
                LtlFormula::Eventually(a) => {
                    let ta = truth(a, word, succ);
                    fixpoint(n, false, |v, t| ta[t] || v[succ(t)])
                }
                LtlFormula::Always(a) => {
                    let ta = truth(a, word, succ);
                    fixpoint(n, true, |v, t| ta[t] && v[succ(t)])
                }
            }
        }
        truth(f, &word, &succ)[0]
    }

    #[test]
    fn incremental_matches_one_shot_evaluation() {
        let formulas = vec![
            LtlFormula::eventually(LtlFormula::and(p(), LtlFormula::next(q()))),
            LtlFormula::always(LtlFormula::or(p(), LtlFormula::eventually(q()))),
            LtlFormula::until(LtlFormula::not(p()), LtlFormula::always(q())),
            LtlFormula::release(q(), LtlFormula::or(p(), LtlFormula::next(p()))),
            LtlFormula::implies(LtlFormula::eventually(p()), LtlFormula::eventually(q())),
            LtlFormula::next(LtlFormula::next(LtlFormula::always(p()))),
        ];
        let alphabet = [letter(&[]), letter(&["p"]), letter(&["q"]), letter(&["p", "q"])];
        let mut words: Vec<Vec<Letter>> = vec![Vec::new()];
        for _ in 0..3 {
            let mut next = Vec::new();
            for w in &words {
                for l in &alphabet {
                    let mut w2 = w.clone();
                    w2.push(l.clone());
                    next.push(w2);
                }
            }
            for f in &formulas {
                for w in &next {
                    for split in 0..w.len() {
                        let (prefix, cycle) = w.split_at(split);
                        let cycle = cycle.to_vec();
                        assert_eq!(
                            ltl_holds_on_lasso(f, prefix, &cycle),
                            holds_one_shot(f, prefix, &cycle),
                            "formula {} prefix {:?} cycle {:?}",
                            f,
                            prefix,
                            cycle
                        );
                    }
                }
            }
            words = next;
        }
    }
}
