//! A-priori and runtime feasibility feedback.
//!
//! Before execution: flag transition labels demanding provably disjoint
//! regions, and environment-event combinations a state cannot answer.
//! During execution: compare each goal barrier's distance-to-satisfaction
//! against the reachable distance before its deadline, and wrap QP
//! infeasibility into a fatal report. All checks are conservative; a
//! warning is advice, a fatal event stops the run.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::abstraction::ControlledProp;
use crate::buchi::BuchiAutomaton;
use crate::cbf::CbfInstance;
use crate::controller::ControlError;
use crate::formula::{PredLiteral, PredicateFunction};
use crate::planner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    PossibleConflict,
    InadmissibleEnv,
    Unreachable,
    QpInfeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Fatal,
}

/// One diagnostic. Warnings are a-priori and conservative; fatal events
/// halt the execution that raised them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub kind: FeedbackKind,
    pub location: String,
    pub detail: String,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeedbackError {
    #[error("{count} environment events exceed the enumeration cap of {cap}")]
    TooManyEvents { count: usize, cap: usize },
}

/// Conflict scan output: provably-empty pairs as warnings, plus the pairs
/// the static tests cannot decide (kept separate so a conflict count stays
/// meaningful).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub conflicts: Vec<FeedbackEvent>,
    pub unchecked: Vec<String>,
}

/// Scans every transition label: for each minimal set of controlled props
/// that could be demanded together, tests same-dimension pairs for empty
/// intersection. Timing is ignored, so a flagged pair may still be
/// satisfiable one after the other; an unflagged pair is genuinely
/// co-satisfiable in space.
pub fn apriori_conflicts(
    automaton: &BuchiAutomaton,
    events: &BTreeSet<String>,
    props: &BTreeMap<String, ControlledProp>,
) -> ConflictReport {
    let mut report = ConflictReport::default();
    let mut seen_conflicts: BTreeSet<(String, String)> = BTreeSet::new();
    let mut seen_unchecked: BTreeSet<(String, String)> = BTreeSet::new();
    for (src, edges) in automaton.transitions.iter().enumerate() {
        for (label, dst) in edges {
            let mentioned: Vec<String> = label
                .props()
                .into_iter()
                .filter(|p| events.contains(p))
                .collect();
            if mentioned.len() > 12 {
                continue;
            }
            let mut demanded: BTreeSet<BTreeSet<String>> = BTreeSet::new();
            for bits in 0..(1u32 << mentioned.len()) {
                let sigma: BTreeSet<String> = mentioned
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| bits & (1 << i) != 0)
                    .map(|(_, p)| p.clone())
                    .collect();
                if let Ok(sets) = planner::minimal_true_sets(label, events, &sigma) {
                    demanded.extend(sets);
                }
            }
            for set in &demanded {
                let names: Vec<&String> = set.iter().collect();
                for i in 0..names.len() {
                    for j in i + 1..names.len() {
                        let (Some(a), Some(b)) = (props.get(names[i]), props.get(names[j]))
                        else {
                            continue;
                        };
                        let key = (names[i].clone(), names[j].clone());
                        match pair_test(&a.literal, &b.literal) {
                            PairVerdict::Conflict(reason) => {
                                if seen_conflicts.insert(key) {
                                    report.conflicts.push(FeedbackEvent {
                                        kind: FeedbackKind::PossibleConflict,
                                        location: format!(
                                            "transition {} -> {}",
                                            automaton.state_name(src),
                                            automaton.state_name(*dst)
                                        ),
                                        detail: format!(
                                            "{} and {} cannot hold together: {}",
                                            names[i], names[j], reason
                                        ),
                                        severity: Severity::Warning,
                                    });
                                }
                            }
                            PairVerdict::Unchecked(reason) => {
                                if seen_unchecked.insert(key) {
                                    report.unchecked.push(format!(
                                        "{} with {}: {}",
                                        names[i], names[j], reason
                                    ));
                                }
                            }
                            PairVerdict::Compatible => {}
                        }
                    }
                }
            }
        }
    }
    report
}

enum PairVerdict {
    Conflict(String),
    Unchecked(String),
    Compatible,
}

/// Predicate region with negation folded in. Sphere and halfspace
/// negations are again spheres and halfspaces; a negated angle band or any
/// pair-distance literal has no closed-form emptiness test here.
enum Shape {
    Inner { center: Vec<f64>, radius: f64 },
    Outer { center: Vec<f64>, radius: f64 },
    Half { normal: Vec<f64>, offset: f64 },
    Band { target: f64, tolerance: f64 },
    Opaque(&'static str),
}

fn canonical_shape(lit: &PredLiteral) -> (Vec<usize>, Shape) {
    let neg = lit.negated;
    match &lit.pred.func {
        PredicateFunction::SphereInner {
            dims,
            center,
            radius,
        } => {
            let s = if neg {
                Shape::Outer {
                    center: center.clone(),
                    radius: *radius,
                }
            } else {
                Shape::Inner {
                    center: center.clone(),
                    radius: *radius,
                }
            };
            (dims.clone(), s)
        }
        PredicateFunction::SphereOuter {
            dims,
            center,
            radius,
        } => {
            let s = if neg {
                Shape::Inner {
                    center: center.clone(),
                    radius: *radius,
                }
            } else {
                Shape::Outer {
                    center: center.clone(),
                    radius: *radius,
                }
            };
            (dims.clone(), s)
        }
        PredicateFunction::Halfspace {
            dims,
            normal,
            offset,
        } => {
            let s = if neg {
                Shape::Half {
                    normal: normal.iter().map(|a| -a).collect(),
                    offset: -offset,
                }
            } else {
                Shape::Half {
                    normal: normal.clone(),
                    offset: *offset,
                }
            };
            (dims.clone(), s)
        }
        PredicateFunction::AngleAbsTarget {
            dim,
            target,
            tolerance,
        } => {
            let s = if neg {
                Shape::Opaque("negated angle band has no static emptiness test")
            } else {
                Shape::Band {
                    target: *target,
                    tolerance: *tolerance,
                }
            };
            (vec![*dim], s)
        }
        PredicateFunction::PairDistanceMin {
            dims_a, dims_b, ..
        } => {
            let mut dims = dims_a.clone();
            dims.extend_from_slice(dims_b);
            (
                dims,
                Shape::Opaque("pair-distance sets are unbounded; intersection not checked"),
            )
        }
    }
}

fn pair_test(a: &PredLiteral, b: &PredLiteral) -> PairVerdict {
    let (dims_a, shape_a) = canonical_shape(a);
    let (dims_b, shape_b) = canonical_shape(b);
    if dims_a.iter().all(|d| !dims_b.contains(d)) {
        return PairVerdict::Compatible;
    }
    if let Shape::Opaque(reason) = shape_a {
        return PairVerdict::Unchecked(reason.to_string());
    }
    if let Shape::Opaque(reason) = shape_b {
        return PairVerdict::Unchecked(reason.to_string());
    }
    if dims_a != dims_b {
        return PairVerdict::Unchecked(
            "predicates read overlapping but different dims; not checked".to_string(),
        );
    }
    match (&shape_a, &shape_b) {
        (
            Shape::Inner {
                center: c1,
                radius: r1,
            },
            Shape::Inner {
                center: c2,
                radius: r2,
            },
        ) => {
            let d = dist(c1, c2);
            if d >= r1 + r2 {
                PairVerdict::Conflict(format!(
                    "goal balls are disjoint (centers {:.3} apart, radii sum {:.3})",
                    d,
                    r1 + r2
                ))
            } else {
                PairVerdict::Compatible
            }
        }
        (
            Shape::Inner {
                center: ci,
                radius: ri,
            },
            Shape::Outer {
                center: co,
                radius: ro,
            },
        )
        | (
            Shape::Outer {
                center: co,
                radius: ro,
            },
            Shape::Inner {
                center: ci,
                radius: ri,
            },
        ) => {
            let d = dist(ci, co);
            if d + ri <= *ro {
                PairVerdict::Conflict(format!(
                    "goal ball lies inside the forbidden region (offset {:.3} + {:.3} <= {:.3})",
                    d, ri, ro
                ))
            } else {
                PairVerdict::Compatible
            }
        }
        (Shape::Outer { .. }, Shape::Outer { .. }) => PairVerdict::Compatible,
        (
            Shape::Inner { center, radius },
            Shape::Half { normal, offset },
        )
        | (
            Shape::Half { normal, offset },
            Shape::Inner { center, radius },
        ) => {
            let n = norm(normal);
            let signed: f64 = normal
                .iter()
                .zip(center.iter())
                .map(|(a, c)| a * c)
                .sum::<f64>()
                - offset;
            if n > 0.0 && signed + radius * n < 0.0 {
                PairVerdict::Conflict(
                    "goal ball lies strictly on the wrong side of the halfspace".to_string(),
                )
            } else {
                PairVerdict::Compatible
            }
        }
        (
            Shape::Half {
                normal: n1,
                offset: c1,
            },
            Shape::Half {
                normal: n2,
                offset: c2,
            },
        ) => {
            let (l1, l2) = (norm(n1), norm(n2));
            if l1 == 0.0 || l2 == 0.0 {
                return PairVerdict::Compatible;
            }
            let cosine: f64 =
                n1.iter().zip(n2.iter()).map(|(a, b)| a * b).sum::<f64>() / (l1 * l2);
            if cosine <= -1.0 + 1e-9 && c1 / l1 > -c2 / l2 {
                PairVerdict::Conflict("opposing halfspaces leave an empty slab".to_string())
            } else {
                PairVerdict::Compatible
            }
        }
        (
            Shape::Band {
                target: t1,
                tolerance: e1,
            },
            Shape::Band {
                target: t2,
                tolerance: e2,
            },
        ) => {
            // Bands constrain |angle|, so intersect within [0, inf).
            let lo = (t1 - e1).max(t2 - e2).max(0.0);
            let hi = (t1 + e1).min(t2 + e2);
            if lo > hi {
                PairVerdict::Conflict("angle bands are disjoint".to_string())
            } else {
                PairVerdict::Compatible
            }
        }
        _ => PairVerdict::Unchecked("no static test for this shape pair".to_string()),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// For each automaton state, enumerates full assignments over the
/// environment events the automaton mentions and reports those under which
/// no outgoing label is satisfiable by any controlled-prop valuation. Such
/// an assignment, if the environment produces it there, strands the plan.
pub fn apriori_inadmissible_env(
    automaton: &BuchiAutomaton,
    events: &BTreeSet<String>,
    cap: usize,
) -> Result<Vec<FeedbackEvent>, FeedbackError> {
    let mentioned: Vec<&String> = automaton.aps.iter().filter(|p| events.contains(*p)).collect();
    if mentioned.len() > cap {
        return Err(FeedbackError::TooManyEvents {
            count: mentioned.len(),
            cap,
        });
    }
    let mut out = Vec::new();
    for (state, edges) in automaton.transitions.iter().enumerate() {
        for bits in 0..(1u64 << mentioned.len()) {
            let sigma: BTreeSet<String> = mentioned
                .iter()
                .enumerate()
                .filter(|(i, _)| bits & (1 << i) != 0)
                .map(|(_, p)| (*p).clone())
                .collect();
            let answered = edges
                .iter()
                .any(|(label, _)| planner::admissible(label, events, &sigma));
            if !answered {
                let listed = if sigma.is_empty() {
                    "no events".to_string()
                } else {
                    sigma.iter().cloned().collect::<Vec<_>>().join(", ")
                };
                out.push(FeedbackEvent {
                    kind: FeedbackKind::InadmissibleEnv,
                    location: automaton.state_name(state),
                    detail: format!(
                        "environment assignment [{listed}] admits no outgoing transition"
                    ),
                    severity: Severity::Warning,
                });
            }
        }
    }
    Ok(out)
}

/// Per-sample reachability screen. For every registered goal barrier the
/// distance still to cover, measured on the dims the predicate reads, must
/// not exceed what the control box can travel before the deadline:
/// `|u_max| * (b + t_int - t)`. Strictly exceeding it is fatal; equality
/// is still (barely) reachable.
pub fn runtime_check<'a>(
    instances: impl IntoIterator<Item = &'a CbfInstance>,
    x: &[f64],
    t: f64,
    u_max: &[f64],
) -> Vec<FeedbackEvent> {
    let mut out = Vec::new();
    for inst in instances {
        if !inst.is_goal() {
            continue;
        }
        let deficit = (-inst.h(x)).max(0.0);
        if deficit == 0.0 {
            continue;
        }
        let dims = inst.dims();
        let speed = dims
            .iter()
            .map(|&d| u_max.get(d).copied().unwrap_or(0.0).powi(2))
            .sum::<f64>()
            .sqrt();
        let remaining = inst.interval.b + inst.t_int - t;
        let budget = speed * remaining.max(0.0);
        if deficit > budget {
            out.push(FeedbackEvent {
                kind: FeedbackKind::Unreachable,
                location: format!("t={t:.3}"),
                detail: format!(
                    "{}: needs {deficit:.3} units but at most {budget:.3} remain reachable",
                    inst.prop
                ),
                severity: Severity::Fatal,
            });
        }
    }
    out
}

/// Fatal wrapper around a QP infeasibility, with the constraint snapshot.
pub fn report_infeasible(err: &ControlError) -> FeedbackEvent {
    FeedbackEvent {
        kind: FeedbackKind::QpInfeasible,
        location: format!("t={:.3}, robot {}", err.t, err.robot),
        detail: format!(
            "no box control satisfies {:?} . u >= {:.4} (best {:.4})",
            err.gvec, err.rhs, err.inner.achieved
        ),
        severity: Severity::Fatal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::TemporalKind;
    use crate::buchi::BoolExpr;
    use crate::controller::Infeasible;
    use crate::formula::{Predicate, TimeInterval};

    fn ball_prop(name: &str, dims: Vec<usize>, center: Vec<f64>, radius: f64) -> ControlledProp {
        ControlledProp {
            name: name.to_string(),
            literal: PredLiteral {
                pred: Predicate {
                    name: name.to_string(),
                    func: PredicateFunction::SphereInner {
                        dims,
                        center,
                        radius,
                    },
                },
                negated: false,
            },
            interval: TimeInterval { a: 0.0, b: 10.0 },
            kind: TemporalKind::F,
        }
    }

    fn single_edge_automaton(label: BoolExpr) -> BuchiAutomaton {
        BuchiAutomaton {
            num_states: 1,
            initial: 0,
            accepting: vec![true],
            aps: label.props().into_iter().collect(),
            transitions: vec![vec![(label, 0)]],
        }
    }

    #[test]
    fn disjoint_goal_balls_conflict() {
        // The two goals of the hardware demo: 2*sqrt(2) apart, radii 0.5.
        let p1 = ball_prop("goal1", vec![0, 1], vec![-2.0, 1.0], 0.5);
        let p3 = ball_prop("goal3", vec![0, 1], vec![0.0, -1.0], 0.5);
        let props = BTreeMap::from([
            ("goal1".to_string(), p1),
            ("goal3".to_string(), p3),
        ]);
        let label = BoolExpr::And(vec![BoolExpr::prop("goal1"), BoolExpr::prop("goal3")]);
        let report = apriori_conflicts(&single_edge_automaton(label), &BTreeSet::new(), &props);
        assert_eq!(report.conflicts.len(), 1);
        assert_eq!(report.conflicts[0].kind, FeedbackKind::PossibleConflict);
        assert_eq!(report.conflicts[0].severity, Severity::Warning);
        assert!(report.conflicts[0].detail.contains("goal1"));
        assert!(report.conflicts[0].detail.contains("goal3"));
        assert!(report.unchecked.is_empty());
    }

    #[test]
    fn identical_and_distinct_robot_predicates_do_not_conflict() {
        let a = ball_prop("a", vec![0, 1], vec![1.0, 1.0], 0.5);
        let twin = ball_prop("b", vec![0, 1], vec![1.0, 1.0], 0.5);
        let other_robot = ball_prop("c", vec![2, 3], vec![-9.0, -9.0], 0.1);
        let props = BTreeMap::from([
            ("a".to_string(), a),
            ("b".to_string(), twin),
            ("c".to_string(), other_robot),
        ]);
        let label = BoolExpr::And(vec![
            BoolExpr::prop("a"),
            BoolExpr::prop("b"),
            BoolExpr::prop("c"),
        ]);
        let report = apriori_conflicts(&single_edge_automaton(label), &BTreeSet::new(), &props);
        assert!(report.conflicts.is_empty());
        assert!(report.unchecked.is_empty());
    }

    #[test]
    fn ball_inside_forbidden_region_conflicts() {
        let goal = ball_prop("goal", vec![0, 1], vec![0.2, 0.0], 1.0);
        let keep_out = ControlledProp {
            name: "out".to_string(),
            literal: PredLiteral {
                pred: Predicate {
                    name: "out".to_string(),
                    func: PredicateFunction::SphereOuter {
                        dims: vec![0, 1],
                        center: vec![0.0, 0.0],
                        radius: 5.0,
                    },
                },
                negated: false,
            },
            interval: TimeInterval::untimed(),
            kind: TemporalKind::G,
        };
        let props = BTreeMap::from([
            ("goal".to_string(), goal.clone()),
            ("out".to_string(), keep_out.clone()),
        ]);
        let label = BoolExpr::And(vec![BoolExpr::prop("goal"), BoolExpr::prop("out")]);
        let report = apriori_conflicts(&single_edge_automaton(label), &BTreeSet::new(), &props);
        assert_eq!(report.conflicts.len(), 1);

        // Same test via negation: !inside(big ball) canonicalizes to the
        // same forbidden region.
        let mut negated = keep_out;
        negated.literal.pred.func = PredicateFunction::SphereInner {
            dims: vec![0, 1],
            center: vec![0.0, 0.0],
            radius: 5.0,
        };
        negated.literal.negated = true;
        let props = BTreeMap::from([
            ("goal".to_string(), goal),
            ("out".to_string(), negated),
        ]);
        let label = BoolExpr::And(vec![BoolExpr::prop("goal"), BoolExpr::prop("out")]);
        let report = apriori_conflicts(&single_edge_automaton(label), &BTreeSet::new(), &props);
        assert_eq!(report.conflicts.len(), 1);
    }

    #[test]
    fn touching_balls_still_flagged_but_overlapping_not() {
        // Convention: tangency counts as disjoint (conservative).
        let a = ball_prop("a", vec![0, 1], vec![0.0, 0.0], 1.0);
        let b = ball_prop("b", vec![0, 1], vec![2.0, 0.0], 1.0);
        let props = BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]);
        let label = BoolExpr::And(vec![BoolExpr::prop("a"), BoolExpr::prop("b")]);
        let report = apriori_conflicts(&single_edge_automaton(label), &BTreeSet::new(), &props);
        assert_eq!(report.conflicts.len(), 1);

        let a = ball_prop("a", vec![0, 1], vec![0.0, 0.0], 1.0);
        let b = ball_prop("b", vec![0, 1], vec![1.9, 0.0], 1.0);
        let props = BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]);
        let label = BoolExpr::And(vec![BoolExpr::prop("a"), BoolExpr::prop("b")]);
        let report = apriori_conflicts(&single_edge_automaton(label), &BTreeSet::new(), &props);
        assert!(report.conflicts.is_empty());
    }

    #[test]
    fn pair_distance_pairs_are_reported_unchecked() {
        let goal = ball_prop("goal", vec![0, 1], vec![1.0, 1.0], 0.5);
        let sep = ControlledProp {
            name: "sep".to_string(),
            literal: PredLiteral {
                pred: Predicate {
                    name: "sep".to_string(),
                    func: PredicateFunction::PairDistanceMin {
                        dims_a: vec![0, 1],
                        dims_b: vec![2, 3],
                        min_distance: 0.5,
                    },
                },
                negated: false,
            },
            interval: TimeInterval::untimed(),
            kind: TemporalKind::G,
        };
        let props = BTreeMap::from([
            ("goal".to_string(), goal),
            ("sep".to_string(), sep),
        ]);
        let label = BoolExpr::And(vec![BoolExpr::prop("goal"), BoolExpr::prop("sep")]);
        let report = apriori_conflicts(&single_edge_automaton(label), &BTreeSet::new(), &props);
        assert!(report.conflicts.is_empty());
        assert_eq!(report.unchecked.len(), 1);
        assert!(report.unchecked[0].contains("pair-distance"));
    }

    #[test]
    fn state_that_cannot_answer_an_event_is_reported() {
        // Sole outgoing label !e: the assignment {e} strands the state.
        let label = BoolExpr::not(BoolExpr::prop("e"));
        let automaton = single_edge_automaton(label);
        let events = BTreeSet::from(["e".to_string()]);
        let found = apriori_inadmissible_env(&automaton, &events, 12).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, FeedbackKind::InadmissibleEnv);
        assert_eq!(found[0].location, "s0");
        assert!(found[0].detail.contains("e"));
    }

    #[test]
    fn responsive_automaton_has_no_inadmissible_assignment() {
        // s0 answers both alarm values: stay on !alarm, or move demanding p.
        let automaton = BuchiAutomaton {
            num_states: 2,
            initial: 0,
            accepting: vec![true, false],
            aps: BTreeSet::from(["alarm".to_string(), "p".to_string()]),
            transitions: vec![
                vec![
                    (BoolExpr::not(BoolExpr::prop("alarm")), 0),
                    (
                        BoolExpr::And(vec![BoolExpr::prop("alarm"), BoolExpr::prop("p")]),
                        1,
                    ),
                ],
                vec![(BoolExpr::prop("p"), 0)],
            ],
        };
        let events = BTreeSet::from(["alarm".to_string()]);
        let found = apriori_inadmissible_env(&automaton, &events, 12).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let label = BoolExpr::conj_of_literals(
            (0..13).map(|i| (format!("e{i}"), true)).collect(),
        );
        let automaton = single_edge_automaton(label);
        let events: BTreeSet<String> = (0..13).map(|i| format!("e{i}")).collect();
        let err = apriori_inadmissible_env(&automaton, &events, 12).unwrap_err();
        assert_eq!(err, FeedbackError::TooManyEvents { count: 13, cap: 12 });
    }

    #[test]
    fn far_goal_with_small_budget_is_unreachable() {
        let prop = ball_prop("far", vec![0, 1], vec![20.0, 20.0], 1.0);
        let inst = CbfInstance::activate(&prop, 0.0, &[0.0, 0.0]);
        let events = runtime_check([&inst], &[0.0, 0.0], 0.0, &[0.7, 0.7]);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, FeedbackKind::Unreachable);
        assert_eq!(events[0].severity, Severity::Fatal);
        // deficit sqrt(800) - 1, budget |[0.7,0.7]| * 10
        assert!(800f64.sqrt() - 1.0 > 0.7f64.hypot(0.7) * 10.0);
    }

    #[test]
    fn satisfied_or_barely_reachable_goals_stay_quiet() {
        // Inside the ball: deficit zero.
        let near = ball_prop("near", vec![0, 1], vec![0.0, 0.0], 1.0);
        let inst = CbfInstance::activate(&near, 0.0, &[0.2, 0.0]);
        assert!(runtime_check([&inst], &[0.2, 0.0], 0.0, &[0.7, 0.7]).is_empty());

        // Deficit exactly equal to the budget: strict comparison, no event.
        let edge = ControlledProp {
            interval: TimeInterval { a: 0.0, b: 2.0 },
            ..ball_prop("edge", vec![0], vec![3.0], 1.0)
        };
        let inst = CbfInstance::activate(&edge, 0.0, &[0.0]);
        assert_eq!(-inst.h(&[0.0]), 2.0);
        assert!(runtime_check([&inst], &[0.0], 0.0, &[1.0]).is_empty());
        // One tick later the budget shrank below the deficit.
        let late = runtime_check([&inst], &[0.0], 0.1, &[1.0]);
        assert_eq!(late.len(), 1);
    }

    #[test]
    fn invariance_barriers_are_not_reachability_checked() {
        let sep = ControlledProp {
            kind: TemporalKind::G,
            ..ball_prop("hold", vec![0, 1], vec![50.0, 50.0], 1.0)
        };
        let inst = CbfInstance::activate(&sep, 0.0, &[0.0, 0.0]);
        assert!(runtime_check([&inst], &[0.0, 0.0], 0.0, &[0.1, 0.1]).is_empty());
    }

    #[test]
    fn infeasibility_report_carries_the_constraint() {
        let err = ControlError {
            robot: 1,
            t: 3.25,
            gvec: vec![0.0, 1.0],
            rhs: 2.0,
            inner: Infeasible {
                achieved: 1.0,
                required: 2.0,
            },
        };
        let ev = report_infeasible(&err);
        assert_eq!(ev.kind, FeedbackKind::QpInfeasible);
        assert_eq!(ev.severity, Severity::Fatal);
        assert!(ev.location.contains("robot 1"));
        assert!(ev.detail.contains("2.0"));
    }
}
