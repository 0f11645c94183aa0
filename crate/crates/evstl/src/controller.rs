//! Per-robot barrier-constrained control.
//!
//! Each sample: sync the CBF registry against the planner's active set,
//! then per robot build a nominal control toward the active goal regions,
//! combine that robot's barriers into one constraint, and solve the
//! min-norm box QP. The single linear constraint admits an exact solution
//! by clamped dual line search, so no QP package is involved.

use std::collections::{BTreeMap, BTreeSet};

use crate::abstraction::ControlledProp;
use crate::cbf::{combine, CbfInstance, CbfPart};
use crate::formula::PredicateFunction;

/// Joint-state dynamics `xdot = f + u` with constant drift and identity
/// input map, covering the paper-style holonomic robots.
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    pub dim: usize,
    pub drift: Vec<f64>,
}

impl Dynamics {
    pub fn driftless(dim: usize) -> Self {
        Dynamics {
            dim,
            drift: vec![0.0; dim],
        }
    }
}

/// One robot's slice of the joint state and its axis-aligned control box.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    pub dims: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RobotSpec {
    /// Zero control must be admissible, or a robot could not idle.
    pub fn validate(&self) -> bool {
        self.dims.len() == self.lower.len()
            && self.dims.len() == self.upper.len()
            && self
                .lower
                .iter()
                .zip(self.upper.iter())
                .all(|(&l, &u)| l <= 0.0 && 0.0 <= u)
    }
}

/// Activated barriers, keyed by proposition name.
#[derive(Debug, Clone, Default)]
pub struct CbfRegistry {
    active: BTreeMap<String, CbfInstance>,
}

impl CbfRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn instances(&self) -> impl Iterator<Item = &CbfInstance> {
        self.active.values()
    }

    /// Barriers that constrain the given robot right now: in their window
    /// and reading at least one of the robot's dims. Collision barriers show
    /// up in every robot they touch.
    pub fn relevant(&self, robot: &RobotSpec, t: f64) -> Vec<&CbfInstance> {
        self.instances()
            .filter(|inst| inst.in_window(t))
            .filter(|inst| inst.dims().iter().any(|d| robot.dims.contains(d)))
            .collect()
    }

    pub fn get(&self, prop: &str) -> Option<&CbfInstance> {
        self.active.get(prop)
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Aligns the registry with the planner's active set: propositions that
    /// left the set or whose windows closed retire, and newcomers activate
    /// with `t_int` = now. A proposition still active past its deadline is
    /// re-activated with a fresh window, so the controller keeps pursuing
    /// it (the monitor is what reports the missed deadline).
    pub fn sync(
        &mut self,
        active_props: &BTreeSet<String>,
        props: &BTreeMap<String, ControlledProp>,
        t: f64,
        x: &[f64],
    ) {
        self.active
            .retain(|name, inst| active_props.contains(name) && !inst.expired(t));
        for name in active_props {
            if !self.active.contains_key(name) {
                if let Some(cp) = props.get(name) {
                    self.active
                        .insert(name.clone(), CbfInstance::activate(cp, t, x));
                }
            }
        }
    }
}

/// QP verdict when no box point satisfies the barrier constraint.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("barrier constraint unsatisfiable in the control box: best {achieved:.6} < required {required:.6}")]
pub struct Infeasible {
    pub achieved: f64,
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("control infeasible for robot {robot} at t={t}: {inner}")]
pub struct ControlError {
    pub robot: usize,
    pub t: f64,
    /// Constraint snapshot: combined gradient slice and required bound.
    pub gvec: Vec<f64>,
    pub rhs: f64,
    #[source]
    pub inner: Infeasible,
}

pub struct Controller {
    pub robots: Vec<RobotSpec>,
    pub dynamics: Dynamics,
    pub gamma: f64,
    registry: CbfRegistry,
    /// Per robot, per robot-dim: the goal point the nominal last pulled
    /// toward. A discharged obligation leaves this behind, so the robot
    /// settles at its goal instead of stopping dead wherever the sample
    /// grid caught the discharge.
    rest: Vec<Vec<Option<f64>>>,
}

impl Controller {
    pub fn new(robots: Vec<RobotSpec>, dynamics: Dynamics, gamma: f64) -> Self {
        assert!(gamma > 0.0, "class-K gain must be positive");
        assert!(robots.iter().all(|r| r.validate()), "invalid control box");
        let rest = robots.iter().map(|r| vec![None; r.dims.len()]).collect();
        Controller {
            robots,
            dynamics,
            gamma,
            registry: CbfRegistry::new(),
            rest,
        }
    }

    pub fn registry(&self) -> &CbfRegistry {
        &self.registry
    }

    pub fn sync(
        &mut self,
        active_props: &BTreeSet<String>,
        props: &BTreeMap<String, ControlledProp>,
        t: f64,
        x: &[f64],
    ) {
        self.registry.sync(active_props, props, t, x);
        for (i, robot) in self.robots.iter().enumerate() {
            let targets = goal_targets(robot, &self.registry.relevant(robot, t), x);
            if targets.iter().any(Option::is_some) {
                self.rest[i] = targets;
            }
        }
    }

    /// Combined barrier value for one robot, for logging and invariance
    /// checks. None when the robot has no active barrier.
    pub fn combined_value(&self, robot: usize, t: f64, x: &[f64]) -> Option<f64> {
        let cbfs = self.registry.relevant(&self.robots[robot], t);
        if cbfs.is_empty() {
            return None;
        }
        Some(crate::cbf::combine_values(
            &cbfs.iter().map(|c| c.value(t, x)).collect::<Vec<_>>(),
        ))
    }

    /// One robot's control for this sample.
    pub fn control(&self, robot: usize, t: f64, x: &[f64]) -> Result<Vec<f64>, ControlError> {
        let spec = &self.robots[robot];
        let cbfs = self.registry.relevant(spec, t);
        let mut targets = goal_targets(spec, &cbfs, x);
        if targets.iter().all(Option::is_none) {
            targets.clone_from(&self.rest[robot]);
        }
        let u_hat = steer(spec, &targets, x);
        if cbfs.is_empty() {
            return Ok(solve_qp(&u_hat, None, &spec.lower, &spec.upper)
                .expect("unconstrained QP is always feasible"));
        }
        let parts: Vec<CbfPart> = cbfs
            .iter()
            .map(|c| CbfPart {
                value: c.value(t, x),
                gradient: c.gradient_or_zero(x),
                dt: c.time_derivative(),
            })
            .collect();
        // The log-sum-exp surrogate certifies safety while it is
        // nonnegative. Its slack grows with the member count (up to ln k
        // below the true minimum), so with several barriers of similar size
        // it goes negative even when every member is comfortably safe; in
        // that regime the constraint of record becomes the tightest member
        // barrier instead of the smoothed mix, whose softmin weights blur
        // far-away barriers into the gradient.
        let comb = combine(&parts);
        let active = if comb.value >= 0.0 {
            comb
        } else {
            parts
                .into_iter()
                .min_by(|a, b| a.value.total_cmp(&b.value))
                .expect("nonempty barrier list")
                .into_combined()
        };
        let gvec: Vec<f64> = spec.dims.iter().map(|&d| active.gradient[d]).collect();
        let drift_term: f64 = active
            .gradient
            .iter()
            .zip(self.dynamics.drift.iter())
            .map(|(g, f)| g * f)
            .sum();
        // Class-K term: the gain maps [0, inf) to [0, inf); below zero only
        // holding the line is demanded, not outrunning the deficit.
        let rhs = -self.gamma * active.value.max(0.0) - drift_term - active.dt;
        solve_qp(&u_hat, Some((&gvec, rhs)), &spec.lower, &spec.upper).map_err(|inner| {
            ControlError {
                robot,
                t,
                gvec,
                rhs,
                inner,
            }
        })
    }

    /// Controls for every robot, stopping at the first infeasibility.
    pub fn control_all(&self, t: f64, x: &[f64]) -> Result<Vec<Vec<f64>>, ControlError> {
        (0..self.robots.len()).map(|i| self.control(i, t, x)).collect()
    }
}

/// Proportional-pull gain in 1/s. Far from the goal the pull saturates the
/// control box (full speed); within `box / PULL_GAIN` of it the command
/// decays linearly to zero, so the rest position is an attractor of the
/// sampled dynamics instead of an artifact of which sample first crossed
/// the goal boundary.
const PULL_GAIN: f64 = 2.0;

/// Nominal control: head for the centroid of the active goal parking
/// points, full speed away from them and proportionally slower on final
/// approach, or stay put when nothing pulls. Each goal contributes a point
/// a comfortable margin inside its region on the robot's own approach
/// side, so robots sharing a region settle apart instead of stacking on
/// its center.
pub fn nominal(robot: &RobotSpec, cbfs: &[&CbfInstance], x: &[f64]) -> Vec<f64> {
    steer(robot, &goal_targets(robot, cbfs, x), x)
}

/// Per robot-dim mean of the goal pull points, None where no goal reads
/// the dim.
fn goal_targets(robot: &RobotSpec, cbfs: &[&CbfInstance], x: &[f64]) -> Vec<Option<f64>> {
    let n = robot.dims.len();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for inst in cbfs {
        if !inst.is_goal() {
            continue;
        }
        for (k, &d) in robot.dims.iter().enumerate() {
            if let Some(target) = target_coordinate(inst, d, x) {
                sums[k] += target;
                counts[k] += 1;
            }
        }
    }
    (0..n)
        .map(|k| (counts[k] > 0).then(|| sums[k] / counts[k] as f64))
        .collect()
}

/// Box-saturated proportional law toward the target point.
fn steer(robot: &RobotSpec, targets: &[Option<f64>], x: &[f64]) -> Vec<f64> {
    let n = robot.dims.len();
    let mut direction = vec![0.0; n];
    let mut norm2 = 0.0;
    for k in 0..n {
        if let Some(goal) = targets[k] {
            direction[k] = goal - x[robot.dims[k]];
            norm2 += direction[k] * direction[k];
        }
    }
    if norm2 < 1e-18 {
        return vec![0.0; n];
    }
    // Largest multiple of the direction that stays inside the box.
    let mut scale = f64::INFINITY;
    for k in 0..n {
        if direction[k] > 0.0 {
            scale = scale.min(robot.upper[k] / direction[k]);
        } else if direction[k] < 0.0 {
            scale = scale.min(robot.lower[k] / direction[k]);
        }
    }
    if !scale.is_finite() {
        return vec![0.0; n];
    }
    direction.iter().map(|d| d * scale.min(PULL_GAIN)).collect()
}

/// Where a goal barrier pulls one state dimension, if anywhere. Negation
/// swaps the containment sense of spheres and halfspaces; repulsive kinds
/// (stay-out, separation) contribute the current coordinate, meaning no
/// pull.
fn target_coordinate(inst: &CbfInstance, dim: usize, x: &[f64]) -> Option<f64> {
    let neg = inst.literal.negated;
    match &inst.literal.pred.func {
        PredicateFunction::SphereInner {
            dims,
            center,
            radius,
        } => {
            let k = dims.iter().position(|&d| d == dim)?;
            Some(if neg {
                x[dim]
            } else {
                ball_parking_point(dims, center, *radius, x, k)
            })
        }
        PredicateFunction::SphereOuter {
            dims,
            center,
            radius,
        } => {
            let k = dims.iter().position(|&d| d == dim)?;
            Some(if neg {
                ball_parking_point(dims, center, *radius, x, k)
            } else {
                x[dim]
            })
        }
        PredicateFunction::PairDistanceMin { dims_a, dims_b, .. } => {
            if dims_a.contains(&dim) || dims_b.contains(&dim) {
                Some(x[dim])
            } else {
                None
            }
        }
        PredicateFunction::AngleAbsTarget { dim: d, target, .. } => {
            if *d != dim {
                return None;
            }
            if neg {
                return Some(x[dim]);
            }
            // Nearest of the two representatives +-target.
            Some(if x[dim] >= 0.0 { *target } else { -*target })
        }
        PredicateFunction::Halfspace {
            dims,
            normal,
            offset,
        } => {
            let k = dims.iter().position(|&d| d == dim)?;
            let dot: f64 = dims
                .iter()
                .zip(normal.iter())
                .map(|(&d, &a)| a * x[d])
                .sum();
            let h = if neg { offset - dot } else { dot - offset };
            let margin = 0.1;
            if h >= margin {
                return Some(x[dim]);
            }
            // Project a margin past the boundary plane.
            let norm2: f64 = normal.iter().map(|a| a * a).sum();
            if norm2 < 1e-18 {
                return Some(x[dim]);
            }
            let sign = if neg { -1.0 } else { 1.0 };
            Some(x[dim] + sign * (margin - h) / norm2 * normal[k])
        }
    }
}

/// Parking point for a ball-shaped goal region: the nearest point at half
/// the radius from the center, seen along the robot's own approach ray.
/// Inside that radius there is nothing left to do and the pull vanishes.
fn ball_parking_point(dims: &[usize], center: &[f64], radius: f64, x: &[f64], k: usize) -> f64 {
    let park = radius * 0.5;
    let dist2: f64 = dims
        .iter()
        .zip(center.iter())
        .map(|(&d, &c)| (x[d] - c) * (x[d] - c))
        .sum();
    let dist = dist2.sqrt();
    if dist <= park || dist < 1e-9 {
        return x[dims[k]];
    }
    center[k] + (x[dims[k]] - center[k]) / dist * park
}

/// Min-norm projection: minimizes `|u - u_hat|` over the box subject to
/// `gvec . u >= rhs`. The minimizer has the form `clamp(u_hat + lambda *
/// gvec)` with the smallest `lambda >= 0` meeting the constraint, and the
/// constraint value is nondecreasing in lambda, so bisection is exact up to
/// tolerance.
pub fn solve_qp(
    u_hat: &[f64],
    constraint: Option<(&[f64], f64)>,
    lower: &[f64],
    upper: &[f64],
) -> Result<Vec<f64>, Infeasible> {
    let clamp_at = |lam: f64, g: &[f64]| -> Vec<f64> {
        u_hat
            .iter()
            .zip(g.iter())
            .zip(lower.iter().zip(upper.iter()))
            .map(|((&u, &gi), (&lo, &hi))| (u + lam * gi).clamp(lo, hi))
            .collect()
    };
    let Some((g, rhs)) = constraint else {
        let zeros = vec![0.0; u_hat.len()];
        return Ok(clamp_at(0.0, &zeros));
    };
    let phi = |lam: f64| -> f64 {
        clamp_at(lam, g)
            .iter()
            .zip(g.iter())
            .map(|(u, gi)| u * gi)
            .sum()
    };
    if phi(0.0) >= rhs {
        return Ok(clamp_at(0.0, g));
    }
    // Past lam_max every coordinate with a nonzero gradient entry is
    // saturated, so phi cannot grow further.
    let mut lam_max: f64 = 0.0;
    for (k, &gi) in g.iter().enumerate() {
        if gi > 0.0 {
            lam_max = lam_max.max((upper[k] - u_hat[k]) / gi);
        } else if gi < 0.0 {
            lam_max = lam_max.max((lower[k] - u_hat[k]) / gi);
        }
    }
    if phi(lam_max) < rhs {
        return Err(Infeasible {
            achieved: phi(lam_max),
            required: rhs,
        });
    }
    let (mut lo, mut hi) = (0.0f64, lam_max);
    let tol = 1e-9 * lam_max.max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if phi(mid) >= rhs {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(clamp_at(hi, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::TemporalKind;
    use crate::formula::{PredLiteral, Predicate, TimeInterval};

    fn goal_cbf(name: &str, dims: Vec<usize>, center: Vec<f64>, radius: f64) -> CbfInstance {
        let prop = ControlledProp {
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
        };
        CbfInstance::activate(&prop, 0.0, &[0.0, 0.0])
    }

    fn pair_cbf(dims_a: Vec<usize>, dims_b: Vec<usize>, min_distance: f64, x: &[f64]) -> CbfInstance {
        let prop = ControlledProp {
            name: "sep".to_string(),
            literal: PredLiteral {
                pred: Predicate {
                    name: "sep".to_string(),
                    func: PredicateFunction::PairDistanceMin {
                        dims_a,
                        dims_b,
                        min_distance,
                    },
                },
                negated: false,
            },
            interval: TimeInterval::untimed(),
            kind: TemporalKind::G,
        };
        CbfInstance::activate(&prop, 0.0, x)
    }

    fn robot01() -> RobotSpec {
        RobotSpec {
            dims: vec![0, 1],
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
        }
    }

    #[test]
    fn qp_clamp_only() {
        let u = solve_qp(&[1.0, 0.0], None, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(u, vec![1.0, 0.0]);
        let u = solve_qp(&[2.0, -3.0], None, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(u, vec![1.0, -1.0]);
    }

    #[test]
    fn qp_projects_onto_constraint() {
        let g = [0.0, 1.0];
        let u = solve_qp(&[1.0, 0.0], Some((&g, 0.5)), &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-6);
        assert!((u[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn qp_infeasible_beyond_box() {
        let g = [1.0, 0.0];
        let err = solve_qp(&[0.0, 0.0], Some((&g, 2.0)), &[-1.0, -1.0], &[1.0, 1.0]).unwrap_err();
        assert!((err.achieved - 1.0).abs() < 1e-9);
        assert_eq!(err.required, 2.0);
    }

    /// Brute-force reference: best box point on a grid subject to the
    /// constraint.
    fn grid_solve(
        u_hat: &[f64],
        g: &[f64],
        rhs: f64,
        lower: &[f64],
        upper: &[f64],
        steps: usize,
    ) -> Option<Vec<f64>> {
        let n = u_hat.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut idx = vec![0usize; n];
        loop {
            let u: Vec<f64> = (0..n)
                .map(|k| lower[k] + (upper[k] - lower[k]) * idx[k] as f64 / steps as f64)
                .collect();
            let c: f64 = u.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
            if c >= rhs {
                let d: f64 = u
                    .iter()
                    .zip(u_hat.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                    best = Some((d, u));
                }
            }
            let mut k = 0;
            loop {
                if k == n {
                    return best.map(|(_, u)| u);
                }
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn qp_matches_grid_reference() {
        let cases: Vec<(Vec<f64>, Vec<f64>, f64)> = vec![
            (vec![0.8, -0.2], vec![0.3, 0.7], 0.4),
            (vec![-0.5, 0.5], vec![-1.0, 0.2], 0.1),
            (vec![0.0, 0.0], vec![0.6, -0.8], -0.2),
            (vec![1.0, 1.0], vec![0.0, -1.0], 0.3),
        ];
        for (u_hat, g, rhs) in cases {
            let lower = [-1.0, -1.0];
            let upper = [1.0, 1.0];
            let got = solve_qp(&u_hat, Some((&g, rhs)), &lower, &upper).unwrap();
            let reference = grid_solve(&u_hat, &g, rhs, &lower, &upper, 2000).unwrap();
            let d_got: f64 = got
                .iter()
                .zip(u_hat.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let d_ref: f64 = reference
                .iter()
                .zip(u_hat.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                d_got <= d_ref + 1e-3,
                "dual solution {:?} worse than grid {:?}",
                got,
                reference
            );
            let c: f64 = got.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
            assert!(c >= rhs - 1e-8);
        }
    }

    #[test]
    fn nominal_heads_for_the_goal_at_full_speed() {
        let robot = robot01();
        let cbf = goal_cbf("g", vec![0, 1], vec![5.0, 5.0], 1.0);
        let u = nominal(&robot, &[&cbf], &[0.0, 0.0]);
        assert!((u[0] - 1.0).abs() < 1e-12);
        assert!((u[1] - 1.0).abs() < 1e-12);

        // Direction dominated by one axis: that axis saturates.
        let u = nominal(&robot, &[&cbf], &[4.0, 0.0]);
        assert!((u[1] - 1.0).abs() < 1e-12);
        assert!(u[0] > 0.0 && u[0] < 0.5);
    }

    #[test]
    fn nominal_zero_without_goals_or_at_goal() {
        let robot = robot01();
        assert_eq!(nominal(&robot, &[], &[1.0, 2.0]), vec![0.0, 0.0]);
        let cbf = goal_cbf("g", vec![0, 1], vec![5.0, 5.0], 1.0);
        assert_eq!(nominal(&robot, &[&cbf], &[5.0, 5.0]), vec![0.0, 0.0]);
        // Separation-only barriers exert no pull either.
        let x = [0.0, 0.0, 3.0, 0.0];
        let sep = pair_cbf(vec![0, 1], vec![2, 3], 0.3, &x);
        let u = nominal(&robot, &[&sep], &x);
        assert_eq!(u, vec![0.0, 0.0]);
    }

    #[test]
    fn constraint_assembly_for_goal_barrier() {
        let mut controller = Controller::new(
            vec![robot01()],
            Dynamics::driftless(2),
            1.0,
        );
        let prop = ControlledProp {
            name: "g".to_string(),
            literal: goal_cbf("g", vec![0, 1], vec![5.0, 5.0], 1.0).literal,
            interval: TimeInterval { a: 0.0, b: 10.0 },
            kind: TemporalKind::F,
        };
        let props = BTreeMap::from([("g".to_string(), prop)]);
        let x = [0.0, 0.0];
        controller.sync(&BTreeSet::from(["g".to_string()]), &props, 0.0, &x);
        assert_eq!(controller.registry().len(), 1);
        // At activation the barrier is 0, so rhs = -dcbf/dt = -h_int/(b-a),
        // and the full-speed nominal control clears it.
        let u = controller.control(0, 0.0, &x).unwrap();
        let inst = controller.registry().get("g").unwrap();
        let grad = inst.gradient(&x).unwrap();
        let lhs: f64 = u.iter().zip(grad.iter()).map(|(a, b)| a * b).sum();
        let rhs = -inst.time_derivative();
        assert!(lhs >= rhs - 1e-8);
        assert!((u[0] - 1.0).abs() < 1e-9 && (u[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_control_inside_invariance_set() {
        // A robot parked inside its stay-away set with no goals idles.
        let x = [0.0, 0.0, 3.0, 0.0];
        let mut controller = Controller::new(
            vec![
                RobotSpec {
                    dims: vec![0, 1],
                    lower: vec![-1.0, -1.0],
                    upper: vec![1.0, 1.0],
                },
                RobotSpec {
                    dims: vec![2, 3],
                    lower: vec![-1.0, -1.0],
                    upper: vec![1.0, 1.0],
                },
            ],
            Dynamics::driftless(4),
            1.0,
        );
        let sep_prop = ControlledProp {
            name: "sep".to_string(),
            literal: pair_cbf(vec![0, 1], vec![2, 3], 0.3, &x).literal,
            interval: TimeInterval::untimed(),
            kind: TemporalKind::G,
        };
        let props = BTreeMap::from([("sep".to_string(), sep_prop)]);
        controller.sync(&BTreeSet::from(["sep".to_string()]), &props, 0.0, &x);
        let u0 = controller.control(0, 0.0, &x).unwrap();
        let u1 = controller.control(1, 0.0, &x).unwrap();
        assert_eq!(u0, vec![0.0, 0.0]);
        assert_eq!(u1, vec![0.0, 0.0]);
        // The shared separation barrier constrains both robots.
        assert!(controller.combined_value(0, 0.0, &x).is_some());
        assert!(controller.combined_value(1, 0.0, &x).is_some());
    }

    #[test]
    fn control_is_decentralized_in_bounds() {
        let x = [0.0, 0.0, 3.0, 0.0];
        let robots = vec![
            RobotSpec {
                dims: vec![0, 1],
                lower: vec![-1.0, -1.0],
                upper: vec![1.0, 1.0],
            },
            RobotSpec {
                dims: vec![2, 3],
                lower: vec![-0.5, -0.5],
                upper: vec![0.5, 0.5],
            },
        ];
        let mut a = Controller::new(robots.clone(), Dynamics::driftless(4), 1.0);
        let mut b_robots = robots;
        b_robots[1].upper = vec![9.0, 9.0];
        b_robots[1].lower = vec![-9.0, -9.0];
        let mut b = Controller::new(b_robots, Dynamics::driftless(4), 1.0);

        let goal = ControlledProp {
            name: "g".to_string(),
            literal: goal_cbf("g", vec![0, 1], vec![5.0, 5.0], 1.0).literal,
            interval: TimeInterval { a: 0.0, b: 10.0 },
            kind: TemporalKind::F,
        };
        let sep = ControlledProp {
            name: "sep".to_string(),
            literal: pair_cbf(vec![0, 1], vec![2, 3], 0.3, &x).literal,
            interval: TimeInterval::untimed(),
            kind: TemporalKind::G,
        };
        let props = BTreeMap::from([("g".to_string(), goal), ("sep".to_string(), sep)]);
        let active = BTreeSet::from(["g".to_string(), "sep".to_string()]);
        a.sync(&active, &props, 0.0, &x);
        b.sync(&active, &props, 0.0, &x);
        let ua = a.control(0, 0.0, &x).unwrap();
        let ub = b.control(0, 0.0, &x).unwrap();
        assert_eq!(ua, ub, "robot 0's control must ignore robot 1's bounds");
    }

    #[test]
    fn registry_retires_and_reactivates() {
        let mut reg = CbfRegistry::new();
        let prop = ControlledProp {
            name: "g".to_string(),
            literal: goal_cbf("g", vec![0, 1], vec![5.0, 5.0], 1.0).literal,
            interval: TimeInterval { a: 0.0, b: 10.0 },
            kind: TemporalKind::F,
        };
        let props = BTreeMap::from([("g".to_string(), prop)]);
        let active = BTreeSet::from(["g".to_string()]);
        reg.sync(&active, &props, 1.0, &[0.0, 0.0]);
        assert_eq!(reg.get("g").unwrap().t_int, 1.0);
        // Still active at t=5: unchanged.
        reg.sync(&active, &props, 5.0, &[2.0, 2.0]);
        assert_eq!(reg.get("g").unwrap().t_int, 1.0);
        // Leaves the set: retired.
        reg.sync(&BTreeSet::new(), &props, 6.0, &[2.0, 2.0]);
        assert!(reg.is_empty());
        // Re-enters later: fresh activation time and snapshot.
        reg.sync(&active, &props, 8.0, &[3.0, 3.0]);
        let inst = reg.get("g").unwrap();
        assert_eq!(inst.t_int, 8.0);
        assert!((inst.h_int - (1.0 - 8f64.sqrt())).abs() < 1e-12);
        // Window closes at t=18 while still active: re-activated fresh.
        reg.sync(&active, &props, 18.5, &[3.0, 3.0]);
        assert_eq!(reg.get("g").unwrap().t_int, 18.5);
    }

    #[test]
    fn pre_window_barrier_does_not_constrain_yet() {
        let mut controller = Controller::new(vec![robot01()], Dynamics::driftless(2), 1.0);
        let prop = ControlledProp {
            name: "late".to_string(),
            literal: goal_cbf("late", vec![0, 1], vec![5.0, 5.0], 1.0).literal,
            interval: TimeInterval { a: 5.0, b: 15.0 },
            kind: TemporalKind::F,
        };
        let props = BTreeMap::from([("late".to_string(), prop)]);
        controller.sync(&BTreeSet::from(["late".to_string()]), &props, 0.0, &[0.0, 0.0]);
        // Registered but not yet in window: no constraint, no pull.
        assert_eq!(controller.registry().len(), 1);
        assert!(controller.combined_value(0, 1.0, &[0.0, 0.0]).is_none());
        let u = controller.control(0, 1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(u, vec![0.0, 0.0]);
        // Once the window opens the barrier pulls.
        let u = controller.control(0, 6.0, &[0.0, 0.0]).unwrap();
        assert!(u[0] > 0.9 && u[1] > 0.9);
    }
}
