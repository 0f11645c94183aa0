//! Time-varying control barrier functions for controlled propositions.
//!
//! Every controlled proposition that enters the active set gets a CBF
//! instance pinned to its activation time `t_int` and activation value
//! `h_int = h(x(t_int))`. Goal-type props (from `F` or the right side of
//! `U`) use a barrier that starts at zero when the window opens and relaxes
//! linearly down to plain `h(x)` at the deadline, so the zero-superlevel set
//! shrinks toward the target region exactly when the deadline approaches.
//! Invariance-type props (`G`, left side of `U`) use `h(x)` directly.

use serde::{Deserialize, Serialize};

use crate::abstraction::{ControlledProp, TemporalKind};
use crate::formula::{eval_h, PredLiteral, PredicateFunction, TimeInterval};

/// Gradients are treated as undefined within this distance of a norm
/// center; callers fall back to a zero gradient there.
pub const SINGULAR_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("gradient undefined within {SINGULAR_RADIUS} of the predicate center")]
pub struct SingularGradient;

/// One activated barrier. Immutable once created; re-activation of the same
/// proposition makes a fresh instance with new `t_int` and `h_int`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbfInstance {
    pub prop: String,
    pub literal: PredLiteral,
    pub interval: TimeInterval,
    pub kind: TemporalKind,
    /// Activation time: when the proposition entered the active set.
    pub t_int: f64,
    /// Predicate value at activation.
    pub h_int: f64,
}

impl CbfInstance {
    pub fn activate(prop: &ControlledProp, t_int: f64, x: &[f64]) -> Self {
        CbfInstance {
            prop: prop.name.clone(),
            literal: prop.literal.clone(),
            interval: prop.interval,
            kind: prop.kind,
            t_int,
            h_int: eval_h(&prop.literal, x),
        }
    }

    /// Absolute time window in which the barrier constrains the control.
    pub fn window(&self) -> (f64, f64) {
        (self.t_int + self.interval.a, self.t_int + self.interval.b)
    }

    pub fn in_window(&self, t: f64) -> bool {
        let (lo, hi) = self.window();
        t >= lo && t <= hi
    }

    pub fn expired(&self, t: f64) -> bool {
        t > self.t_int + self.interval.b
    }

    /// Goal-type barriers drive the state somewhere by a deadline;
    /// invariance-type barriers keep it inside a set.
    pub fn is_goal(&self) -> bool {
        matches!(self.kind, TemporalKind::F | TemporalKind::UntilRight)
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        eval_h(&self.literal, x)
    }

    /// State dimensions the underlying predicate reads.
    pub fn dims(&self) -> Vec<usize> {
        self.literal.pred.func.dims()
    }

    /// Barrier value. Only meaningful inside the window.
    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        let h = self.h(x);
        if !self.is_goal() {
            return h;
        }
        let (a, b) = (self.interval.a, self.interval.b);
        if !b.is_finite() || b == a {
            return h;
        }
        (t - self.t_int - a) * self.h_int / (b - a) - self.h_int + h
    }

    /// Explicit time dependence of the barrier.
    pub fn time_derivative(&self) -> f64 {
        let (a, b) = (self.interval.a, self.interval.b);
        if self.is_goal() && b.is_finite() && b > a {
            self.h_int / (b - a)
        } else {
            0.0
        }
    }

    /// Spatial gradient over the full state vector; the time-varying part
    /// of the barrier does not depend on x, so this is just the predicate
    /// gradient (negated for negated literals).
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, SingularGradient> {
        let mut g = grad_h(&self.literal.pred.func, x)?;
        if self.literal.negated {
            for v in &mut g {
                *v = -*v;
            }
        }
        Ok(g)
    }

    /// Gradient with a zero-vector fallback at singular points.
    pub fn gradient_or_zero(&self, x: &[f64]) -> Vec<f64> {
        self.gradient(x).unwrap_or_else(|_| vec![0.0; x.len()])
    }
}

fn grad_h(func: &PredicateFunction, x: &[f64]) -> Result<Vec<f64>, SingularGradient> {
    let mut g = vec![0.0; x.len()];
    match func {
        PredicateFunction::SphereInner { dims, center, .. } => {
            let (diff, norm) = offset_norm(x, dims, center)?;
            for (k, &d) in dims.iter().enumerate() {
                g[d] = -diff[k] / norm;
            }
        }
        PredicateFunction::SphereOuter { dims, center, .. } => {
            let (diff, norm) = offset_norm(x, dims, center)?;
            for (k, &d) in dims.iter().enumerate() {
                g[d] = diff[k] / norm;
            }
        }
        PredicateFunction::PairDistanceMin { dims_a, dims_b, .. } => {
            let diff: Vec<f64> = dims_a
                .iter()
                .zip(dims_b.iter())
                .map(|(&i, &j)| x[i] - x[j])
                .collect();
            let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < SINGULAR_RADIUS {
                return Err(SingularGradient);
            }
            for (k, (&i, &j)) in dims_a.iter().zip(dims_b.iter()).enumerate() {
                g[i] = diff[k] / norm;
                g[j] = -diff[k] / norm;
            }
        }
        PredicateFunction::AngleAbsTarget { dim, target, .. } => {
            // h = tol - ||theta| - target|; subgradient signs at the
            // nondifferentiable points are fixed to +1.
            let theta = x[*dim];
            let outer = if theta.abs() - target >= 0.0 { 1.0 } else { -1.0 };
            let inner = if theta >= 0.0 { 1.0 } else { -1.0 };
            g[*dim] = -outer * inner;
        }
        PredicateFunction::Halfspace { dims, normal, .. } => {
            for (k, &d) in dims.iter().enumerate() {
                g[d] = normal[k];
            }
        }
    }
    Ok(g)
}

fn offset_norm(
    x: &[f64],
    dims: &[usize],
    center: &[f64],
) -> Result<(Vec<f64>, f64), SingularGradient> {
    let diff: Vec<f64> = dims
        .iter()
        .zip(center.iter())
        .map(|(&d, &c)| x[d] - c)
        .collect();
    let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < SINGULAR_RADIUS {
        return Err(SingularGradient);
    }
    Ok((diff, norm))
}

/// Inputs to the log-sum-exp combination: one active barrier's value,
/// full-state gradient, and explicit time derivative.
#[derive(Debug, Clone)]
pub struct CbfPart {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub dt: f64,
}

impl CbfPart {
    /// A single member viewed as its own combination.
    pub fn into_combined(self) -> CombinedCbf {
        CombinedCbf {
            value: self.value,
            gradient: self.gradient,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CombinedCbf {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub dt: f64,
}

/// Smooth under-approximation of the minimum: `-ln sum exp(-v_i)`,
/// stabilized by shifting with the smallest value.
pub fn combine_values(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "combine requires at least one barrier");
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = values.iter().map(|v| (-(v - m)).exp()).sum();
    m - sum.ln()
}

/// Combines barriers with softmin weights, so the gradient and time
/// derivative interpolate between the constituents, dominated by the
/// tightest one.
pub fn combine(parts: &[CbfPart]) -> CombinedCbf {
    assert!(!parts.is_empty(), "combine requires at least one barrier");
    let dim = parts[0].gradient.len();
    let m = parts
        .iter()
        .map(|p| p.value)
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = parts.iter().map(|p| (-(p.value - m)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut gradient = vec![0.0; dim];
    let mut dt = 0.0;
    for (p, w) in parts.iter().zip(weights.iter()) {
        let w = w / total;
        for (gi, pi) in gradient.iter_mut().zip(p.gradient.iter()) {
            *gi += w * pi;
        }
        dt += w * p.dt;
    }
    CombinedCbf {
        value: m - total.ln(),
        gradient,
        dt,
    }
}
