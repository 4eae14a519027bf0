//! Dual points, duality gaps and gap safe balls.
//!
//! For the quadratic loss the dual objective is
//!
//! ```text
//! D(θ) = ⟨θ, y⟩ − ½‖θ‖² − Σ_g Ω_g*(X_g^T θ)
//! ```
//!
//! and a feasible point is obtained by rescaling the residual,
//! `θ = (y − Xβ)/α` with `α = max(1, gauge(X^T(y − Xβ)))`.
//!
//! When a [`ScreenState`] is supplied, screened groups are treated as fixed at
//! their anchors: their conjugate is replaced by the linear function
//! `v ↦ ⟨β*_g, v⟩` and they no longer constrain the rescaling. This is the
//! dual of the problem restricted to the remaining groups; since every safe
//! elimination is exact, it has the same optimum and a smaller gap.

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::screening::ScreenState;
use crate::{dot, norm2};

/// Relative size of negative gaps attributed to rounding.
pub const GAP_ROUNDING: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub theta: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl SafeBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::NegativeRadius(radius));
        }
        Ok(SafeBall { center, radius })
    }

    pub fn contains(&self, point: &[f64], slack: f64) -> bool {
        let d: f64 = self
            .center
            .iter()
            .zip(point)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        d <= self.radius + slack
    }
}

/// Everything computed at one evaluation of the dual.
#[derive(Debug, Clone)]
pub struct GapEvaluation {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub point: DualPoint,
    /// `X^T θ`, filled for every group that is active or anchored away from
    /// zero; other entries are 0.
    pub correlations: Vec<f64>,
}

/// Relative accuracy assumed for computed objective values.
pub const OBJECTIVE_ROUNDING: f64 = 64.0 * f64::EPSILON;

/// Gap enlarged by the rounding error of the objective values it was
/// computed from. Balls for screening are built from this value, so a gap
/// that cancels to zero in floating point still leaves a positive radius.
pub fn certified_gap(gap: f64, primal: f64, dual: f64) -> f64 {
    if !gap.is_finite() {
        return gap;
    }
    gap.max(0.0) + OBJECTIVE_ROUNDING * (primal.abs() + dual.abs())
}

/// `√(2·gap/μ_D)`; infinite gaps give an infinite radius.
pub fn gap_radius(gap: f64, mu_d: f64) -> f64 {
    if gap.is_infinite() {
        f64::INFINITY
    } else {
        (2.0 * gap.max(0.0) / mu_d).sqrt()
    }
}

/// The gap safe ball `B(θ, √(2·Gap/μ_D))`.
pub fn gap_safe_ball(center: &DualPoint, gap: f64, mu_d: f64) -> Result<SafeBall> {
    if gap.is_nan() {
        return Err(Error::NonFinite("duality gap".into()));
    }
    SafeBall::new(center.theta.clone(), gap_radius(gap, mu_d))
}

/// Clamp a gap that is negative only through rounding; reject anything larger.
pub fn clamp_gap(gap: f64, scale: f64) -> Result<f64> {
    let tolerance = GAP_ROUNDING * scale.max(f64::MIN_POSITIVE);
    if gap.is_nan() {
        return Err(Error::NonFinite("duality gap".into()));
    }
    if gap >= 0.0 {
        Ok(gap)
    } else if gap >= -tolerance {
        Ok(0.0)
    } else {
        Err(Error::NegativeGap { gap, tolerance })
    }
}

/// `θ = (y − Xβ)/α` on the full problem.
pub fn dual_point(problem: &Problem, beta: &[f64]) -> Result<DualPoint> {
    let residual = problem.residual(beta)?;
    let c = problem.x.rmatvec(&residual)?;
    let alpha = scaling(problem.penalty.dual_gauge(&c, problem.groups));
    Ok(DualPoint {
        theta: scaled(&residual, alpha),
        alpha,
    })
}

fn scaling(gauge: f64) -> f64 {
    if gauge.is_infinite() {
        f64::INFINITY
    } else {
        gauge.max(1.0)
    }
}

fn scaled(residual: &[f64], alpha: f64) -> Vec<f64> {
    if alpha.is_infinite() {
        vec![0.0; residual.len()]
    } else {
        residual.iter().map(|r| r / alpha).collect()
    }
}

/// `D(θ)` on the full problem; `−∞` when `θ` is infeasible.
pub fn dual_value(problem: &Problem, theta: &[f64]) -> Result<f64> {
    let c = problem.x.rmatvec(theta)?;
    let mut buf = Vec::new();
    let mut conj = 0.0;
    for g in 0..problem.n_groups() {
        problem.groups.gather(g, &c, &mut buf);
        conj += problem.penalty.conjugate(&buf);
    }
    Ok(dot(theta, problem.y()) - 0.5 * dot(theta, theta) - conj)
}

/// `P(β) − D(θ)`, with rounding-level negatives clamped to zero.
pub fn duality_gap(problem: &Problem, beta: &[f64], dual: &DualPoint) -> Result<f64> {
    let primal = problem.primal(beta)?;
    if primal.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let d = dual_value(problem, &dual.theta)?;
    clamp_gap(primal - d, problem.loss.target_norm_sq())
}

/// Dual point, primal, dual and gap at `β`, given the residual `y − Xβ`.
/// With a state, screened groups are held at their anchors (see module docs).
pub fn evaluate(
    problem: &Problem,
    beta: &[f64],
    residual: &[f64],
    state: Option<&ScreenState>,
) -> Result<GapEvaluation> {
    let penalty = &problem.penalty;
    let p = problem.n_features();
    let mut corr = vec![0.0; p];
    let mut buf = Vec::new();
    let mut gauge = 0.0f64;
    let mut needed = vec![false; problem.n_groups()];

    for (g, need) in needed.iter_mut().enumerate() {
        let free = state.is_none_or(|s| s.is_active(g));
        let anchored_off_zero = state
            .and_then(|s| s.anchor(g))
            .is_some_and(|a| penalty.anchor_value(a) != 0.0);
        if !(free || anchored_off_zero) {
            continue;
        }
        *need = true;
        buf.clear();
        for &j in problem.groups.group(g) {
            let v = problem.x.col_dot(j, residual);
            corr[j] = v;
            buf.push(v);
        }
        if free {
            gauge = gauge.max(penalty.group_gauge(&buf));
        }
    }

    let alpha = scaling(gauge);
    let theta = scaled(residual, alpha);
    if alpha.is_infinite() {
        corr.iter_mut().for_each(|c| *c = 0.0);
    } else if alpha != 1.0 {
        corr.iter_mut().for_each(|c| *c /= alpha);
    }

    let mut conj = 0.0;
    for (g, &need) in needed.iter().enumerate() {
        if !need {
            continue;
        }
        problem.groups.gather(g, &corr, &mut buf);
        match state.and_then(|s| s.anchor(g)) {
            Some(a) => {
                let v = penalty.anchor_value(a);
                conj += v * buf.iter().sum::<f64>();
            }
            None => conj += penalty.conjugate(&buf),
        }
    }

    let primal = 0.5 * dot(residual, residual) + problem.penalty_value(beta);
    let dual = dot(&theta, problem.y()) - 0.5 * dot(&theta, &theta) - conj;
    if primal.is_nan() || dual.is_nan() {
        return Err(Error::NonFinite("objective value".into()));
    }
    let gap = if primal.is_infinite() {
        f64::INFINITY
    } else {
        clamp_gap(primal - dual, problem.loss.target_norm_sq())?
    };
    Ok(GapEvaluation {
        primal,
        dual,
        gap,
        point: DualPoint { theta, alpha },
        correlations: corr,
    })
}

/// Distance between two dual points.
pub fn dual_distance(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d)
}
