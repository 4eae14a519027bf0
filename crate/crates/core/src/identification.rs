//! Active-set identification diagnostics.
//!
//! Given a high-accuracy dual solution `θ̂`, the oracle active set `A` holds
//! the groups whose correlation `X_g^T θ̂` touches the boundary of the
//! subdifferential at the anchor. Every other group has a slack, and
//! `δ_Z = min_{g∉A} margin_g / (2‖X_g‖)` is the radius below which any safe
//! ball screens exactly the complement of `A`. This module measures when that
//! happens along a run and compares it with complexity bounds.

use serde::{Deserialize, Serialize};

use crate::duality::dual_point;
use crate::error::{Error, Result};
use crate::penalties::PenaltyModel;
use crate::problem::Problem;
use crate::screening::ACTIVE_TOL;
use crate::solver::{solve, MaskRecord, Rule, SolveOptions};

/// Groups whose margin at `θ̂` is at most `tol` (`true` = active).
pub fn oracle_active_set(problem: &Problem, theta_ref: &[f64], tol: f64) -> Result<Vec<bool>> {
    Ok(group_margins(problem, theta_ref)?
        .into_iter()
        .enumerate()
        .map(|(g, m)| problem.groups.norm(g) > 0.0 && m <= tol)
        .collect())
}

fn group_margins(problem: &Problem, theta: &[f64]) -> Result<Vec<f64>> {
    let corr = problem.x.rmatvec(theta)?;
    let mut buf = Vec::new();
    Ok((0..problem.n_groups())
        .map(|g| {
            problem.groups.gather(g, &corr, &mut buf);
            problem.penalty.margin(&buf).0
        })
        .collect())
}

/// `min_{g∉A} margin_g/(2‖X_g‖)`; `+∞` when every group is active.
pub fn delta_z(problem: &Problem, theta_ref: &[f64], active: &[bool]) -> Result<f64> {
    if active.len() != problem.n_groups() {
        return Err(Error::DimensionMismatch {
            expected: problem.n_groups(),
            found: active.len(),
        });
    }
    let margins = group_margins(problem, theta_ref)?;
    Ok((0..problem.n_groups())
        .filter(|&g| !active[g] && problem.groups.norm(g) > 0.0)
        .map(|g| (margins[g] / (2.0 * problem.groups.norm(g))).max(0.0))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentificationEpochs {
    /// First recorded epoch from which the safe active set equals `A` for good.
    pub measured: Option<usize>,
    /// First recorded epoch whose safe radius is below `δ_Z`.
    pub radius: Option<usize>,
}

/// Scan recorded masks (see `SolveOptions::record_masks`).
pub fn measure_k0(masks: &[MaskRecord], oracle_active: &[bool], delta_z: f64) -> IdentificationEpochs {
    let mut measured = None;
    for rec in masks.iter().rev() {
        if rec.safe_active.as_slice() == oracle_active {
            measured = Some(rec.epoch);
        } else {
            break;
        }
    }
    let radius = masks.iter().find(|r| r.radius < delta_z).map(|r| r.epoch);
    IdentificationEpochs { measured, radius }
}

/// Whether the safe active set equals `A` at every recorded epoch from `from` on.
pub fn identified_from(masks: &[MaskRecord], oracle_active: &[bool], from: usize) -> bool {
    masks
        .iter()
        .filter(|r| r.epoch >= from)
        .all(|r| r.safe_active.as_slice() == oracle_active)
}

/// Least-squares fit of `ln E_k ≈ a − κk` over the last half of the epochs,
/// keeping only `E_k > floor`. Returns `κ̂` clamped to `(0, 1]`, or `None`
/// when fewer than three points qualify or the fit does not decrease.
pub fn fit_linear_rate(primal_by_epoch: &[f64], primal_ref: f64, floor: f64) -> Option<f64> {
    let half = primal_by_epoch.len() / 2;
    let pts: Vec<(f64, f64)> = primal_by_epoch
        .iter()
        .enumerate()
        .skip(half)
        .map(|(k, p)| (k as f64, p - primal_ref))
        .filter(|(_, e)| *e > floor)
        .map(|(k, e)| (k, e.ln()))
        .collect();
    let slope = ls_slope(&pts)?;
    (slope < 0.0).then(|| (-slope).min(1.0))
}

/// Least-squares fit of `ln E_k ≈ ln C − γ ln k` over the last half of the
/// epochs (k ≥ 1). Returns `(C, γ)` with `γ > 0`.
pub fn fit_sublinear_rate(primal_by_epoch: &[f64], primal_ref: f64, floor: f64) -> Option<(f64, f64)> {
    let half = (primal_by_epoch.len() / 2).max(1);
    let pts: Vec<(f64, f64)> = primal_by_epoch
        .iter()
        .enumerate()
        .skip(half)
        .map(|(k, p)| (k as f64, p - primal_ref))
        .filter(|(_, e)| *e > floor)
        .map(|(k, e)| (k.ln(), e.ln()))
        .collect();
    let slope = ls_slope(&pts)?;
    if slope >= 0.0 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let intercept = my - slope * mx;
    Some((intercept.exp(), -slope))
}

fn ls_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `C = (σ·ν_f + μ_Ω)/μ_Ω`, where `σ` bounds `‖Xv‖²/‖v‖²`.
pub fn conditioning_constant(mu_omega: f64, nu_f: f64, sigma: f64) -> Result<f64> {
    if !(mu_omega > 0.0) {
        return Err(Error::Unsupported("the penalty is not strongly convex".into()));
    }
    Ok((sigma * nu_f + mu_omega) / mu_omega)
}

/// `max(0, (1/κ)·ln(C·(2/μ_D)·E_0/δ_Z²))` for linearly converging runs.
pub fn k0_bound_linear(
    kappa: f64,
    mu_omega: f64,
    nu_f: f64,
    sigma: f64,
    mu_d: f64,
    delta_z: f64,
    e0: f64,
) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidOption(format!("rate must lie in (0, 1], got {kappa}")));
    }
    if !(delta_z > 0.0) {
        return Err(Error::InvalidOption("δ_Z must be positive".into()));
    }
    let c = conditioning_constant(mu_omega, nu_f, sigma)?;
    if delta_z.is_infinite() || e0 <= 0.0 {
        return Ok(0.0);
    }
    let arg = c * (2.0 / mu_d) * e0 / (delta_z * delta_z);
    Ok((arg.ln() / kappa).max(0.0))
}

/// `(8·ν_f·σ_X²·L²·C/(μ_D·δ_Z²)²)^{1/γ}` for runs with `E_k ≤ C/k^γ` on a
/// penalty whose domain lies in a ball of radius `L`.
pub fn k0_bound_sublinear(
    c: f64,
    gamma: f64,
    nu_f: f64,
    sigma_x: f64,
    l: f64,
    mu_d: f64,
    delta_z: f64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidOption(format!("rate exponent must be positive, got {gamma}")));
    }
    if !(delta_z > 0.0) {
        return Err(Error::InvalidOption("δ_Z must be positive".into()));
    }
    let denom = (mu_d * delta_z * delta_z).powi(2);
    Ok((8.0 * nu_f * sigma_x * sigma_x * l * l * c / denom).powf(1.0 / gamma))
}

/// Radius of a ball containing the penalty's domain in `R^p`.
pub fn support_radius(penalty: &PenaltyModel, p: usize) -> Result<f64> {
    match *penalty {
        PenaltyModel::Box { lower, upper } => Ok(lower.abs().max(upper.abs()) * (p as f64).sqrt()),
        _ => Err(Error::Unsupported(format!(
            "the {} penalty has an unbounded domain",
            penalty.name()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyOptions {
    /// Tolerance of the monitored run.
    pub tol: f64,
    /// Tolerance of the reference run that defines `β̂` and `θ̂`.
    pub reference_tol: f64,
    pub max_epochs: usize,
    pub screen_every: usize,
    pub active_tol: f64,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        IdentifyOptions {
            tol: 1e-12,
            reference_tol: 1e-12,
            max_epochs: 100_000,
            screen_every: 1,
            active_tol: ACTIVE_TOL,
        }
    }
}

/// Serialized infinities become `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub n_groups: usize,
    pub oracle_active: Vec<usize>,
    pub delta_z: Option<f64>,
    pub k0_measured: Option<usize>,
    pub k0_radius: Option<usize>,
    /// Safe active set equals `A` at every evaluation from `k0_radius` on.
    pub identified_after_radius: bool,
    pub k0_bound_linear: Option<f64>,
    pub k0_bound_sublinear: Option<f64>,
    pub kappa_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub e0: f64,
    pub spectral_norm: f64,
    pub mu_omega: f64,
    pub epochs: usize,
    pub converged: bool,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Reference solve, oracle set, monitored dynamic-gap run, and bounds.
pub fn identify(problem: &Problem, opts: &IdentifyOptions) -> Result<IdentificationReport> {
    let reference = SolveOptions {
        tol: opts.reference_tol,
        max_epochs: opts.max_epochs,
        rule: Rule::DynamicGap,
        ..Default::default()
    };
    let (ref_sol, _) = solve(problem, &reference)?;
    if !ref_sol.converged {
        return Err(Error::Unsupported(
            "the reference solve did not reach its tolerance".into(),
        ));
    }
    let theta_ref = dual_point(problem, &ref_sol.beta)?.theta;
    let primal_ref = problem.primal(&ref_sol.beta)?;
    let active = oracle_active_set(problem, &theta_ref, opts.active_tol)?;
    let dz = delta_z(problem, &theta_ref, &active)?;

    let monitored = SolveOptions {
        tol: opts.tol,
        max_epochs: opts.max_epochs,
        screen_every: opts.screen_every,
        rule: Rule::DynamicGap,
        record_masks: true,
        ..Default::default()
    };
    let (sol, trace) = solve(problem, &monitored)?;
    let k0 = measure_k0(&trace.masks, &active, dz);
    let identified_after_radius = k0
        .radius
        .is_some_and(|k| identified_from(&trace.masks, &active, k));

    let nu_f = problem.loss.smoothness();
    let mu_d = problem.loss.dual_strong_concavity();
    let mu_omega = problem.penalty.strong_convexity();
    let sigma = problem.x.spectral_norm().value;
    let e0 = (trace.primal_by_epoch[0] - primal_ref).max(0.0);
    let floor = 1e-13 * problem.loss.target_norm_sq().max(f64::MIN_POSITIVE);
    let kappa_hat = fit_linear_rate(&trace.primal_by_epoch, primal_ref, floor);

    let k0_bound_linear = match kappa_hat {
        Some(kappa) if mu_omega > 0.0 && dz > 0.0 => {
            Some(k0_bound_linear(kappa, mu_omega, nu_f, sigma * sigma, mu_d, dz, e0)?)
        }
        _ => None,
    };
    let sub = fit_sublinear_rate(&trace.primal_by_epoch, primal_ref, floor);
    let k0_bound_sublinear = match (support_radius(&problem.penalty, problem.n_features()), sub) {
        (Ok(l), Some((c, gamma))) if dz > 0.0 => {
            finite(k0_bound_sublinear(c, gamma, nu_f, sigma, l, mu_d, dz)?)
        }
        _ => None,
    };

    Ok(IdentificationReport {
        n_groups: problem.n_groups(),
        oracle_active: (0..active.len()).filter(|&g| active[g]).collect(),
        delta_z: finite(dz),
        k0_measured: k0.measured,
        k0_radius: k0.radius,
        identified_after_radius,
        k0_bound_linear: k0_bound_linear.and_then(finite),
        k0_bound_sublinear,
        kappa_hat,
        gamma_hat: sub.map(|s| s.1),
        e0,
        spectral_norm: sigma,
        mu_omega,
        epochs: sol.epochs,
        converged: sol.converged,
    })
}
