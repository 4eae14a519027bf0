//! Cyclic proximal block coordinate descent with screening, and a dual
//! coordinate ascent SVM solver with sample screening.
//!
//! The regression solver keeps the residual `y − Xβ` up to date after every
//! block update and rebuilds it from scratch every
//! [`RESIDUAL_REFRESH`] epochs. The dual point, gap and screening tests are
//! evaluated at epoch 0, every `screen_every` epochs and when the epoch
//! budget runs out.
//!
//! Unsafe rules (strong, aggressive) run a first phase on a reduced problem
//! to a looser tolerance, then hand the result to a dynamic gap safe phase on
//! the full problem. Working sets alternate full evaluations (with safe
//! screening) and inner solves restricted to the best-scored groups.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::duality::{certified_gap, evaluate, gap_radius, DualPoint, GapEvaluation};
use crate::error::{Error, Result};
use crate::linalg::DesignMatrix;
use crate::penalties::Anchor;
use crate::problem::Problem;
use crate::screening::{
    aggressive_radius, kkt_repair, screen_with_correlations, strong_rule_set, working_set_scores,
    RuleKind, ScreenState,
};
use crate::dot;

pub const RESIDUAL_REFRESH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    None,
    Static,
    DynamicGap,
    StrongThenSafe,
    AggressiveThenSafe,
    WorkingSet,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::None,
        Rule::Static,
        Rule::DynamicGap,
        Rule::StrongThenSafe,
        Rule::AggressiveThenSafe,
        Rule::WorkingSet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::None => "none",
            Rule::Static => "static",
            Rule::DynamicGap => "dynamic_gap",
            Rule::StrongThenSafe => "strong_then_safe",
            Rule::AggressiveThenSafe => "aggressive_then_safe",
            Rule::WorkingSet => "working_set",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidOption(format!("unknown rule `{s}`")))
    }
}

/// Dual information from a neighbouring, larger weight, used by the strong
/// rule. Defaults to `X^T y` at `λ_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongPrior {
    pub correlations: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Stop when the gap is at most `tol·‖y‖²`.
    pub tol: f64,
    pub max_epochs: usize,
    pub screen_every: usize,
    pub rule: Rule,
    pub aggressive_s: usize,
    pub aggressive_eta: f64,
    /// Size of the first working set.
    pub ws_initial_size: usize,
    pub ws_growth_factor: f64,
    /// Keep the safe active mask of every safe evaluation in the trace.
    pub record_masks: bool,
    pub strong_prior: Option<StrongPrior>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_epochs: 10_000,
            screen_every: 10,
            rule: Rule::DynamicGap,
            aggressive_s: 10,
            aggressive_eta: 1e-3,
            ws_initial_size: 100,
            ws_growth_factor: 2.0,
            record_masks: false,
            strong_prior: None,
        }
    }
}

impl SolveOptions {
    pub fn with_rule(rule: Rule, tol: f64) -> Self {
        SolveOptions {
            rule,
            tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidOption(format!("tol must be positive, got {}", self.tol)));
        }
        if self.screen_every == 0 {
            return Err(Error::InvalidOption("screen_every must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.aggressive_eta) {
            return Err(Error::InvalidOption("aggressive_eta must lie in [0, 1]".into()));
        }
        if self.ws_initial_size == 0 || !(self.ws_growth_factor > 1.0) {
            return Err(Error::InvalidOption(
                "working sets need a positive initial size and a growth factor above 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Full problem; the reported radius is a gap safe radius.
    Safe,
    /// Reduced problem built by an unsafe rule.
    Unsafe,
    /// Inner solve of the working-set strategy.
    Inner,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub radius: f64,
    /// Groups removed by safe rules so far.
    pub n_screened: usize,
    pub n_unsafe: usize,
    pub ms: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskRecord {
    pub epoch: usize,
    pub radius: f64,
    /// `true` for groups not (yet) safely screened.
    pub safe_active: Vec<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
    /// `P(β_k)` after `k` epochs, for every epoch.
    pub primal_by_epoch: Vec<f64>,
    pub masks: Vec<MaskRecord>,
    /// Groups an unsafe phase removed although their optimality conditions
    /// failed at the end of that phase.
    pub kkt_violations: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub beta: Vec<f64>,
    pub dual: DualPoint,
    pub primal: f64,
    pub gap: f64,
    pub epochs: usize,
    pub converged: bool,
    pub state: ScreenState,
}

/// What an observer sees at every evaluation.
#[derive(Debug)]
pub struct Snapshot<'s> {
    pub epoch: usize,
    pub phase: Phase,
    pub beta: &'s [f64],
    pub theta: &'s [f64],
    pub alpha: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub radius: f64,
    pub state: &'s ScreenState,
}

/// Starting point: coefficients and, optionally, groups already screened for
/// this very problem.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub beta: Option<Vec<f64>>,
    pub state: Option<ScreenState>,
}

pub fn solve(problem: &Problem, opts: &SolveOptions) -> Result<(Solution, SolveTrace)> {
    solve_from(problem, opts, WarmStart::default(), None)
}

pub fn solve_observed(
    problem: &Problem,
    opts: &SolveOptions,
    observer: &mut dyn FnMut(&Snapshot),
) -> Result<(Solution, SolveTrace)> {
    solve_from(problem, opts, WarmStart::default(), Some(observer))
}

pub fn solve_from(
    problem: &Problem,
    opts: &SolveOptions,
    start: WarmStart,
    observer: Option<&mut dyn FnMut(&Snapshot)>,
) -> Result<(Solution, SolveTrace)> {
    opts.validate()?;
    let mut engine = Engine::new(problem, opts, start, observer)?;
    let converged = match opts.rule {
        Rule::None => engine.run_phase(Screening::Off, engine.tol_abs, Phase::Safe)?,
        Rule::Static => engine.run_phase(Screening::Once, engine.tol_abs, Phase::Safe)?,
        Rule::DynamicGap => engine.run_phase(Screening::Dynamic, engine.tol_abs, Phase::Safe)?,
        Rule::StrongThenSafe => {
            engine.strong_discard()?;
            engine.run_phase(Screening::Off, 10.0 * engine.tol_abs, Phase::Unsafe)?;
            engine.handoff()?;
            engine.run_phase(Screening::Dynamic, engine.tol_abs, Phase::Safe)?
        }
        Rule::AggressiveThenSafe => {
            engine.run_phase(Screening::Aggressive, 10.0 * engine.tol_abs, Phase::Unsafe)?;
            engine.handoff()?;
            engine.run_phase(Screening::Dynamic, engine.tol_abs, Phase::Safe)?
        }
        Rule::WorkingSet => engine.run_working_sets()?,
    };
    Ok(engine.finish(converged))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Screening {
    Off,
    Once,
    Dynamic,
    Aggressive,
}

struct Engine<'p, 'a, 'o> {
    problem: &'p Problem<'a>,
    opts: &'p SolveOptions,
    beta: Vec<f64>,
    residual: Vec<f64>,
    state: ScreenState,
    epoch: usize,
    tol_abs: f64,
    mu_d: f64,
    trace: SolveTrace,
    last: Option<GapEvaluation>,
    started: Instant,
    observer: Option<&'o mut dyn FnMut(&Snapshot)>,
    block_in: Vec<f64>,
    block_out: Vec<f64>,
}

impl<'p, 'a, 'o> Engine<'p, 'a, 'o> {
    fn new(
        problem: &'p Problem<'a>,
        opts: &'p SolveOptions,
        start: WarmStart,
        observer: Option<&'o mut dyn FnMut(&Snapshot)>,
    ) -> Result<Self> {
        let p = problem.n_features();
        let beta = match start.beta {
            Some(b) => {
                if b.len() != p {
                    return Err(Error::DimensionMismatch { expected: p, found: b.len() });
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("warm start".into()));
                }
                b
            }
            None => vec![problem.penalty.feasible_start(); p],
        };
        let state = match start.state {
            Some(s) if s.n_groups() != problem.n_groups() => {
                return Err(Error::DimensionMismatch {
                    expected: problem.n_groups(),
                    found: s.n_groups(),
                })
            }
            Some(s) => s,
            None => ScreenState::new(problem.n_groups()),
        };
        let residual = problem.residual(&beta)?;
        let tol_abs = opts.tol * problem.loss.target_norm_sq();
        let mut engine = Engine {
            problem,
            opts,
            beta,
            residual,
            state,
            epoch: 0,
            tol_abs,
            mu_d: problem.loss.dual_strong_concavity(),
            trace: SolveTrace::default(),
            last: None,
            started: Instant::now(),
            observer,
            block_in: Vec::new(),
            block_out: Vec::new(),
        };
        engine.prescreen_empty_groups();
        for g in 0..problem.n_groups() {
            if !engine.state.is_active(g) {
                engine.move_to_anchor(g);
            }
        }
        let p0 = engine.primal();
        engine.trace.primal_by_epoch.push(p0);
        Ok(engine)
    }

    /// Groups with `X_g = 0` do not affect the fit; any value in the domain
    /// is optimal, so they are fixed at the anchor where `X_g^T θ = 0` sits.
    fn prescreen_empty_groups(&mut self) {
        for g in 0..self.problem.n_groups() {
            if self.problem.groups.norm(g) == 0.0 {
                let zeros = vec![0.0; self.problem.groups.group(g).len()];
                let (_, anchor) = self.problem.penalty.margin(&zeros);
                self.state.screen(g, anchor, 0, RuleKind::Safe);
            }
        }
    }

    fn primal(&self) -> f64 {
        0.5 * dot(&self.residual, &self.residual) + self.problem.penalty_value(&self.beta)
    }

    fn move_to_anchor(&mut self, g: usize) -> bool {
        let Some(value) = self.state.fixed_value(g, &self.problem.penalty) else {
            return false;
        };
        let mut changed = false;
        for &j in self.problem.groups.group(g) {
            let delta = value - self.beta[j];
            if delta != 0.0 {
                self.beta[j] = value;
                self.problem.x.col_axpy(j, -delta, &mut self.residual);
                changed = true;
            }
        }
        changed
    }

    fn cd_epoch(&mut self) -> Result<()> {
        cd_epoch_with(
            self.problem,
            &mut self.beta,
            &mut self.residual,
            &self.state,
            &mut self.block_in,
            &mut self.block_out,
        )?;
        self.epoch += 1;
        if self.epoch.is_multiple_of(RESIDUAL_REFRESH) {
            self.residual = self.problem.residual(&self.beta)?;
        }
        let p = self.primal();
        if p.is_nan() {
            return Err(Error::NonFinite(format!("primal objective at epoch {}", self.epoch)));
        }
        self.trace.primal_by_epoch.push(p);
        Ok(())
    }

    /// One evaluation: dual point, gap, radius, screening, logging.
    /// Returns the gap and whether screening moved any coefficient.
    fn evaluate(&mut self, mode: Screening, phase: Phase, phase_start: usize) -> Result<(f64, bool)> {
        let ev = evaluate(self.problem, &self.beta, &self.residual, Some(&self.state))?;
        let safe_radius = gap_radius(certified_gap(ev.gap, ev.primal, ev.dual), self.mu_d);
        let k = self.epoch - phase_start;
        let (radius, kind) = match mode {
            Screening::Aggressive if k >= self.opts.aggressive_s => (
                aggressive_radius(
                    &self.trace.primal_by_epoch,
                    self.epoch,
                    self.opts.aggressive_s,
                    ev.gap,
                    self.opts.aggressive_eta,
                    self.mu_d,
                ),
                RuleKind::Aggressive,
            ),
            Screening::Aggressive => (safe_radius, RuleKind::Aggressive),
            _ => (safe_radius, RuleKind::Safe),
        };

        let mut changed = false;
        if mode != Screening::Off && radius.is_finite() {
            let hits = screen_with_correlations(
                &mut self.state,
                self.problem,
                &ev.correlations,
                radius,
                self.epoch,
                kind,
            )?;
            for g in hits {
                changed |= self.move_to_anchor(g);
            }
        }

        self.trace.rows.push(TraceRow {
            epoch: self.epoch,
            primal: ev.primal,
            dual: ev.dual,
            gap: ev.gap,
            radius,
            n_screened: self.state.n_safe(),
            n_unsafe: self.state.n_unsafe(),
            ms: self.started.elapsed().as_secs_f64() * 1e3,
            phase,
        });
        if self.opts.record_masks && phase == Phase::Safe {
            self.trace.masks.push(MaskRecord {
                epoch: self.epoch,
                radius,
                safe_active: self.state.safe_active_mask(),
            });
        }
        if let Some(obs) = self.observer.as_mut() {
            obs(&Snapshot {
                epoch: self.epoch,
                phase,
                beta: &self.beta,
                theta: &ev.point.theta,
                alpha: ev.point.alpha,
                primal: ev.primal,
                dual: ev.dual,
                gap: ev.gap,
                radius,
                state: &self.state,
            });
        }
        let gap = ev.gap;
        self.last = Some(ev);
        Ok((gap, changed))
    }

    /// CD with evaluations on the configured cadence until the gap reaches
    /// `tol` or the epoch budget is spent.
    fn run_phase(&mut self, mode: Screening, tol: f64, phase: Phase) -> Result<bool> {
        let start = self.epoch;
        let mut screened_once = false;
        loop {
            let k = self.epoch - start;
            if k.is_multiple_of(self.opts.screen_every) || self.epoch >= self.opts.max_epochs {
                let m = if mode == Screening::Once && screened_once { Screening::Off } else { mode };
                screened_once = true;
                let (mut gap, mut changed) = self.evaluate(m, phase, start)?;
                // Screening may have moved coefficients; the certificate must
                // describe the final iterate.
                while changed && gap <= tol {
                    (gap, changed) = self.evaluate(m, phase, start)?;
                }
                if gap <= tol {
                    return Ok(true);
                }
                if self.epoch >= self.opts.max_epochs {
                    return Ok(false);
                }
            }
            self.cd_epoch()?;
        }
    }

    fn strong_discard(&mut self) -> Result<()> {
        let penalty = self.problem.penalty;
        let (corr, lambda_prev) = match &self.opts.strong_prior {
            Some(prior) => (prior.correlations.clone(), prior.lambda),
            None => {
                let corr = self.problem.x.rmatvec(self.problem.y())?;
                let lambda_prev = match penalty.lambda() {
                    Some(_) => self.problem.lambda_max()?,
                    None => 0.0,
                };
                (corr, lambda_prev)
            }
        };
        if corr.len() != self.problem.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.problem.n_features(),
                found: corr.len(),
            });
        }
        let discard = strong_rule_set(self.problem, &corr, lambda_prev, &penalty);
        let mut buf = Vec::new();
        for (g, &drop) in discard.iter().enumerate() {
            if drop && self.state.is_active(g) {
                self.problem.groups.gather(g, &corr, &mut buf);
                let (_, anchor) = penalty.margin(&buf);
                self.state.screen(g, anchor, self.epoch, RuleKind::Strong);
                self.move_to_anchor(g);
            }
        }
        Ok(())
    }

    /// End of an unsafe phase: record KKT violations and return every
    /// unsafely removed group to the problem.
    fn handoff(&mut self) -> Result<()> {
        let violators = kkt_repair(self.problem, &self.beta, &self.state)?;
        self.trace.kkt_violations.extend(violators);
        self.state.clear_unsafe();
        Ok(())
    }

    fn run_working_sets(&mut self) -> Result<bool> {
        let n_groups = self.problem.n_groups();
        let mut size = self.opts.ws_initial_size.min(n_groups);
        loop {
            self.state.clear_unsafe();
            let start = self.epoch;
            let (mut gap, mut changed) = self.evaluate(Screening::Dynamic, Phase::Safe, start)?;
            while changed && gap <= self.tol_abs {
                (gap, changed) = self.evaluate(Screening::Dynamic, Phase::Safe, start)?;
            }
            if gap <= self.tol_abs {
                return Ok(true);
            }
            if self.epoch >= self.opts.max_epochs {
                return Ok(false);
            }

            let ev = self.last.as_ref().expect("evaluated above");
            let scores = working_set_scores(self.problem, &ev.correlations);
            let mut buf = Vec::new();
            let mut keep = vec![false; n_groups];
            let mut candidates = Vec::new();
            for g in self.state.active_groups() {
                self.problem.groups.gather(g, &ev.correlations, &mut buf);
                let (_, anchor) = self.problem.penalty.margin(&buf);
                let at = self.problem.penalty.anchor_value(anchor);
                if self.problem.groups.group(g).iter().any(|&j| self.beta[j] != at) {
                    keep[g] = true;
                } else {
                    candidates.push((scores[g], g, anchor));
                }
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut n_keep = keep.iter().filter(|k| **k).count();
            let mut excluded = Vec::new();
            for (_, g, anchor) in candidates {
                if n_keep < size {
                    keep[g] = true;
                    n_keep += 1;
                } else {
                    excluded.push((g, anchor));
                }
            }
            for (g, anchor) in excluded {
                self.state.screen(g, anchor, self.epoch, RuleKind::WorkingSet);
            }

            let inner_tol = self.tol_abs.max(0.3 * gap);
            self.run_phase(Screening::Off, inner_tol, Phase::Inner)?;
            size = ((size as f64) * self.opts.ws_growth_factor).ceil() as usize;
            size = size.min(n_groups);
        }
    }

    fn finish(mut self, converged: bool) -> (Solution, SolveTrace) {
        self.state.clear_unsafe();
        let last = self.last.take().expect("at least one evaluation runs");
        let solution = Solution {
            primal: last.primal,
            gap: last.gap,
            dual: last.point,
            beta: self.beta,
            epochs: self.epoch,
            converged,
            state: self.state,
        };
        (solution, self.trace)
    }
}

/// One cyclic pass of proximal block coordinate descent over the active
/// groups, with block step `1/‖X_g‖²`. `residual` must equal `y − Xβ` and is
/// kept in sync.
pub fn cd_epoch(
    problem: &Problem,
    beta: &mut [f64],
    residual: &mut [f64],
    state: &ScreenState,
) -> Result<()> {
    cd_epoch_with(problem, beta, residual, state, &mut Vec::new(), &mut Vec::new())
}

fn cd_epoch_with(
    problem: &Problem,
    beta: &mut [f64],
    residual: &mut [f64],
    state: &ScreenState,
    block_in: &mut Vec<f64>,
    block_out: &mut Vec<f64>,
) -> Result<()> {
    let x = problem.x;
    let penalty = &problem.penalty;
    for g in 0..problem.n_groups() {
        if !state.is_active(g) {
            continue;
        }
        let norm = problem.groups.norm(g);
        if norm == 0.0 {
            return Err(Error::Internal(format!("group {g} has a zero operator norm but is active")));
        }
        let step = 1.0 / (problem.loss.smoothness() * norm * norm);
        let cols = problem.groups.group(g);
        if let [j] = *cols {
            let v = beta[j] + step * x.col_dot(j, residual);
            let mut out = [0.0];
            penalty.prox_into(&[v], step, &mut out);
            let delta = out[0] - beta[j];
            if delta != 0.0 {
                beta[j] = out[0];
                x.col_axpy(j, -delta, residual);
            }
        } else {
            block_in.clear();
            block_in.extend(cols.iter().map(|&j| beta[j] + step * x.col_dot(j, residual)));
            block_out.resize(cols.len(), 0.0);
            penalty.prox_into(block_in, step, block_out);
            for (k, &j) in cols.iter().enumerate() {
                let delta = block_out[k] - beta[j];
                if delta != 0.0 {
                    beta[j] = block_out[k];
                    x.col_axpy(j, -delta, residual);
                }
            }
        }
    }
    Ok(())
}

/// Result of [`solve_svm`]. `dual[i] ∈ [0, 1]` is the weight of sample `i`.
#[derive(Debug, Clone)]
pub struct SvmSolution {
    pub beta: Vec<f64>,
    pub dual: Vec<f64>,
    pub primal: f64,
    pub gap: f64,
    pub epochs: usize,
    pub converged: bool,
    /// `Some(Lower)`: certified non-support (`dual = 0`);
    /// `Some(Upper)`: certified margin violator (`dual = 1`).
    pub screened: Vec<Option<Anchor>>,
}

/// Snapshot passed to the SVM observer.
#[derive(Debug)]
pub struct SvmSnapshot<'s> {
    pub epoch: usize,
    pub beta: &'s [f64],
    pub dual: &'s [f64],
    pub gap: f64,
    pub radius: f64,
    pub screened: &'s [Option<Anchor>],
}

/// Linear SVM without intercept,
/// `min_β Σ_i max(0, 1 − y_i x_i^T β) + (λ/2)‖β‖²`,
/// by dual coordinate ascent. The primal is λ-strongly convex, so
/// `B(β, √(2·Gap/λ))` contains the optimum; samples whose margin stays on one
/// side of 1 over the whole ball have a known dual value and are removed.
/// Only `tol`, `max_epochs`, `screen_every` and the rule (`None` disables
/// screening) are used from `opts`; the stopping threshold is `tol·n`.
pub fn solve_svm(
    x: &DesignMatrix,
    labels: &[f64],
    lambda: f64,
    opts: &SolveOptions,
    mut observer: Option<&mut dyn FnMut(&SvmSnapshot)>,
) -> Result<(SvmSolution, SolveTrace)> {
    opts.validate()?;
    let n = x.n_rows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
    }
    if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::InvalidOption("labels must be +1 or -1".into()));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidPenalty(format!("lambda must be positive, got {lambda}")));
    }
    let rows = x.transpose();
    let p = x.n_cols();
    let screening = opts.rule != Rule::None;
    let started = Instant::now();
    let tol_abs = opts.tol * n as f64;

    let mut a = vec![0.0; n];
    let mut beta = vec![0.0; p];
    let mut screened: Vec<Option<Anchor>> = vec![None; n];
    for i in 0..n {
        if rows.col_norm(i) == 0.0 {
            // hinge is constant 1 there, so the dual weight saturates
            screened[i] = Some(Anchor::Upper);
            a[i] = 1.0;
        }
    }

    let mut trace = SolveTrace::default();
    let primal = |beta: &[f64]| -> f64 {
        let loss: f64 = (0..n)
            .map(|i| (1.0 - labels[i] * rows.col_dot(i, beta)).max(0.0))
            .sum();
        loss + 0.5 * lambda * dot(beta, beta)
    };
    let dual = |a: &[f64], beta: &[f64]| -> f64 {
        a.iter().sum::<f64>() - 0.5 * lambda * dot(beta, beta)
    };
    trace.primal_by_epoch.push(primal(&beta));

    let mut epoch = 0;
    let (mut gap, converged) = loop {
        if epoch % opts.screen_every == 0 || epoch >= opts.max_epochs {
            let pv = primal(&beta);
            let dv = dual(&a, &beta);
            let gap = crate::duality::clamp_gap(pv - dv, n as f64)?;
            let radius = (2.0 * certified_gap(gap, pv, dv) / lambda).sqrt();
            if screening {
                for i in 0..n {
                    if screened[i].is_some() {
                        continue;
                    }
                    let m = labels[i] * rows.col_dot(i, &beta);
                    let spread = radius * rows.col_norm(i);
                    let target = if m - spread > 1.0 {
                        Some((Anchor::Lower, 0.0))
                    } else if m + spread < 1.0 {
                        Some((Anchor::Upper, 1.0))
                    } else {
                        None
                    };
                    if let Some((anchor, value)) = target {
                        screened[i] = Some(anchor);
                        let delta = value - a[i];
                        if delta != 0.0 {
                            a[i] = value;
                            rows.col_axpy(i, delta * labels[i] / lambda, &mut beta);
                        }
                    }
                }
            }
            let n_screened = screened.iter().filter(|s| s.is_some()).count();
            trace.rows.push(TraceRow {
                epoch,
                primal: pv,
                dual: dv,
                gap,
                radius,
                n_screened,
                n_unsafe: 0,
                ms: started.elapsed().as_secs_f64() * 1e3,
                phase: Phase::Safe,
            });
            if let Some(obs) = observer.as_mut() {
                obs(&SvmSnapshot {
                    epoch,
                    beta: &beta,
                    dual: &a,
                    gap,
                    radius,
                    screened: &screened,
                });
            }
            if gap <= tol_abs {
                let pv = primal(&beta);
                let final_gap = crate::duality::clamp_gap(pv - dual(&a, &beta), n as f64)?;
                if final_gap <= tol_abs {
                    break (final_gap, true);
                }
            }
            if epoch >= opts.max_epochs {
                break (gap, false);
            }
        }
        for i in 0..n {
            if screened[i].is_some() {
                continue;
            }
            let sq = rows.col_norm(i).powi(2);
            let m = labels[i] * rows.col_dot(i, &beta);
            let new = (a[i] + lambda * (1.0 - m) / sq).clamp(0.0, 1.0);
            let delta = new - a[i];
            if delta != 0.0 {
                a[i] = new;
                rows.col_axpy(i, delta * labels[i] / lambda, &mut beta);
            }
        }
        epoch += 1;
        if epoch % RESIDUAL_REFRESH == 0 {
            beta.iter_mut().for_each(|b| *b = 0.0);
            for i in 0..n {
                if a[i] != 0.0 {
                    rows.col_axpy(i, a[i] * labels[i] / lambda, &mut beta);
                }
            }
        }
        let pv = primal(&beta);
        if pv.is_nan() {
            return Err(Error::NonFinite(format!("SVM primal at epoch {epoch}")));
        }
        trace.primal_by_epoch.push(pv);
    };
    if gap.is_nan() {
        gap = f64::INFINITY;
    }
    let sol = SvmSolution {
        primal: primal(&beta),
        beta,
        dual: a,
        gap,
        epochs: epoch,
        converged,
        screened,
    };
    Ok((sol, trace))
}
