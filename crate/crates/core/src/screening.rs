//! Screening state and rules.
//!
//! Safe rules certify `β̂_g = β*_g` with a ball known to contain the dual
//! optimum. The unsafe heuristics here (strong rule, previous active set,
//! aggressive radius, working-set scores) only propose candidates; groups they
//! remove are tagged so the solver can check and undo them.
//!
//! Every rule is phrased through [`PenaltyModel::margin`]: the slack of a
//! group's correlation inside the subdifferential at its anchor.

use serde::{Deserialize, Serialize};

use crate::duality::{gap_radius, SafeBall};
use crate::error::{Error, Result};
use crate::penalties::{Anchor, PenaltyModel};
use crate::problem::Problem;

/// Tolerance used when deciding membership of the oracle active set and when
/// flagging KKT violations.
pub const ACTIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Safe,
    Strong,
    Aggressive,
    WorkingSet,
}

impl RuleKind {
    pub fn is_safe(self) -> bool {
        self == RuleKind::Safe
    }
}

/// Which groups are still in play, and why the others are not.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenState {
    active: Vec<bool>,
    anchors: Vec<Option<Anchor>>,
    screened_at: Vec<Option<usize>>,
    kinds: Vec<Option<RuleKind>>,
}

impl ScreenState {
    pub fn new(n_groups: usize) -> Self {
        ScreenState {
            active: vec![true; n_groups],
            anchors: vec![None; n_groups],
            screened_at: vec![None; n_groups],
            kinds: vec![None; n_groups],
        }
    }

    pub fn n_groups(&self) -> usize {
        self.active.len()
    }

    pub fn is_active(&self, g: usize) -> bool {
        self.active[g]
    }

    pub fn anchor(&self, g: usize) -> Option<Anchor> {
        self.anchors[g]
    }

    pub fn kind(&self, g: usize) -> Option<RuleKind> {
        self.kinds[g]
    }

    pub fn screened_at(&self, g: usize) -> Option<usize> {
        self.screened_at[g]
    }

    /// Value the coordinates of a screened group are fixed to.
    pub fn fixed_value(&self, g: usize, penalty: &PenaltyModel) -> Option<f64> {
        self.anchors[g].map(|a| penalty.anchor_value(a))
    }

    /// Mark `g` as screened. Returns false if it already was.
    pub fn screen(&mut self, g: usize, anchor: Anchor, epoch: usize, kind: RuleKind) -> bool {
        if !self.active[g] {
            return false;
        }
        self.active[g] = false;
        self.anchors[g] = Some(anchor);
        self.screened_at[g] = Some(epoch);
        self.kinds[g] = Some(kind);
        true
    }

    /// Put an unsafely screened group back. Safe eliminations are permanent.
    pub fn reactivate(&mut self, g: usize) -> Result<()> {
        match self.kinds[g] {
            Some(RuleKind::Safe) => Err(Error::Internal(format!(
                "group {g} was safely screened and cannot be reactivated"
            ))),
            _ => {
                self.active[g] = true;
                self.anchors[g] = None;
                self.screened_at[g] = None;
                self.kinds[g] = None;
                Ok(())
            }
        }
    }

    /// Reactivate every unsafely screened group; returns them.
    pub fn clear_unsafe(&mut self) -> Vec<usize> {
        let groups = self.unsafe_groups();
        for &g in &groups {
            self.active[g] = true;
            self.anchors[g] = None;
            self.screened_at[g] = None;
            self.kinds[g] = None;
        }
        groups
    }

    pub fn unsafe_groups(&self) -> Vec<usize> {
        (0..self.n_groups())
            .filter(|&g| self.kinds[g].is_some_and(|k| !k.is_safe()))
            .collect()
    }

    pub fn active_groups(&self) -> Vec<usize> {
        (0..self.n_groups()).filter(|&g| self.active[g]).collect()
    }

    /// `true` for groups in the current working problem.
    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    /// `true` for groups not removed by a safe rule (the safe active set).
    pub fn safe_active_mask(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| *k != Some(RuleKind::Safe)).collect()
    }

    pub fn n_screened(&self) -> usize {
        self.active.iter().filter(|a| !**a).count()
    }

    pub fn n_safe(&self) -> usize {
        self.kinds.iter().filter(|k| **k == Some(RuleKind::Safe)).count()
    }

    pub fn n_unsafe(&self) -> usize {
        self.n_screened() - self.n_safe()
    }
}

/// Screen every active group whose margin at the ball center exceeds
/// `radius·‖X_g‖`. `center_corr` holds `X^T c` (entries of already screened
/// groups are ignored). Returns the newly screened groups.
pub fn screen_with_correlations(
    state: &mut ScreenState,
    problem: &Problem,
    center_corr: &[f64],
    radius: f64,
    epoch: usize,
    kind: RuleKind,
) -> Result<Vec<usize>> {
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::NegativeRadius(radius));
    }
    let mut buf = Vec::new();
    let mut hits = Vec::new();
    for g in 0..problem.n_groups() {
        if !state.is_active(g) {
            continue;
        }
        let norm = problem.groups.norm(g);
        if norm == 0.0 {
            continue;
        }
        problem.groups.gather(g, center_corr, &mut buf);
        if let Some(anchor) = problem.penalty.sphere_test(&buf, radius, norm)? {
            hits.push((g, anchor));
        }
    }
    // Commit in one step once every test has been evaluated.
    Ok(hits
        .into_iter()
        .filter_map(|(g, a)| state.screen(g, a, epoch, kind).then_some(g))
        .collect())
}

/// Safe screening with an explicit ball. Returns the number of groups newly
/// screened.
pub fn safe_screen(
    state: &mut ScreenState,
    problem: &Problem,
    ball: &SafeBall,
    epoch: usize,
) -> Result<usize> {
    let corr = active_correlations(state, problem, &ball.center);
    Ok(screen_with_correlations(state, problem, &corr, ball.radius, epoch, RuleKind::Safe)?.len())
}

fn active_correlations(state: &ScreenState, problem: &Problem, v: &[f64]) -> Vec<f64> {
    let mut corr = vec![0.0; problem.n_features()];
    for g in state.active_groups() {
        for &j in problem.groups.group(g) {
            corr[j] = problem.x.col_dot(j, v);
        }
    }
    corr
}

fn margins(problem: &Problem, penalty: &PenaltyModel, corr: &[f64]) -> Vec<(f64, Anchor)> {
    let mut buf = Vec::new();
    (0..problem.n_groups())
        .map(|g| {
            problem.groups.gather(g, corr, &mut buf);
            penalty.margin(&buf)
        })
        .collect()
}

/// Groups the strong rule would discard when moving from `lambda_prev` to
/// the weight of `penalty_new`: `margin_new(X_g^T θ_prev) > |λ_prev − λ_new|`.
/// `prev_corr` is `X^T θ_prev`. Advisory only.
pub fn strong_rule_set(
    problem: &Problem,
    prev_corr: &[f64],
    lambda_prev: f64,
    penalty_new: &PenaltyModel,
) -> Vec<bool> {
    let shift = penalty_new
        .lambda()
        .map_or(0.0, |l| (lambda_prev - l).abs());
    margins(problem, penalty_new, prev_corr)
        .into_iter()
        .map(|(m, _)| m > shift)
        .collect()
}

/// Groups strictly inside the subdifferential at the previous dual point.
/// Advisory only.
pub fn previous_active_set(
    problem: &Problem,
    prev_corr: &[f64],
    penalty_new: &PenaltyModel,
) -> Vec<bool> {
    margins(problem, penalty_new, prev_corr)
        .into_iter()
        .map(|(m, _)| m > 0.0)
        .collect()
}

/// Radius of the aggressive ball at epoch `k`: the gap is replaced by
/// `(1−η)|P_{k−s} − P_k| + η·gap`. `primal_history[i]` is the primal value
/// after `i` epochs. Falls back to the gap radius when `k < s`.
pub fn aggressive_radius(
    primal_history: &[f64],
    k: usize,
    s: usize,
    gap: f64,
    eta: f64,
    mu_d: f64,
) -> f64 {
    if k < s || k >= primal_history.len() {
        return gap_radius(gap, mu_d);
    }
    let progress = (primal_history[k - s] - primal_history[k]).abs();
    let estimate = (1.0 - eta) * progress + eta * gap;
    gap_radius(estimate, mu_d)
}

/// Distance of each group to the boundary of its subdifferential, per unit
/// of `‖X_g‖`. Smaller means more likely to be active; zero-norm groups get
/// `+∞`. `corr` is `X^T θ`.
pub fn working_set_scores(problem: &Problem, corr: &[f64]) -> Vec<f64> {
    margins(problem, &problem.penalty, corr)
        .into_iter()
        .enumerate()
        .map(|(g, (m, _))| {
            let norm = problem.groups.norm(g);
            if norm == 0.0 {
                f64::INFINITY
            } else {
                m / norm
            }
        })
        .collect()
}

/// Unsafely screened groups whose optimality condition fails at `β`, i.e.
/// whose correlation with the residual `y − Xβ` is not strictly inside the
/// subdifferential at the anchor they were fixed to.
pub fn kkt_repair(problem: &Problem, beta: &[f64], state: &ScreenState) -> Result<Vec<usize>> {
    let suspects = state.unsafe_groups();
    if suspects.is_empty() {
        return Ok(Vec::new());
    }
    let residual = problem.residual(beta)?;
    let mut buf = Vec::new();
    let mut violators = Vec::new();
    for g in suspects {
        problem.group_correlation(g, &residual, &mut buf);
        let (margin, anchor) = problem.penalty.margin(&buf);
        let wrong_anchor = state.anchor(g).is_some_and(|a| a != anchor);
        if margin <= ACTIVE_TOL || wrong_anchor {
            violators.push(g);
        }
    }
    Ok(violators)
}
