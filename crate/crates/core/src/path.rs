//! Regularization paths with warm starts and sequential screening.
//!
//! At each grid point the previous coefficients are re-evaluated in the new
//! problem: their residual is rescaled into a dual point feasible for the new
//! weight, and the resulting gap ball screens groups before the first epoch.
//! Screening masks are never carried from one weight to the next.

use crate::duality::{certified_gap, evaluate, gap_safe_ball, SafeBall};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::screening::{screen_with_correlations, RuleKind, ScreenState};
use crate::solver::{solve_from, Rule, Solution, SolveOptions, SolveTrace, StrongPrior, WarmStart};

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    lambdas: Vec<f64>,
}

impl PathSpec {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidOption("empty regularization grid".into()));
        }
        if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidOption("grid values must be positive and finite".into()));
        }
        if lambdas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidOption("grid must be strictly decreasing".into()));
        }
        Ok(PathSpec { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// `λ_t = λ_max·ratio^{t/(T−1)}` for `t = 0..T`.
pub fn lambda_grid(lambda_max: f64, ratio: f64, n_points: usize) -> Result<PathSpec> {
    if n_points < 2 {
        return Err(Error::InvalidOption("a grid needs at least two points".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidOption(format!("grid ratio must lie in (0, 1), got {ratio}")));
    }
    let last = (n_points - 1) as f64;
    let lambdas = (0..n_points)
        .map(|t| {
            if t == 0 {
                lambda_max
            } else if t == n_points - 1 {
                lambda_max * ratio
            } else {
                lambda_max * ratio.powf(t as f64 / last)
            }
        })
        .collect();
    PathSpec::new(lambdas)
}

#[derive(Debug, Clone)]
pub struct PathSolve {
    pub solution: Solution,
    pub trace: SolveTrace,
    /// Groups removed by the sequential ball before the first epoch.
    pub n_sequential: usize,
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub outcome: std::result::Result<PathSolve, Error>,
}

/// Gap safe screening of `problem` with the dual point built from `beta`.
pub fn sequential_screen(problem: &Problem, beta: &[f64]) -> Result<(ScreenState, SafeBall)> {
    let residual = problem.residual(beta)?;
    let ev = evaluate(problem, beta, &residual, None)?;
    let gap = certified_gap(ev.gap, ev.primal, ev.dual);
    let ball = gap_safe_ball(&ev.point, gap, problem.loss.dual_strong_concavity())?;
    let mut state = ScreenState::new(problem.n_groups());
    if ball.radius.is_finite() {
        screen_with_correlations(&mut state, problem, &ev.correlations, ball.radius, 0, RuleKind::Safe)?;
    }
    Ok((state, ball))
}

/// Solve along the grid. The penalty family comes from `problem.penalty`;
/// its own weight is ignored. Failures at one grid point are recorded and
/// the path continues from the last good coefficients.
pub fn solve_path(problem: &Problem, spec: &PathSpec, opts: &SolveOptions) -> Result<Vec<PathPoint>> {
    if problem.penalty.lambda().is_none() {
        return Err(Error::Unsupported(format!(
            "the {} penalty has no regularization weight to vary",
            problem.penalty.name()
        )));
    }
    let mut beta = vec![problem.penalty.feasible_start(); problem.n_features()];
    let mut prior: Option<StrongPrior> = None;
    let mut points = Vec::with_capacity(spec.len());

    for &lambda in spec.lambdas() {
        let outcome = (|| -> Result<PathSolve> {
            let pt = problem.with_penalty(problem.penalty.with_lambda(lambda)?)?;
            let (state, n_sequential) = if opts.rule == Rule::None {
                (None, 0)
            } else {
                let (state, _) = sequential_screen(&pt, &beta)?;
                let n = state.n_safe();
                (Some(state), n)
            };
            let mut local = opts.clone();
            if prior.is_some() {
                local.strong_prior = prior.clone();
            }
            let start = WarmStart {
                beta: Some(beta.clone()),
                state,
            };
            let (solution, trace) = solve_from(&pt, &local, start, None)?;
            Ok(PathSolve {
                solution,
                trace,
                n_sequential,
            })
        })();
        if let Ok(done) = &outcome {
            beta.clone_from(&done.solution.beta);
            prior = Some(StrongPrior {
                correlations: problem.x.rmatvec(&done.solution.dual.theta)?,
                lambda,
            });
        }
        points.push(PathPoint { lambda, outcome });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{DesignMatrix, GroupStructure, LossModel, PenaltyModel};

    #[test]
    fn grid_examples() {
        let g = lambda_grid(1.0, 0.01, 3).unwrap();
        assert_eq!(g.lambdas()[0], 1.0);
        assert!((g.lambdas()[1] - 0.1).abs() < 1e-15);
        assert_eq!(g.lambdas()[2], 0.01);
        assert_eq!(lambda_grid(2.0, 0.5, 2).unwrap().lambdas(), &[2.0, 1.0]);
        assert!(lambda_grid(1.0, 1.0, 5).is_err());
        assert!(lambda_grid(1.0, 0.1, 1).is_err());
        assert!(PathSpec::new(vec![1.0, 1.0]).is_err());
        assert!(PathSpec::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn first_point_at_lambda_max_is_zero_and_screens_everything() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let g = GroupStructure::singletons(&x);
        let l = LossModel::quadratic(vec![1.0, -0.5, 2.0]);
        let base = Problem::new(&x, &g, &l, PenaltyModel::l1(1.0).unwrap()).unwrap();
        let lmax = base.lambda_max().unwrap();
        let spec = lambda_grid(lmax, 0.1, 4).unwrap();
        let points = solve_path(&base, &spec, &SolveOptions::default()).unwrap();
        let first = points[0].outcome.as_ref().unwrap();
        assert!(first.solution.beta.iter().all(|b| *b == 0.0));
        assert_eq!(first.solution.epochs, 0);
        // the sequential ball at λ_max has zero radius; only the maximizing
        // column sits on the boundary
        assert_eq!(first.n_sequential, 1);
        for p in &points {
            assert!(p.outcome.as_ref().unwrap().solution.converged);
        }
    }

    #[test]
    fn box_penalty_has_no_path() {
        let x = DesignMatrix::identity(2);
        let g = GroupStructure::singletons(&x);
        let l = LossModel::quadratic(vec![1.0, 0.0]);
        let p = Problem::new(&x, &g, &l, PenaltyModel::boxed(0.0, 1.0).unwrap()).unwrap();
        let spec = lambda_grid(1.0, 0.1, 3).unwrap();
        assert!(solve_path(&p, &spec, &SolveOptions::default()).is_err());
    }
}
