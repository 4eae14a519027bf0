//! Invariants of the solver and the screening rules on random problems.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use screenkit::duality::{dual_point, duality_gap};
use screenkit::path::{lambda_grid, solve_path};
use screenkit::solver::{solve, solve_observed, Phase, SolveOptions};
use screenkit::{DesignMatrix, GroupStructure, LossModel, PenaltyModel, Problem, Rule, RuleKind};

fn random_problem(n: usize, p: usize, seed: u64) -> (DesignMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (DesignMatrix::from_rows(&rows).unwrap(), y)
}

fn penalty_for(kind: u8, lambda: f64) -> PenaltyModel {
    match kind % 4 {
        0 => PenaltyModel::l1(lambda).unwrap(),
        1 => PenaltyModel::elastic_net(lambda, 0.5).unwrap(),
        2 => PenaltyModel::group_l2(lambda).unwrap(),
        _ => PenaltyModel::non_negative(lambda).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn descent_weak_duality_and_safe_screening(seed in 0u64..10_000, kind in 0u8..4, ratio in 0.05f64..0.9) {
        let (x, y) = random_problem(15, 24, seed);
        let groups = if kind % 4 == 2 {
            GroupStructure::contiguous(&x, 3).unwrap()
        } else {
            GroupStructure::singletons(&x)
        };
        let loss = LossModel::quadratic(y);
        let unit = Problem::new(&x, &groups, &loss, penalty_for(kind, 1.0)).unwrap();
        let lmax = unit.lambda_max().unwrap();
        prop_assume!(lmax > 0.0);
        let problem = unit.with_penalty(penalty_for(kind, ratio * lmax)).unwrap();

        let reference = solve(&problem, &SolveOptions::with_rule(Rule::None, 1e-13)).unwrap().0;
        prop_assert!(reference.converged);

        let mut weak_duality_ok = true;
        let mut observer = |s: &screenkit::solver::Snapshot| {
            if s.dual > s.primal + 1e-10 {
                weak_duality_ok = false;
            }
        };
        let opts = SolveOptions { tol: 1e-9, screen_every: 1, ..Default::default() };
        let (sol, trace) = solve_observed(&problem, &opts, &mut observer).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(weak_duality_ok);
        for w in trace.primal_by_epoch.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        for g in 0..problem.n_groups() {
            if let Some(v) = sol.state.fixed_value(g, &problem.penalty) {
                for &j in problem.groups.group(g) {
                    prop_assert!((reference.beta[j] - v).abs() < 1e-9, "group {} screened wrongly", g);
                }
            }
        }
        let full_gap = duality_gap(&problem, &sol.beta, &dual_point(&problem, &sol.beta).unwrap()).unwrap();
        prop_assert!(full_gap <= 1e-9 * problem.loss.target_norm_sq() * (1.0 + 1e-6) + 1e-12);
    }

    #[test]
    fn screened_count_never_decreases(seed in 0u64..10_000, ratio in 0.05f64..0.9) {
        let (x, y) = random_problem(20, 40, seed);
        let groups = GroupStructure::singletons(&x);
        let loss = LossModel::quadratic(y);
        let unit = Problem::new(&x, &groups, &loss, PenaltyModel::l1(1.0).unwrap()).unwrap();
        let problem = unit.with_penalty(PenaltyModel::l1(ratio * unit.lambda_max().unwrap()).unwrap()).unwrap();
        let (_, trace) = solve(&problem, &SolveOptions { screen_every: 1, ..Default::default() }).unwrap();
        for w in trace.rows.windows(2) {
            prop_assert!(w[1].n_screened >= w[0].n_screened);
        }
    }
}

#[test]
fn path_matches_independent_solves() {
    let (x, y) = random_problem(25, 60, 7);
    let groups = GroupStructure::singletons(&x);
    let loss = LossModel::quadratic(y);
    let base = Problem::new(&x, &groups, &loss, PenaltyModel::l1(1.0).unwrap()).unwrap();
    let spec = lambda_grid(base.lambda_max().unwrap(), 0.05, 6).unwrap();
    let opts = SolveOptions::with_rule(Rule::DynamicGap, 1e-12);
    let points = solve_path(&base, &spec, &opts).unwrap();
    assert_eq!(points.len(), 6);
    for point in &points {
        let done = point.outcome.as_ref().unwrap();
        let single = base.with_penalty(PenaltyModel::l1(point.lambda).unwrap()).unwrap();
        let (alone, _) = solve(&single, &SolveOptions::with_rule(Rule::None, 1e-12)).unwrap();
        for (a, b) in done.solution.beta.iter().zip(&alone.beta) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn unsafe_phases_end_with_only_safe_screens() {
    let (x, y) = random_problem(30, 80, 11);
    let groups = GroupStructure::singletons(&x);
    let loss = LossModel::quadratic(y);
    let unit = Problem::new(&x, &groups, &loss, PenaltyModel::l1(1.0).unwrap()).unwrap();
    let problem = unit.with_penalty(PenaltyModel::l1(0.6 * unit.lambda_max().unwrap()).unwrap()).unwrap();
    for rule in [Rule::StrongThenSafe, Rule::AggressiveThenSafe, Rule::WorkingSet] {
        let (sol, trace) = solve(&problem, &SolveOptions::with_rule(rule, 1e-10)).unwrap();
        assert!(sol.converged);
        assert_eq!(trace.rows.last().unwrap().phase, Phase::Safe);
        for g in 0..problem.n_groups() {
            assert!(matches!(sol.state.kind(g), None | Some(RuleKind::Safe)), "{rule}: group {g}");
        }
    }
}
