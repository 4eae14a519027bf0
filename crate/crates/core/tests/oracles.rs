//! Solutions checked against closed forms and brute-force enumeration.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use screenkit::solver::{solve, SolveOptions};
use screenkit::{DesignMatrix, GroupStructure, LossModel, PenaltyModel, Problem, Rule};

fn gaussian(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal));
    let y = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
    (x, y)
}

fn design(x: &DMatrix<f64>) -> DesignMatrix {
    DesignMatrix::from_col_major(x.nrows(), x.ncols(), x.as_slice().to_vec()).unwrap()
}

fn tight(rule: Rule) -> SolveOptions {
    SolveOptions {
        tol: 1e-14,
        max_epochs: 200_000,
        rule,
        ..Default::default()
    }
}

fn objective(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    0.5 * (y - x * beta).norm_squared()
}

#[test]
fn spectral_norm_matches_svd() {
    for seed in 0..5 {
        let (x, _) = gaussian(12, 7, seed);
        let top = x.clone().svd(false, false).singular_values.max();
        let est = design(&x).spectral_norm();
        assert!(est.converged);
        assert!((est.value - top).abs() < 1e-8 * top, "{} vs {}", est.value, top);
    }
}

#[test]
fn elastic_net_solves_its_signed_normal_equations() {
    // β̂ = (X_A^T X_A + λαI)^{-1}(X_A^T y − λ s_A) on the support A with signs s
    for seed in 0..5 {
        let (x, y) = gaussian(30, 6, 10 + seed);
        let dm = design(&x);
        let g = GroupStructure::singletons(&dm);
        let loss = LossModel::quadratic(y.as_slice().to_vec());
        let (lambda, ridge) = (0.5, 0.8);
        let p = Problem::new(&dm, &g, &loss, PenaltyModel::elastic_net(lambda, ridge).unwrap()).unwrap();
        let (sol, _) = solve(&p, &tight(Rule::DynamicGap)).unwrap();
        assert!(sol.converged);
        let support: Vec<usize> = (0..6).filter(|&j| sol.beta[j] != 0.0).collect();
        let xa = x.select_columns(&support);
        let signs = DVector::from_iterator(support.len(), support.iter().map(|&j| sol.beta[j].signum()));
        let lhs = xa.transpose() * &xa + DMatrix::identity(support.len(), support.len()) * (lambda * ridge);
        let rhs = xa.transpose() * &y - signs * lambda;
        let closed = lhs.lu().solve(&rhs).unwrap();
        for (k, &j) in support.iter().enumerate() {
            assert!((closed[k] - sol.beta[j]).abs() < 1e-7, "seed {seed} j {j}");
        }
        // off-support coordinates satisfy |x_j^T r| ≤ λ
        let r = &y - &x * DVector::from_column_slice(&sol.beta);
        for j in (0..6).filter(|j| !support.contains(j)) {
            assert!(x.column(j).dot(&r).abs() <= lambda + 1e-7);
        }
    }
}

/// Minimize ½‖y − Xβ‖² over β_j ∈ [lo, hi] by trying every assignment of
/// each coordinate to {lower, upper, free} and solving for the free part.
fn box_brute_force(x: &DMatrix<f64>, y: &DVector<f64>, lo: f64, hi: f64) -> DVector<f64> {
    let p = x.ncols();
    let mut best = (f64::INFINITY, DVector::zeros(p));
    for code in 0..3usize.pow(p as u32) {
        let mut c = code;
        let mut beta = DVector::zeros(p);
        let mut free = Vec::new();
        for j in 0..p {
            match c % 3 {
                0 => beta[j] = lo,
                1 => beta[j] = hi,
                _ => free.push(j),
            }
            c /= 3;
        }
        if !free.is_empty() {
            let xf = x.select_columns(&free);
            let target = y - x * &beta;
            let Some(sub) = (xf.transpose() * &xf).lu().solve(&(xf.transpose() * target)) else {
                continue;
            };
            if sub.iter().any(|v| *v < lo || *v > hi) {
                continue;
            }
            for (k, &j) in free.iter().enumerate() {
                beta[j] = sub[k];
            }
        }
        let val = objective(x, y, &beta);
        if val < best.0 {
            best = (val, beta);
        }
    }
    best.1
}

#[test]
fn box_constrained_least_squares_matches_enumeration() {
    for seed in 0..6 {
        let (x, y) = gaussian(10, 4, 100 + seed);
        let y = y * 3.0;
        let dm = design(&x);
        let g = GroupStructure::singletons(&dm);
        let loss = LossModel::quadratic(y.as_slice().to_vec());
        let p = Problem::new(&dm, &g, &loss, PenaltyModel::boxed(-0.5, 0.5).unwrap()).unwrap();
        let expected = box_brute_force(&x, &y, -0.5, 0.5);
        for rule in [Rule::None, Rule::DynamicGap, Rule::WorkingSet] {
            let (sol, _) = solve(&p, &tight(rule)).unwrap();
            assert!(sol.converged);
            for j in 0..4 {
                assert!((sol.beta[j] - expected[j]).abs() < 1e-6, "seed {seed} {rule} j {j}");
            }
        }
    }
}

#[test]
fn non_negative_least_squares_matches_enumeration() {
    // λ = 0 makes the penalty the plain nonnegativity constraint; a large
    // upper bound turns the box enumeration into an NNLS oracle.
    for seed in 0..6 {
        let (x, y) = gaussian(12, 4, 200 + seed);
        let dm = design(&x);
        let g = GroupStructure::singletons(&dm);
        let loss = LossModel::quadratic(y.as_slice().to_vec());
        let lambda = 0.3;
        let p = Problem::new(&dm, &g, &loss, PenaltyModel::non_negative(lambda).unwrap()).unwrap();
        // shift y so that the linear term is absorbed: ½‖y − Xβ‖² + λ1^Tβ
        let xtx = x.transpose() * &x;
        let shift = xtx.clone().lu().solve(&DVector::from_element(4, lambda)).unwrap();
        let y_eff = &y - &x * &shift;
        let expected = box_brute_force(&x, &y_eff, 0.0, 1e6);
        let (sol, _) = solve(&p, &tight(Rule::DynamicGap)).unwrap();
        assert!(sol.converged);
        for j in 0..4 {
            assert!((sol.beta[j] - expected[j]).abs() < 1e-6, "seed {seed} j {j}: {} vs {}", sol.beta[j], expected[j]);
        }
    }
}

#[test]
fn group_lasso_single_group_closed_form() {
    // orthonormal columns: β̂ = max(0, 1 − λ/‖X^T y‖)·X^T y
    let (a, y) = gaussian(8, 3, 300);
    let q = a.qr().q();
    let dm = design(&q);
    let g = GroupStructure::new(&dm, vec![vec![0, 1, 2]]).unwrap();
    let loss = LossModel::quadratic(y.as_slice().to_vec());
    let c = q.transpose() * &y;
    for lambda in [0.2 * c.norm(), 0.7 * c.norm(), 1.2 * c.norm()] {
        let p = Problem::new(&dm, &g, &loss, PenaltyModel::group_l2(lambda).unwrap()).unwrap();
        let (sol, _) = solve(&p, &tight(Rule::DynamicGap)).unwrap();
        let factor = (1.0 - lambda / c.norm()).max(0.0);
        for j in 0..3 {
            assert!((sol.beta[j] - factor * c[j]).abs() < 1e-8);
        }
    }
}
