//! Safe screening for sparse convex composite problems.
//!
//! `screenkit` solves problems of the form
//!
//! ```text
//! min_β  f(Xβ) + Σ_g Ω_g(β_g)
//! ```
//!
//! with a cyclic proximal (block) coordinate descent solver, and uses the
//! duality gap to build balls that are guaranteed to contain the dual optimum.
//! Any group whose correlation with every point of such a ball lies strictly
//! inside the subdifferential of its penalty at an anchor point is fixed to that
//! anchor and removed from the working problem.
//!
//! Modules:
//!
//! - [`linalg`]: dense / compressed-column design matrices, group operator norms.
//! - [`losses`]: the quadratic data-fit term and its conjugate.
//! - [`penalties`]: ℓ1, elastic net, group ℓ2, non-negativity and box penalties
//!   with their proximal operators, conjugates and closed-form sphere tests.
//! - [`duality`]: rescaled dual points, duality gaps and gap safe balls.
//! - [`screening`]: cumulative screening state, strong / aggressive / working-set
//!   heuristics and KKT checks.
//! - [`solver`]: coordinate descent with screening hooks, and a dual coordinate
//!   ascent SVM solver with sample screening.
//! - [`path`]: regularization paths with sequential screening and warm starts.
//! - [`identification`]: oracle active sets, identification epochs and the
//!   complexity bounds that predict them.
//!
//! ```
//! use screenkit::{DesignMatrix, GroupStructure, LossModel, PenaltyModel, Problem};
//! use screenkit::solver::{solve, SolveOptions};
//!
//! let x = DesignMatrix::identity(2);
//! let groups = GroupStructure::singletons(&x);
//! let loss = LossModel::quadratic(vec![1.0, 0.0]);
//! let problem = Problem::new(&x, &groups, &loss, PenaltyModel::l1(0.7).unwrap()).unwrap();
//! let (solution, _trace) = solve(&problem, &SolveOptions::default()).unwrap();
//! assert!((solution.beta[0] - 0.3).abs() < 1e-6);
//! assert_eq!(solution.beta[1], 0.0);
//! ```

// `!(a > b)` comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod duality;
pub mod error;
pub mod identification;
pub mod linalg;
pub mod losses;
pub mod path;
pub mod penalties;
pub mod problem;
pub mod screening;
pub mod solver;

pub use duality::{DualPoint, GapEvaluation, SafeBall};
pub use error::{Error, Result};
pub use linalg::{DesignMatrix, GroupStructure};
pub use losses::LossModel;
pub use penalties::{Anchor, PenaltyModel};
pub use problem::Problem;
pub use screening::{RuleKind, ScreenState};
pub use solver::{Rule, Solution, SolveOptions, SolveTrace};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
