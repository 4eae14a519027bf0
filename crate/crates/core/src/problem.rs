//! A problem instance: design, grouping, loss and penalty bundled together.

use crate::error::{Error, Result};
use crate::linalg::{DesignMatrix, GroupStructure};
use crate::losses::LossModel;
use crate::penalties::PenaltyModel;

#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub x: &'a DesignMatrix,
    pub groups: &'a GroupStructure,
    pub loss: &'a LossModel,
    pub penalty: PenaltyModel,
}

impl<'a> Problem<'a> {
    pub fn new(
        x: &'a DesignMatrix,
        groups: &'a GroupStructure,
        loss: &'a LossModel,
        penalty: PenaltyModel,
    ) -> Result<Self> {
        if loss.n_samples() != x.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: x.n_rows(),
                found: loss.n_samples(),
            });
        }
        if groups.n_features() != x.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: x.n_cols(),
                found: groups.n_features(),
            });
        }
        if penalty.requires_singletons() && !groups.all_singletons() {
            return Err(Error::InvalidGroups(format!(
                "the {} penalty needs one column per group",
                penalty.name()
            )));
        }
        if loss.target().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target vector".into()));
        }
        Ok(Problem { x, groups, loss, penalty })
    }

    /// Same data with another penalty (typically a different λ on a path).
    pub fn with_penalty(&self, penalty: PenaltyModel) -> Result<Self> {
        Problem::new(self.x, self.groups, self.loss, penalty)
    }

    pub fn n_samples(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn y(&self) -> &[f64] {
        self.loss.target()
    }

    /// `Σ_g Ω_g(β_g)`.
    pub fn penalty_value(&self, beta: &[f64]) -> f64 {
        let mut buf = Vec::new();
        let mut total = 0.0;
        for g in 0..self.n_groups() {
            self.groups.gather(g, beta, &mut buf);
            total += self.penalty.value(&buf);
        }
        total
    }

    /// `P(β)` computed from scratch.
    pub fn primal(&self, beta: &[f64]) -> Result<f64> {
        let z = self.x.matvec(beta)?;
        Ok(self.loss.value(&z) + self.penalty_value(beta))
    }

    /// `y − Xβ`.
    pub fn residual(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let z = self.x.matvec(beta)?;
        Ok(self.y().iter().zip(&z).map(|(a, b)| a - b).collect())
    }

    /// `X_g^T v` written into `out`.
    pub fn group_correlation(&self, g: usize, v: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.groups.group(g).iter().map(|&j| self.x.col_dot(j, v)));
    }

    /// Smallest weight at which `β = 0` is optimal.
    pub fn lambda_max(&self) -> Result<f64> {
        let c = self.x.rmatvec(self.y())?;
        let mut buf = Vec::new();
        let mut best = 0.0f64;
        for g in 0..self.n_groups() {
            self.groups.gather(g, &c, &mut buf);
            best = best.max(self.penalty.unit_dual_norm(&buf)?);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let x = DesignMatrix::identity(2);
        let g = GroupStructure::singletons(&x);
        let short = LossModel::quadratic(vec![1.0]);
        assert!(Problem::new(&x, &g, &short, PenaltyModel::l1(1.0).unwrap()).is_err());
        let pair = GroupStructure::new(&x, vec![vec![0, 1]]).unwrap();
        let loss = LossModel::quadratic(vec![1.0, 0.0]);
        assert!(Problem::new(&x, &pair, &loss, PenaltyModel::boxed(0.0, 1.0).unwrap()).is_err());
        assert!(Problem::new(&x, &pair, &loss, PenaltyModel::group_l2(1.0).unwrap()).is_ok());
    }

    #[test]
    fn primal_and_residual() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let g = GroupStructure::singletons(&x);
        let loss = LossModel::quadratic(vec![3.0, 7.0]);
        let p = Problem::new(&x, &g, &loss, PenaltyModel::l1(0.5).unwrap()).unwrap();
        assert_eq!(p.residual(&[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.primal(&[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn lambda_max_examples() {
        let x = DesignMatrix::identity(2);
        let singles = GroupStructure::singletons(&x);
        let loss = LossModel::quadratic(vec![1.0, 0.0]);
        let p = Problem::new(&x, &singles, &loss, PenaltyModel::l1(1.0).unwrap()).unwrap();
        assert_eq!(p.lambda_max().unwrap(), 1.0);

        let zero = LossModel::quadratic(vec![0.0, 0.0]);
        let p = Problem::new(&x, &singles, &zero, PenaltyModel::l1(1.0).unwrap()).unwrap();
        assert_eq!(p.lambda_max().unwrap(), 0.0);

        let one = GroupStructure::new(&x, vec![vec![0, 1]]).unwrap();
        let loss = LossModel::quadratic(vec![3.0, 4.0]);
        let p = Problem::new(&x, &one, &loss, PenaltyModel::group_l2(1.0).unwrap()).unwrap();
        assert_eq!(p.lambda_max().unwrap(), 5.0);

        let p = Problem::new(&x, &singles, &loss, PenaltyModel::boxed(0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(p.lambda_max(), Err(Error::Unsupported(_))));
    }
}
