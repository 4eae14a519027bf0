//! Smooth data-fitting terms.
//!
//! Only the quadratic loss `f(z) = ½‖y − z‖²` is provided. It is 1-smooth, so
//! the dual objective is 1-strongly concave, which is what gives the gap safe
//! ball its radius `√(2·Gap)`.

use crate::dot;

#[derive(Debug, Clone, PartialEq)]
pub enum LossModel {
    Quadratic { y: Vec<f64> },
}

impl LossModel {
    pub fn quadratic(y: Vec<f64>) -> Self {
        LossModel::Quadratic { y }
    }

    pub fn target(&self) -> &[f64] {
        match self {
            LossModel::Quadratic { y } => y,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.target().len()
    }

    pub fn target_norm_sq(&self) -> f64 {
        let y = self.target();
        dot(y, y)
    }

    /// `f(z)`.
    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            LossModel::Quadratic { y } => {
                assert_eq!(z.len(), y.len(), "loss evaluated at a vector of the wrong length");
                0.5 * y.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
        }
    }

    /// `∇f(z)`.
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        match self {
            LossModel::Quadratic { y } => {
                assert_eq!(z.len(), y.len(), "loss evaluated at a vector of the wrong length");
                z.iter().zip(y).map(|(a, b)| a - b).collect()
            }
        }
    }

    /// `f*(w)`, the Fenchel conjugate.
    pub fn conjugate(&self, w: &[f64]) -> f64 {
        match self {
            LossModel::Quadratic { y } => {
                assert_eq!(w.len(), y.len(), "conjugate evaluated at a vector of the wrong length");
                0.5 * dot(w, w) + dot(w, y)
            }
        }
    }

    /// Lipschitz constant ν_f of the gradient.
    pub fn smoothness(&self) -> f64 {
        match self {
            LossModel::Quadratic { .. } => 1.0,
        }
    }

    /// Strong concavity μ_D = 1/ν_f of the dual objective.
    pub fn dual_strong_concavity(&self) -> f64 {
        1.0 / self.smoothness()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn value_examples() {
        assert_eq!(LossModel::quadratic(vec![1.0, 0.0]).value(&[1.0, 0.0]), 0.0);
        assert_eq!(LossModel::quadratic(vec![1.0, 0.0]).value(&[0.0, 0.0]), 0.5);
        assert_eq!(LossModel::quadratic(vec![0.0, 0.0]).value(&[3.0, 4.0]), 12.5);
    }

    #[test]
    fn gradient_examples() {
        let loss = LossModel::quadratic(vec![1.0, 0.0]);
        assert_eq!(loss.gradient(&[1.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(loss.gradient(&[0.0, 0.0]), vec![-1.0, 0.0]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = 1e-6;
        for _ in 0..50 {
            let y: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let loss = LossModel::quadratic(y);
            let grad = loss.gradient(&z);
            for i in 0..6 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                let fd = (loss.value(&zp) - loss.value(&zm)) / (2.0 * h);
                assert!((grad[i] - fd).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn conjugate_examples() {
        let loss = LossModel::quadratic(vec![1.0, 0.0]);
        assert_eq!(loss.conjugate(&[0.0, 0.0]), 0.0);
        assert_eq!(loss.conjugate(&[1.0, 0.0]), 1.5);
    }

    #[test]
    fn fenchel_young() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let z: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let loss = LossModel::quadratic(y);
            // inequality for arbitrary pairs
            assert!(loss.value(&z) + loss.conjugate(&w) >= dot(&w, &z) - 1e-12);
            // equality at w = ∇f(z)
            let g = loss.gradient(&z);
            let lhs = loss.value(&z) + loss.conjugate(&g);
            assert!((lhs - dot(&g, &z)).abs() <= 1e-10);
        }
    }

    #[test]
    fn gradient_is_one_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let loss = LossModel::quadratic(vec![0.3, -1.0, 2.0]);
        for _ in 0..100 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ga = loss.gradient(&a);
            let gb = loss.gradient(&b);
            let dg: f64 = ga.iter().zip(&gb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let dz: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(dg <= dz * (1.0 + 1e-12));
        }
        assert_eq!(loss.smoothness(), 1.0);
        assert_eq!(loss.dual_strong_concavity(), 1.0);
    }
}
