//! Group-separable penalties Ω_g.
//!
//! Every penalty exposes the pieces the screening machinery needs: its value,
//! proximal operator, Fenchel conjugate, the gauge of the conjugate's domain
//! (used to rescale a gradient into a dual feasible point), and the anchor
//! points β*_g where its subdifferential has nonempty interior. Screening can
//! only ever certify `β̂_g = β*_g`.
//!
//! | penalty                  | anchor | ∂Ω_g(anchor)          |
//! |--------------------------|--------|-----------------------|
//! | `λ‖β‖₁`                  | 0      | `{‖v‖∞ ≤ λ}`          |
//! | `λ(‖β‖₁ + α‖β‖²/2)`      | 0      | `{‖v‖∞ ≤ λ}`          |
//! | `λ‖β_g‖₂`                | 0      | `{‖v‖₂ ≤ λ}`          |
//! | `λΣβ_j + ι_{β ≥ 0}`      | 0      | `{v ≤ λ}`             |
//! | `ι_{[a, b]}`             | a / b  | `(−∞, 0]` / `[0, ∞)`  |
//!
//! All tests are strict: a point on the boundary of the subdifferential is
//! never screened.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{dot, norm2};

/// Relative slack accepted when checking membership of the conjugate's
/// domain, so that a point rescaled exactly onto the boundary is not declared
/// infeasible by rounding.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// The point a screened group is fixed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Anchor {
    Zero,
    /// Lower bound of a box.
    Lower,
    /// Upper bound of a box.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PenaltyModel {
    L1 { lambda: f64 },
    /// `λ(|β| + α β²/2)` per coordinate.
    ElasticNet { lambda: f64, alpha: f64 },
    GroupL2 { lambda: f64 },
    /// `λ Σ β_j` on the nonnegative orthant; `λ = 0` gives plain nonnegative least squares.
    NonNegative { lambda: f64 },
    Box { lower: f64, upper: f64 },
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidPenalty(format!("{name} must be positive and finite, got {v}")))
    }
}

impl PenaltyModel {
    pub fn l1(lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(PenaltyModel::L1 { lambda })
    }

    pub fn elastic_net(lambda: f64, alpha: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidPenalty(format!(
                "alpha must be nonnegative, got {alpha}"
            )));
        }
        Ok(PenaltyModel::ElasticNet { lambda, alpha })
    }

    pub fn group_l2(lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(PenaltyModel::GroupL2 { lambda })
    }

    pub fn non_negative(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidPenalty(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        Ok(PenaltyModel::NonNegative { lambda })
    }

    pub fn boxed(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidPenalty(format!(
                "box bounds must satisfy a < b, got [{lower}, {upper}]"
            )));
        }
        Ok(PenaltyModel::Box { lower, upper })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PenaltyModel::L1 { .. } => "l1",
            PenaltyModel::ElasticNet { .. } => "enet",
            PenaltyModel::GroupL2 { .. } => "group",
            PenaltyModel::NonNegative { .. } => "nonneg",
            PenaltyModel::Box { .. } => "box",
        }
    }

    /// Regularization weight, if the penalty has one.
    pub fn lambda(&self) -> Option<f64> {
        match *self {
            PenaltyModel::L1 { lambda }
            | PenaltyModel::ElasticNet { lambda, .. }
            | PenaltyModel::GroupL2 { lambda }
            | PenaltyModel::NonNegative { lambda } => Some(lambda),
            PenaltyModel::Box { .. } => None,
        }
    }

    /// Same penalty family at a different regularization weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        match *self {
            PenaltyModel::L1 { .. } => Self::l1(lambda),
            PenaltyModel::ElasticNet { alpha, .. } => Self::elastic_net(lambda, alpha),
            PenaltyModel::GroupL2 { .. } => Self::group_l2(lambda),
            PenaltyModel::NonNegative { .. } => Self::non_negative(lambda),
            PenaltyModel::Box { .. } => Err(Error::Unsupported(
                "box constraints have no regularization weight".into(),
            )),
        }
    }

    /// Strong convexity modulus μ_Ω.
    pub fn strong_convexity(&self) -> f64 {
        match *self {
            PenaltyModel::ElasticNet { lambda, alpha } => lambda * alpha,
            _ => 0.0,
        }
    }

    /// Whether the penalty only makes sense with one column per group.
    pub fn requires_singletons(&self) -> bool {
        matches!(self, PenaltyModel::Box { .. })
    }

    /// Coordinate value of an anchor.
    pub fn anchor_value(&self, anchor: Anchor) -> f64 {
        match (self, anchor) {
            (PenaltyModel::Box { lower, .. }, Anchor::Lower) => *lower,
            (PenaltyModel::Box { upper, .. }, Anchor::Upper) => *upper,
            _ => 0.0,
        }
    }

    /// A feasible starting value for every coordinate.
    pub fn feasible_start(&self) -> f64 {
        match *self {
            PenaltyModel::Box { lower, upper } => 0.0f64.clamp(lower, upper),
            _ => 0.0,
        }
    }

    /// Ω_g(β_g); `+∞` outside the domain.
    pub fn value(&self, beta_g: &[f64]) -> f64 {
        match *self {
            PenaltyModel::L1 { lambda } => lambda * beta_g.iter().map(|b| b.abs()).sum::<f64>(),
            PenaltyModel::ElasticNet { lambda, alpha } => {
                lambda
                    * beta_g
                        .iter()
                        .map(|b| b.abs() + 0.5 * alpha * b * b)
                        .sum::<f64>()
            }
            PenaltyModel::GroupL2 { lambda } => lambda * norm2(beta_g),
            PenaltyModel::NonNegative { lambda } => {
                if beta_g.iter().any(|&b| b < 0.0) {
                    f64::INFINITY
                } else {
                    lambda * beta_g.iter().sum::<f64>()
                }
            }
            PenaltyModel::Box { lower, upper } => {
                if beta_g.iter().all(|&b| (lower..=upper).contains(&b)) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_u ½‖u − v‖² + step·Ω_g(u)`, written into `out`.
    pub fn prox_into(&self, v: &[f64], step: f64, out: &mut [f64]) {
        debug_assert!(step > 0.0);
        debug_assert_eq!(v.len(), out.len());
        match *self {
            PenaltyModel::L1 { lambda } => {
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = soft_threshold(x, lambda * step);
                }
            }
            PenaltyModel::ElasticNet { lambda, alpha } => {
                let shrink = 1.0 + lambda * alpha * step;
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = soft_threshold(x, lambda * step) / shrink;
                }
            }
            PenaltyModel::GroupL2 { lambda } => {
                let nv = norm2(v);
                let factor = if nv > lambda * step {
                    1.0 - lambda * step / nv
                } else {
                    0.0
                };
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = factor * x;
                }
            }
            PenaltyModel::NonNegative { lambda } => {
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = (x - lambda * step).max(0.0);
                }
            }
            PenaltyModel::Box { lower, upper } => {
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = x.clamp(lower, upper);
                }
            }
        }
    }

    pub fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.prox_into(v, step, &mut out);
        out
    }

    /// Ω_g*(v); `+∞` outside the conjugate's domain.
    pub fn conjugate(&self, v: &[f64]) -> f64 {
        match *self {
            PenaltyModel::L1 { lambda } => {
                if inf_norm(v) <= lambda * (1.0 + FEASIBILITY_SLACK) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PenaltyModel::ElasticNet { lambda, alpha: 0.0 } => {
                PenaltyModel::L1 { lambda }.conjugate(v)
            }
            PenaltyModel::ElasticNet { lambda, alpha } => v
                .iter()
                .map(|x| {
                    let t = (x.abs() - lambda).max(0.0);
                    t * t / (2.0 * lambda * alpha)
                })
                .sum(),
            PenaltyModel::GroupL2 { lambda } => {
                if norm2(v) <= lambda * (1.0 + FEASIBILITY_SLACK) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PenaltyModel::NonNegative { lambda } => {
                if v.iter().all(|&x| x <= lambda * (1.0 + FEASIBILITY_SLACK)) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PenaltyModel::Box { lower, upper } => {
                v.iter().map(|&x| (lower * x).max(upper * x)).sum()
            }
        }
    }

    /// An element `u ∈ ∂Ω_g*(v)`, for `v` in the conjugate's domain.
    pub fn conjugate_subgradient(&self, v: &[f64]) -> Vec<f64> {
        match *self {
            PenaltyModel::ElasticNet { lambda, alpha } if alpha > 0.0 => v
                .iter()
                .map(|x| x.signum() * (x.abs() - lambda).max(0.0) / (lambda * alpha))
                .collect(),
            PenaltyModel::Box { lower, upper } => v
                .iter()
                .map(|&x| if x > 0.0 { upper } else { lower })
                .collect(),
            // Indicator conjugates: 0 lies in every normal cone.
            _ => vec![0.0; v.len()],
        }
    }

    /// Gauge of the conjugate's domain at `v_g` for one group. The dual
    /// rescaling factor is `max(1, max_g gauge_g)`.
    pub fn group_gauge(&self, v: &[f64]) -> f64 {
        match *self {
            PenaltyModel::L1 { lambda } => inf_norm(v) / lambda,
            PenaltyModel::ElasticNet { lambda, alpha: 0.0 } => inf_norm(v) / lambda,
            PenaltyModel::ElasticNet { .. } | PenaltyModel::Box { .. } => 0.0,
            PenaltyModel::GroupL2 { lambda } => norm2(v) / lambda,
            PenaltyModel::NonNegative { lambda } => {
                let top = v.iter().cloned().fold(0.0f64, f64::max);
                if top == 0.0 {
                    0.0
                } else if lambda == 0.0 {
                    f64::INFINITY
                } else {
                    top / lambda
                }
            }
        }
    }

    /// Gauge of the conjugate's domain for a full length-`p` vector.
    pub fn dual_gauge(&self, v: &[f64], groups: &crate::GroupStructure) -> f64 {
        let mut buf = Vec::new();
        (0..groups.len())
            .map(|g| {
                groups.gather(g, v, &mut buf);
                self.group_gauge(&buf)
            })
            .fold(0.0, f64::max)
    }

    /// The dual-norm-like quantity whose maximum over groups of `X_g^T y`
    /// is the smallest weight at which the anchor is optimal.
    pub(crate) fn unit_dual_norm(&self, v: &[f64]) -> Result<f64> {
        match self {
            PenaltyModel::L1 { .. } | PenaltyModel::ElasticNet { .. } => Ok(inf_norm(v)),
            PenaltyModel::GroupL2 { .. } => Ok(norm2(v)),
            PenaltyModel::NonNegative { .. } => Ok(v.iter().cloned().fold(0.0f64, f64::max)),
            PenaltyModel::Box { .. } => Err(Error::Unsupported(
                "lambda_max is undefined for box constraints".into(),
            )),
        }
    }

    /// Slack of `c_g` inside the subdifferential at the best anchor: the
    /// largest `m` such that every direction's support value of `∂Ω_g(β*_g)`
    /// exceeds that of `{c_g}` by `m`. Negative when `c_g` lies outside.
    pub fn margin(&self, c_g: &[f64]) -> (f64, Anchor) {
        match *self {
            PenaltyModel::L1 { lambda } | PenaltyModel::ElasticNet { lambda, .. } => {
                (lambda - inf_norm(c_g), Anchor::Zero)
            }
            PenaltyModel::GroupL2 { lambda } => (lambda - norm2(c_g), Anchor::Zero),
            PenaltyModel::NonNegative { lambda } => {
                let top = c_g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lambda - top, Anchor::Zero)
            }
            PenaltyModel::Box { .. } => {
                // ∂Ω(a) = (−∞, 0] and ∂Ω(b) = [0, ∞); pick the side c lies on.
                let c = c_g.first().copied().unwrap_or(0.0);
                if c < 0.0 {
                    (-c, Anchor::Lower)
                } else {
                    (c, Anchor::Upper)
                }
            }
        }
    }

    /// Closed-form sphere test. `c_g = X_g^T c` for the ball center `c`,
    /// `group_norm = ‖X_g‖`. Returns the anchor the group is certified to
    /// sit at, or `None` when the ball does not decide it.
    pub fn sphere_test(&self, c_g: &[f64], radius: f64, group_norm: f64) -> Result<Option<Anchor>> {
        if radius < 0.0 || radius.is_nan() {
            return Err(Error::NegativeRadius(radius));
        }
        if radius.is_infinite() {
            return Ok(None);
        }
        let (margin, anchor) = self.margin(c_g);
        Ok((radius * group_norm < margin).then_some(anchor))
    }
}

#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Residual of the prox optimality condition `0 ∈ u − v + step·∂Ω(u)`:
/// the distance from `(v − u)/step` to `∂Ω(u)`, computed by case analysis.
pub fn prox_residual(penalty: &PenaltyModel, v: &[f64], step: f64, u: &[f64]) -> f64 {
    let w: Vec<f64> = v.iter().zip(u).map(|(a, b)| (a - b) / step).collect();
    match *penalty {
        PenaltyModel::L1 { lambda } => w
            .iter()
            .zip(u)
            .map(|(&wi, &ui)| scalar_l1_dist(wi, ui, lambda))
            .fold(0.0, f64::max),
        PenaltyModel::ElasticNet { lambda, alpha } => w
            .iter()
            .zip(u)
            .map(|(&wi, &ui)| scalar_l1_dist(wi - lambda * alpha * ui, ui, lambda))
            .fold(0.0, f64::max),
        PenaltyModel::GroupL2 { lambda } => {
            let nu = norm2(u);
            if nu == 0.0 {
                (norm2(&w) - lambda).max(0.0)
            } else {
                w.iter()
                    .zip(u)
                    .map(|(wi, ui)| (wi - lambda * ui / nu).powi(2))
                    .sum::<f64>()
                    .sqrt()
            }
        }
        PenaltyModel::NonNegative { lambda } => w
            .iter()
            .zip(u)
            .map(|(&wi, &ui)| {
                if ui > 0.0 {
                    (wi - lambda).abs()
                } else {
                    (wi - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max),
        PenaltyModel::Box { lower, upper } => w
            .iter()
            .zip(u)
            .map(|(&wi, &ui)| {
                if ui > lower && ui < upper {
                    wi.abs()
                } else if ui == lower {
                    wi.max(0.0)
                } else {
                    (-wi).max(0.0)
                }
            })
            .fold(0.0, f64::max),
    }
}

fn scalar_l1_dist(w: f64, u: f64, lambda: f64) -> f64 {
    if u > 0.0 {
        (w - lambda).abs()
    } else if u < 0.0 {
        (w + lambda).abs()
    } else {
        (w.abs() - lambda).max(0.0)
    }
}

/// `⟨u, v⟩`, exposed for Fenchel–Young checks.
pub fn pairing(u: &[f64], v: &[f64]) -> f64 {
    dot(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn value_examples() {
        assert_eq!(PenaltyModel::l1(0.5).unwrap().value(&[-2.0]), 1.0);
        assert_eq!(PenaltyModel::non_negative(0.0).unwrap().value(&[-1.0]), f64::INFINITY);
        assert_eq!(PenaltyModel::group_l2(1.0).unwrap().value(&[3.0, 4.0]), 5.0);
        assert_eq!(PenaltyModel::boxed(0.0, 1.0).unwrap().value(&[1.5]), f64::INFINITY);
        assert_eq!(PenaltyModel::boxed(0.0, 1.0).unwrap().value(&[0.5]), 0.0);
    }

    #[test]
    fn prox_examples() {
        assert_eq!(PenaltyModel::l1(0.5).unwrap().prox(&[2.0], 1.0), vec![1.5]);
        assert_eq!(PenaltyModel::non_negative(0.0).unwrap().prox(&[-3.0], 1.0), vec![0.0]);
        let u = PenaltyModel::group_l2(1.0).unwrap().prox(&[3.0, 4.0], 1.0);
        assert!((u[0] - 2.4).abs() < 1e-15 && (u[1] - 3.2).abs() < 1e-15);
    }

    #[test]
    fn gauge_examples() {
        let x = crate::DesignMatrix::identity(2);
        let singles = crate::GroupStructure::singletons(&x);
        let one = crate::GroupStructure::new(&x, vec![vec![0, 1]]).unwrap();
        assert_eq!(PenaltyModel::l1(0.5).unwrap().dual_gauge(&[1.0, 0.0], &singles), 2.0);
        assert_eq!(
            PenaltyModel::elastic_net(0.5, 1.0).unwrap().dual_gauge(&[7.0, -3.0], &singles),
            0.0
        );
        assert_eq!(PenaltyModel::group_l2(2.0).unwrap().dual_gauge(&[3.0, 4.0], &one), 2.5);
        assert_eq!(PenaltyModel::boxed(-1.0, 1.0).unwrap().dual_gauge(&[5.0, 4.0], &singles), 0.0);
        // A ray leaving the nonnegative-orthant dual cone cannot be rescaled back.
        assert_eq!(
            PenaltyModel::non_negative(0.0).unwrap().dual_gauge(&[1.0, -2.0], &singles),
            f64::INFINITY
        );
        assert_eq!(
            PenaltyModel::non_negative(0.5).unwrap().dual_gauge(&[1.0, -2.0], &singles),
            2.0
        );
    }

    #[test]
    fn sphere_test_examples() {
        let l1 = PenaltyModel::l1(0.5).unwrap();
        assert_eq!(l1.sphere_test(&[0.0], 0.4, 1.0).unwrap(), Some(Anchor::Zero));
        assert_eq!(l1.sphere_test(&[0.0], 0.5, 1.0).unwrap(), None);
        assert_eq!(l1.sphere_test(&[0.0], -0.1, 1.0), Err(Error::NegativeRadius(-0.1)));
        assert_eq!(l1.sphere_test(&[0.0], f64::INFINITY, 1.0).unwrap(), None);

        // ∂ι_{R+}(0) = (−∞, 0]: a ball whose correlations stay negative fixes β_j = 0.
        let nn = PenaltyModel::non_negative(0.0).unwrap();
        assert_eq!(nn.sphere_test(&[-1.0], 0.5, 1.0).unwrap(), Some(Anchor::Zero));
        assert_eq!(nn.sphere_test(&[-1.0], 1.0, 1.0).unwrap(), None);
        assert_eq!(nn.sphere_test(&[0.2], 0.1, 1.0).unwrap(), None);

        let bx = PenaltyModel::boxed(-1.0, 2.0).unwrap();
        assert_eq!(bx.sphere_test(&[-1.0], 0.5, 1.0).unwrap(), Some(Anchor::Lower));
        assert_eq!(bx.sphere_test(&[1.0], 0.5, 1.0).unwrap(), Some(Anchor::Upper));
        assert_eq!(bx.sphere_test(&[0.3], 0.5, 1.0).unwrap(), None);

        let gl = PenaltyModel::group_l2(1.0).unwrap();
        assert_eq!(gl.sphere_test(&[0.3, 0.4], 0.2, 2.0).unwrap(), Some(Anchor::Zero));
        assert_eq!(gl.sphere_test(&[0.3, 0.4], 0.3, 2.0).unwrap(), None);
    }

    #[test]
    fn group_sphere_test_is_strict() {
        let gl = PenaltyModel::group_l2(1.0).unwrap();
        // ‖c‖ + r‖X_g‖ = 0.5 + 0.25·2 = 1: boundary, never screens
        assert_eq!(gl.sphere_test(&[0.3, 0.4], 0.25, 2.0).unwrap(), None);
        assert_eq!(gl.sphere_test(&[0.3, 0.4], 0.24, 2.0).unwrap(), Some(Anchor::Zero));
    }

    #[test]
    fn conjugate_examples() {
        let l1 = PenaltyModel::l1(1.0).unwrap();
        assert_eq!(l1.conjugate(&[0.5]), 0.0);
        assert_eq!(l1.conjugate(&[2.0]), f64::INFINITY);
        assert_eq!(PenaltyModel::boxed(0.0, 1.0).unwrap().conjugate(&[-2.0, 3.0]), 3.0);
        let en = PenaltyModel::elastic_net(1.0, 0.5).unwrap();
        assert!((en.conjugate(&[3.0]) - 4.0 / 1.0).abs() < 1e-15);
    }

    #[test]
    fn separation_of_subdifferentials() {
        let lambda = 0.8;
        for b in [-3.0, -1e-9, 1e-9, 2.0] {
            let sub = lambda * f64::signum(b);
            assert!(sub.abs() >= lambda);
            let (margin, _) = PenaltyModel::l1(lambda).unwrap().margin(&[sub]);
            assert!(margin <= 0.0);
        }
    }

    #[test]
    fn constructors_validate() {
        assert!(PenaltyModel::l1(0.0).is_err());
        assert!(PenaltyModel::elastic_net(1.0, -0.1).is_err());
        assert!(PenaltyModel::boxed(1.0, 1.0).is_err());
        assert!(PenaltyModel::non_negative(-1.0).is_err());
        assert!(PenaltyModel::boxed(0.0, 1.0).unwrap().with_lambda(1.0).is_err());
        assert_eq!(PenaltyModel::elastic_net(2.0, 0.5).unwrap().strong_convexity(), 1.0);
    }

    fn penalties() -> impl Strategy<Value = PenaltyModel> {
        prop_oneof![
            (0.01f64..3.0).prop_map(|l| PenaltyModel::l1(l).unwrap()),
            ((0.01f64..3.0), (0.0f64..2.0)).prop_map(|(l, a)| PenaltyModel::elastic_net(l, a).unwrap()),
            (0.01f64..3.0).prop_map(|l| PenaltyModel::group_l2(l).unwrap()),
            (0.0f64..3.0).prop_map(|l| PenaltyModel::non_negative(l).unwrap()),
            ((-3.0f64..0.0), (0.01f64..3.0)).prop_map(|(a, b)| PenaltyModel::boxed(a, b).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn prox_satisfies_optimality(
            pen in penalties(),
            v in prop::collection::vec(-5.0f64..5.0, 1..4),
            step in 0.01f64..5.0,
        ) {
            let v = if pen.requires_singletons() { v[..1].to_vec() } else { v };
            let u = pen.prox(&v, step);
            prop_assert!(pen.value(&u).is_finite());
            prop_assert!(prox_residual(&pen, &v, step, &u) <= 1e-10);
        }

        #[test]
        fn fenchel_young_inequality_and_equality(
            pen in penalties(),
            u0 in prop::collection::vec(-4.0f64..4.0, 1..4),
            v in prop::collection::vec(-4.0f64..4.0, 1..4),
        ) {
            let k = if pen.requires_singletons() { 1 } else { u0.len().min(v.len()) };
            // Project u into the domain so that Ω(u) is finite.
            let u = pen.prox(&u0[..k], 1e-12);
            let v = &v[..k];
            let conj = pen.conjugate(v);
            if conj.is_finite() {
                prop_assert!(pen.value(&u) + conj >= pairing(&u, v) - 1e-10);
            }
            // Equality at a conjugate subgradient: u* ∈ ∂Ω*(v) ⇔ v ∈ ∂Ω(u*).
            let v_in: Vec<f64> = match pen {
                PenaltyModel::L1 { lambda } => v.iter().map(|x| x.clamp(-lambda, lambda)).collect(),
                PenaltyModel::GroupL2 { lambda } => {
                    let n = norm2(v);
                    if n > lambda { v.iter().map(|x| x * lambda / n).collect() } else { v.to_vec() }
                }
                PenaltyModel::ElasticNet { lambda, alpha: 0.0 } =>
                    v.iter().map(|x| x.clamp(-lambda, lambda)).collect(),
                PenaltyModel::NonNegative { lambda } => v.iter().map(|x| x.min(lambda)).collect(),
                _ => v.to_vec(),
            };
            let u_star = pen.conjugate_subgradient(&v_in);
            let lhs = pen.value(&u_star) + pen.conjugate(&v_in);
            prop_assert!((lhs - pairing(&u_star, &v_in)).abs() <= 1e-10);
        }
    }
}
