//! Loss and constraint function families, per-round problems and the
//! regularity constants the learners are tuned with.
//!
//! All families but `WeightedQuadratic` are isotropic quadratics
//! `s/2 ||x||^2 + <u, x> + k`, which gives closed forms for the moduli over a
//! ball and for `max_x |f(x) - f'(x)|` between two members with equal `s`.

use crate::error::{Error, Result};
use crate::geometry::ActionSet;
use crate::Action;

/// Strong convexity, smoothness and Lipschitz moduli of a function over a set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moduli {
    pub strong_convexity: Option<f64>,
    pub smoothness: Option<f64>,
    pub lipschitz: Option<f64>,
}

/// A differentiable function with exact value and gradient.
pub trait Differentiable {
    fn value(&self, x: &Action) -> f64;
    fn gradient(&self, x: &Action) -> Action;
    /// Declared moduli over `set`.
    fn moduli(&self, set: &ActionSet) -> Moduli;
}

/// Concrete function families.
#[derive(Debug, Clone, PartialEq)]
pub enum Function {
    /// `(curvature / 2) ||x - target||^2`
    Quadratic { curvature: f64, target: Action },
    /// `<normal, x> - offset`
    Affine { normal: Action, offset: f64 },
    /// `||x - center||^2 - radius^2`
    BallDistance { center: Action, radius: f64 },
    /// `<coefficients, x>`
    Linear { coefficients: Action },
    /// `base(x) + (mu / 2) ||x||^2`
    Regularized { base: Box<Function>, mu: f64 },
    /// `1/2 sum_i weights_i (x_i - target_i)^2`, the one anisotropic family.
    WeightedQuadratic { weights: Action, target: Action },
}

/// `s/2 ||x||^2 + <u, x> + k`
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicForm {
    pub curvature: f64,
    pub linear: Action,
    pub constant: f64,
}

impl Function {
    pub fn dimension(&self) -> usize {
        match self {
            Function::Quadratic { target, .. } => target.len(),
            Function::Affine { normal, .. } => normal.len(),
            Function::BallDistance { center, .. } => center.len(),
            Function::Linear { coefficients } => coefficients.len(),
            Function::Regularized { base, .. } => base.dimension(),
            Function::WeightedQuadratic { target, .. } => target.len(),
        }
    }

    /// `None` for the anisotropic family.
    pub fn isotropic_form(&self) -> Option<IsotropicForm> {
        Some(match self {
            Function::Quadratic { curvature, target } => IsotropicForm {
                curvature: *curvature,
                linear: -target * *curvature,
                constant: 0.5 * curvature * target.norm_squared(),
            },
            Function::Affine { normal, offset } => IsotropicForm {
                curvature: 0.0,
                linear: normal.clone(),
                constant: -offset,
            },
            Function::BallDistance { center, radius } => IsotropicForm {
                curvature: 2.0,
                linear: center * -2.0,
                constant: center.norm_squared() - radius * radius,
            },
            Function::Linear { coefficients } => IsotropicForm {
                curvature: 0.0,
                linear: coefficients.clone(),
                constant: 0.0,
            },
            Function::Regularized { base, mu } => {
                let mut form = base.isotropic_form()?;
                form.curvature += mu;
                form
            }
            Function::WeightedQuadratic { .. } => return None,
        })
    }

    /// Exact `max_{x in set} |self(x) - other(x)|` when the difference is affine
    /// (equal curvature), `None` otherwise.
    pub fn max_abs_difference(&self, other: &Function, set: &ActionSet) -> Option<f64> {
        let a = self.isotropic_form()?;
        let b = other.isotropic_form()?;
        if a.curvature != b.curvature || a.linear.len() != b.linear.len() {
            return None;
        }
        let u = &a.linear - &b.linear;
        let k = a.constant - b.constant;
        Some((u.dot(set.center()) + k).abs() + set.radius() * u.norm())
    }

    /// Minimizer of the function over the ball (closed form for isotropic quadratics).
    pub fn minimize_over(&self, set: &ActionSet) -> Option<Action> {
        let form = self.isotropic_form()?;
        Some(if form.curvature > 0.0 {
            set.project_unchecked(&(-&form.linear / form.curvature))
        } else {
            let n = form.linear.norm();
            if n == 0.0 {
                set.center().clone()
            } else {
                set.center() - &form.linear * (set.radius() / n)
            }
        })
    }
}

impl Differentiable for Function {
    fn value(&self, x: &Action) -> f64 {
        match self {
            Function::Quadratic { curvature, target } => 0.5 * curvature * (x - target).norm_squared(),
            Function::Affine { normal, offset } => normal.dot(x) - offset,
            Function::BallDistance { center, radius } => (x - center).norm_squared() - radius * radius,
            Function::Linear { coefficients } => coefficients.dot(x),
            Function::Regularized { base, mu } => base.value(x) + 0.5 * mu * x.norm_squared(),
            Function::WeightedQuadratic { weights, target } => {
                0.5 * weights.iter().zip((x - target).iter()).map(|(w, d)| w * d * d).sum::<f64>()
            }
        }
    }

    fn gradient(&self, x: &Action) -> Action {
        match self {
            Function::Quadratic { curvature, target } => (x - target) * *curvature,
            Function::Affine { normal, .. } => normal.clone(),
            Function::BallDistance { center, .. } => (x - center) * 2.0,
            Function::Linear { coefficients } => coefficients.clone(),
            Function::Regularized { base, mu } => base.gradient(x) + x * *mu,
            Function::WeightedQuadratic { weights, target } => (x - target).component_mul(weights),
        }
    }

    fn moduli(&self, set: &ActionSet) -> Moduli {
        match self {
            Function::Quadratic { curvature, target } => Moduli {
                strong_convexity: Some(*curvature),
                smoothness: Some(*curvature),
                lipschitz: Some(curvature * set.max_distance_from(target)),
            },
            Function::Affine { normal, .. } => Moduli {
                strong_convexity: Some(0.0),
                smoothness: Some(0.0),
                lipschitz: Some(normal.norm()),
            },
            Function::BallDistance { center, .. } => Moduli {
                strong_convexity: Some(2.0),
                smoothness: Some(2.0),
                lipschitz: Some(2.0 * set.max_distance_from(center)),
            },
            Function::Linear { coefficients } => Moduli {
                strong_convexity: Some(0.0),
                smoothness: Some(0.0),
                lipschitz: Some(coefficients.norm()),
            },
            Function::Regularized { base, mu } => {
                let inner = base.moduli(set);
                let origin = Action::zeros(set.dimension());
                Moduli {
                    strong_convexity: inner.strong_convexity.map(|m| m + mu),
                    smoothness: inner.smoothness.map(|m| m + mu),
                    lipschitz: inner.lipschitz.map(|l| l + mu * set.max_distance_from(&origin)),
                }
            }
            Function::WeightedQuadratic { weights, target } => Moduli {
                strong_convexity: Some(weights.min()),
                smoothness: Some(weights.max()),
                lipschitz: Some(weights.max() * set.max_distance_from(target)),
            },
        }
    }
}

/// One round of the online problem: the loss `f_t` and the constraint `g_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundProblem {
    pub loss: Function,
    pub constraint: Function,
    /// 1-based round index.
    pub round_index: usize,
}

/// Regularity constants shared by every round of a stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    /// Strong convexity `mu` of every loss.
    pub mu: f64,
    pub loss_smoothness: f64,
    pub loss_lipschitz: f64,
    pub constraint_smoothness: f64,
    pub constraint_lipschitz: f64,
    /// Slater depth `G`: every round has a point with `g_t <= -G`.
    pub depth: f64,
    /// Diameter `R` of the action set.
    pub diameter: f64,
    /// Bound on `max_x |g_t - g_{t-1}|`.
    pub delta: f64,
    pub horizon: usize,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mu,
            self.loss_smoothness,
            self.loss_lipschitz,
            self.constraint_smoothness,
            self.constraint_lipschitz,
            self.depth,
            self.diameter,
            self.delta,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConstants("all constants must be finite".into()));
        }
        if self.mu <= 0.0 {
            return Err(Error::InvalidConstants(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.mu > self.loss_smoothness {
            return Err(Error::InvalidConstants(format!(
                "mu = {} exceeds the loss smoothness M_f = {}",
                self.mu, self.loss_smoothness
            )));
        }
        if self.loss_lipschitz < 0.0 || self.constraint_lipschitz < 0.0 || self.constraint_smoothness < 0.0 {
            return Err(Error::InvalidConstants("moduli must be nonnegative".into()));
        }
        if self.depth <= 0.0 {
            return Err(Error::InvalidConstants(format!("depth G must be > 0, got {}", self.depth)));
        }
        if self.diameter <= 0.0 {
            return Err(Error::InvalidConstants(format!("diameter R must be > 0, got {}", self.diameter)));
        }
        if self.delta < 0.0 {
            return Err(Error::InvalidConstants(format!("delta must be >= 0, got {}", self.delta)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConstants("horizon must be >= 1".into()));
        }
        Ok(())
    }

    /// Universal bound on the optimal duals: `L_f R / G`.
    pub fn lambda_hat(&self) -> Result<f64> {
        if !(self.depth > 0.0) {
            return Err(Error::InvalidConstants(format!("depth G must be > 0, got {}", self.depth)));
        }
        Ok(self.loss_lipschitz * self.diameter / self.depth)
    }

    /// Local strong-concavity modulus of the dual: `G^2 / (4 R^2 (M_f + lambda_hat M_g))`.
    pub fn mu_d(&self) -> Result<f64> {
        let lambda_hat = self.lambda_hat()?;
        let denom = 4.0 * self.diameter * self.diameter * (self.loss_smoothness + lambda_hat * self.constraint_smoothness);
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::InvalidConstants(format!("mu_d denominator is {denom}")));
        }
        Ok(self.depth * self.depth / denom)
    }
}

/// Value and gradient of `f(x) + lambda (g(x) + shrink)`.
///
/// The shrink shifts the value only.
pub fn lagrangian_value_grad(p: &RoundProblem, x: &Action, lambda: f64, shrink: f64) -> Result<(f64, Action)> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(shrink >= 0.0) {
        return Err(Error::InvalidInput(format!("shrink must be >= 0, got {shrink}")));
    }
    let value = p.loss.value(x) + lambda * (p.constraint.value(x) + shrink);
    let grad = p.loss.gradient(x) + p.constraint.gradient(x) * lambda;
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Action {
        Action::from_column_slice(xs)
    }

    fn constants(l_f: f64, r: f64, g: f64, m_f: f64, m_g: f64) -> ProblemConstants {
        ProblemConstants {
            mu: m_f.min(1.0),
            loss_smoothness: m_f,
            loss_lipschitz: l_f,
            constraint_smoothness: m_g,
            constraint_lipschitz: 1.0,
            depth: g,
            diameter: r,
            delta: 0.0,
            horizon: 10,
        }
    }

    #[test]
    fn lambda_hat_examples() {
        assert_eq!(constants(4.0, 2.0, 1.0, 2.0, 0.0).lambda_hat().unwrap(), 8.0);
        assert_eq!(constants(2.0, 1.0, 0.5, 2.0, 0.0).lambda_hat().unwrap(), 4.0);
        assert_eq!(constants(0.0, 1.0, 1.0, 2.0, 0.0).lambda_hat().unwrap(), 0.0);
        assert!(matches!(
            constants(1.0, 1.0, 0.0, 2.0, 0.0).lambda_hat(),
            Err(Error::InvalidConstants(_))
        ));
    }

    #[test]
    fn mu_d_examples() {
        assert_abs_diff_eq!(constants(7.0, 2.0, 1.0, 2.0, 0.0).mu_d().unwrap(), 1.0 / 32.0, epsilon = 1e-15);
        assert_abs_diff_eq!(constants(1.0, 1.0, 2.0, 1.0, 1.0).mu_d().unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        let base = constants(3.0, 1.5, 0.4, 2.0, 0.0).mu_d().unwrap();
        let doubled = constants(3.0, 1.5, 0.8, 2.0, 0.0).mu_d().unwrap();
        assert_abs_diff_eq!(doubled / base, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn mu_d_rejects_zero_denominator() {
        let mut c = constants(1.0, 1.0, 1.0, 2.0, 0.0);
        c.loss_smoothness = 0.0;
        assert!(c.mu_d().is_err());
    }

    #[test]
    fn mu_d_monotonicity() {
        let base = constants(2.0, 2.0, 1.0, 2.0, 1.0);
        let m = base.mu_d().unwrap();
        let bump = |f: &dyn Fn(&mut ProblemConstants)| {
            let mut c = base;
            f(&mut c);
            c.mu_d().unwrap()
        };
        assert!(bump(&|c| c.loss_smoothness *= 1.1) <= m);
        assert!(bump(&|c| c.constraint_smoothness *= 1.1) <= m);
        assert!(bump(&|c| c.diameter *= 1.1) <= m);
        assert!(bump(&|c| c.depth *= 1.1) >= m);
    }

    #[test]
    fn validate_rejects_mu_above_smoothness() {
        let mut c = constants(2.0, 2.0, 1.0, 2.0, 0.0);
        c.mu = 3.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn lagrangian_examples() {
        let p = RoundProblem {
            loss: Function::Quadratic { curvature: 2.0, target: v(&[0.0, 0.0]) },
            constraint: Function::Affine { normal: v(&[1.0, 0.0]), offset: 1.0 },
            round_index: 1,
        };
        let x = v(&[0.0, 0.0]);
        let (val, grad) = lagrangian_value_grad(&p, &x, 1.0, 0.0).unwrap();
        assert_eq!(val, -1.0);
        assert_eq!(grad, v(&[1.0, 0.0]));

        let y = v(&[0.3, -0.7]);
        let (val0, grad0) = lagrangian_value_grad(&p, &y, 0.0, 0.5).unwrap();
        assert_eq!(val0, p.loss.value(&y));
        assert_eq!(grad0, p.loss.gradient(&y));

        let (a, ga) = lagrangian_value_grad(&p, &y, 2.0, 0.0).unwrap();
        let (b, gb) = lagrangian_value_grad(&p, &y, 2.0, 0.1).unwrap();
        assert_abs_diff_eq!(b - a, 0.2, epsilon = 1e-15);
        assert_eq!(ga, gb);

        assert!(lagrangian_value_grad(&p, &y, -1.0, 0.0).is_err());
    }

    fn families(rng: &mut ChaCha8Rng, d: usize) -> Vec<Function> {
        let mut r = |s: f64| Action::from_fn(d, |_, _| rng.random_range(-s..s));
        let q = Function::Quadratic { curvature: 1.7, target: r(0.5) };
        vec![
            q.clone(),
            Function::Affine { normal: r(1.0), offset: 0.3 },
            Function::BallDistance { center: r(0.5), radius: 0.7 },
            Function::Linear { coefficients: r(1.0) },
            Function::Regularized { base: Box::new(Function::Linear { coefficients: r(1.0) }), mu: 0.3 },
            Function::Regularized { base: Box::new(q), mu: 0.1 },
            Function::WeightedQuadratic { weights: Action::from_fn(d, |i, _| 0.5 + i as f64), target: r(0.5) },
        ]
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = ActionSet::centered(4, 1.0).unwrap();
        for f in families(&mut rng, 4) {
            for _ in 0..20 {
                let x = Action::from_fn(4, |_, _| rng.random_range(-0.5..0.5));
                let h = 1e-6 * (1.0 + x.norm());
                let g = f.gradient(&x);
                let fd = Action::from_fn(4, |i, _| {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    (f.value(&xp) - f.value(&xm)) / (2.0 * h)
                });
                let rel = (&g - &fd).norm() / g.norm().max(1e-3);
                assert!(rel <= 1e-5, "{f:?}: rel err {rel}");
            }
            let _ = f.moduli(&set);
        }
    }

    #[test]
    fn declared_moduli_hold_on_random_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let set = ActionSet::centered(3, 1.0).unwrap();
        for f in families(&mut rng, 3) {
            let m = f.moduli(&set);
            let (mu, sm, lip) = (m.strong_convexity.unwrap(), m.smoothness.unwrap(), m.lipschitz.unwrap());
            for _ in 0..200 {
                let x = set.project(&Action::from_fn(3, |_, _| rng.random_range(-1.2..1.2))).unwrap();
                let y = set.project(&Action::from_fn(3, |_, _| rng.random_range(-1.2..1.2))).unwrap();
                let lin = f.value(&x) + f.gradient(&x).dot(&(&y - &x));
                let d2 = (&y - &x).norm_squared();
                assert!(f.value(&y) >= lin + 0.5 * mu * d2 - 1e-8);
                assert!(f.value(&y) <= lin + 0.5 * sm * d2 + 1e-8);
                assert!((f.value(&y) - f.value(&x)).abs() <= lip * d2.sqrt() + 1e-8);
            }
        }
    }

    #[test]
    fn closed_form_drift_matches_sampling() {
        let set = ActionSet::centered(2, 1.0).unwrap();
        let a = Function::Quadratic { curvature: 2.0, target: v(&[0.3, -0.1]) };
        let b = Function::Quadratic { curvature: 2.0, target: v(&[0.25, 0.05]) };
        let exact = a.max_abs_difference(&b, &set).unwrap();
        let mut sampled: f64 = 0.0;
        for i in 0..20000 {
            let th = i as f64 / 20000.0 * std::f64::consts::TAU;
            let x = v(&[th.cos(), th.sin()]);
            sampled = sampled.max((a.value(&x) - b.value(&x)).abs());
        }
        assert!(sampled <= exact + 1e-12);
        assert!(exact - sampled < 1e-6);
        let c = Function::Affine { normal: v(&[1.0, 0.0]), offset: 0.0 };
        assert!(a.max_abs_difference(&c, &set).is_none());
        let w = Function::WeightedQuadratic { weights: v(&[2.0, 2.0]), target: v(&[0.0, 0.0]) };
        assert!(a.max_abs_difference(&w, &set).is_none());
    }

    #[test]
    fn minimize_over_matches_projection() {
        let set = ActionSet::centered(2, 1.0).unwrap();
        let f = Function::Quadratic { curvature: 2.0, target: v(&[2.0, 0.0]) };
        assert_eq!(f.minimize_over(&set).unwrap(), v(&[1.0, 0.0]));
        let g = Function::Affine { normal: v(&[0.0, 2.0]), offset: 0.0 };
        assert_eq!(g.minimize_over(&set).unwrap(), v(&[0.0, -1.0]));
    }

    proptest! {
        #[test]
        fn lagrangian_curvature_bounds(
            lambda in 0.0f64..20.0,
            xs in prop::collection::vec(-1.0f64..1.0, 3),
            ys in prop::collection::vec(-1.0f64..1.0, 3),
            q in prop::collection::vec(-0.5f64..0.5, 3),
        ) {
            let p = RoundProblem {
                loss: Function::Quadratic { curvature: 1.5, target: v(&[0.2, 0.1, -0.3]) },
                constraint: Function::BallDistance { center: Action::from_vec(q), radius: 0.5 },
                round_index: 1,
            };
            let (mu, m) = (1.5, 1.5 + lambda * 2.0);
            let x = Action::from_vec(xs);
            let y = Action::from_vec(ys);
            let (lx, gx) = lagrangian_value_grad(&p, &x, lambda, 0.0).unwrap();
            let (ly, _) = lagrangian_value_grad(&p, &y, lambda, 0.0).unwrap();
            let lin = lx + gx.dot(&(&y - &x));
            let d2 = (&y - &x).norm_squared();
            prop_assert!(ly >= lin + 0.5 * mu * d2 - 1e-8);
            prop_assert!(ly <= lin + 0.5 * m * d2 + 1e-8);
        }
    }
}
