//! Weak oracle: `argmin_{x in X} f(x) + lambda g(x)` by projected gradient
//! descent with the fixed step `1/M`, `M = M_f + lambda M_g`.

use crate::error::{Error, Result};
use crate::functions::{lagrangian_value_grad, Differentiable, RoundProblem};
use crate::geometry::ActionSet;
use crate::Action;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stopping threshold on the gradient-mapping norm.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub minimizer: Action,
    /// `f(x) + lambda g(x)` at the minimizer.
    pub objective_value: f64,
    pub iterations_used: usize,
    pub gradient_map_norm: f64,
}

/// Strong convexity and smoothness of `f + lambda g` from the declared moduli.
pub fn lagrangian_curvature(p: &RoundProblem, lambda: f64, set: &ActionSet) -> Result<(f64, f64)> {
    let loss = p.loss.moduli(set);
    let cons = p.constraint.moduli(set);
    let mu = loss.strong_convexity.unwrap_or(0.0);
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(format!(
            "round {}: loss is not strongly convex (mu = {mu}); wrap it in a surrogate",
            p.round_index
        )));
    }
    let m_f = loss
        .smoothness
        .ok_or_else(|| Error::InvalidInput("loss smoothness is not declared".into()))?;
    let m_g = cons
        .smoothness
        .ok_or_else(|| Error::InvalidInput("constraint smoothness is not declared".into()))?;
    Ok((mu, m_f + lambda * m_g))
}

/// Minimize the Lagrangian `f + lambda g` over the set.
///
/// Stops once `M ||x - P(x - grad/M)|| <= tolerance` and returns the projected
/// point, so `||x - x*|| <= 2 tolerance / mu`.
pub fn weak_oracle(
    p: &RoundProblem,
    lambda: f64,
    set: &ActionSet,
    settings: &SolverSettings,
    warm_start: Option<&Action>,
) -> Result<SolveOutcome> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    settings.validate()?;
    let (_, smoothness) = lagrangian_curvature(p, lambda, set)?;
    let step = 1.0 / smoothness;

    let mut x = match warm_start {
        Some(w) => set.project(w)?,
        None => set.center().clone(),
    };
    let mut residual = f64::INFINITY;
    for k in 1..=settings.max_iterations {
        let (_, grad) = lagrangian_value_grad(p, &x, lambda, 0.0)?;
        let next = set.project_unchecked(&(&x - grad * step));
        residual = smoothness * (&x - &next).norm();
        x = next;
        if residual <= settings.tolerance {
            let objective_value = p.loss.value(&x) + lambda * p.constraint.value(&x);
            return Ok(SolveOutcome {
                minimizer: x,
                objective_value,
                iterations_used: k,
                gradient_map_norm: residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iterations,
        residual,
        last_iterate: x,
    })
}

/// The danger-aware dual `d(lambda) = min_x f(x) + lambda (g(x) + shrink)`
/// evaluated through the weak oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub lambda: f64,
    pub value: f64,
    /// `g(x*_lambda) + shrink`
    pub gradient: f64,
    pub minimizer: Action,
    pub iterations: usize,
}

pub fn evaluate_dual(
    p: &RoundProblem,
    lambda: f64,
    shrink: f64,
    set: &ActionSet,
    settings: &SolverSettings,
    warm_start: Option<&Action>,
) -> Result<DualPoint> {
    let out = weak_oracle(p, lambda, set, settings, warm_start)?;
    let g = p.constraint.value(&out.minimizer);
    Ok(DualPoint {
        lambda,
        value: p.loss.value(&out.minimizer) + lambda * (g + shrink),
        gradient: g + shrink,
        minimizer: out.minimizer,
        iterations: out.iterations_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::Function;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Action {
        Action::from_column_slice(xs)
    }

    fn problem(loss: Function, constraint: Function) -> RoundProblem {
        RoundProblem { loss, constraint, round_index: 1 }
    }

    #[test]
    fn stationary_point_inside_ball() {
        let p = problem(
            Function::Quadratic { curvature: 2.0, target: v(&[0.0, 0.0]) },
            Function::Affine { normal: v(&[1.0, 0.0]), offset: 1.0 },
        );
        let set = ActionSet::centered(2, 10.0).unwrap();
        let out = weak_oracle(&p, 1.0, &set, &SolverSettings::default(), None).unwrap();
        assert_abs_diff_eq!(out.minimizer[0], -0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(out.minimizer[1], 0.0, epsilon = 1e-10);
        assert!(out.gradient_map_norm <= 1e-10);
    }

    #[test]
    fn zero_dual_projects_unconstrained_optimum() {
        let p = problem(
            Function::Quadratic { curvature: 2.0, target: v(&[2.0, 0.0]) },
            Function::BallDistance { center: v(&[5.0, 5.0]), radius: 1.0 },
        );
        let set = ActionSet::centered(2, 1.0).unwrap();
        let out = weak_oracle(&p, 0.0, &set, &SolverSettings::default(), None).unwrap();
        assert_abs_diff_eq!(out.minimizer[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(out.minimizer[1], 0.0, epsilon = 1e-10);
    }

    /// Dense grid argmin of `(x1-1)^2 + (x2+1)^2 + 2 (x1 + x2)` over the radius-3 ball.
    #[test]
    fn matches_dense_grid_search() {
        let p = problem(
            Function::Quadratic { curvature: 2.0, target: v(&[1.0, -1.0]) },
            Function::Affine { normal: v(&[1.0, 1.0]), offset: 0.0 },
        );
        let set = ActionSet::centered(2, 3.0).unwrap();
        let obj = |x0: f64, x1: f64| (x0 - 1.0).powi(2) + (x1 + 1.0).powi(2) + 2.0 * (x0 + x1);
        let h = 1e-3;
        let n = (3.0 / h) as i64;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -n..=n {
            for j in -n..=n {
                let (a, b) = (i as f64 * h, j as f64 * h);
                if a * a + b * b <= 9.0 {
                    let val = obj(a, b);
                    if val < best.0 {
                        best = (val, a, b);
                    }
                }
            }
        }
        // Grid oracle result, frozen: argmin (0, -2).
        assert_abs_diff_eq!(best.1, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(best.2, -2.0, epsilon = 1e-9);

        let out = weak_oracle(&p, 2.0, &set, &SolverSettings::default(), None).unwrap();
        assert_abs_diff_eq!(out.minimizer[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.minimizer[1], -2.0, epsilon = 1e-9);
        assert!(out.objective_value <= best.0 + 1e-12);
    }

    #[test]
    fn rejects_negative_dual_and_plain_convex_loss() {
        let set = ActionSet::centered(2, 1.0).unwrap();
        let p = problem(
            Function::Quadratic { curvature: 2.0, target: v(&[0.0, 0.0]) },
            Function::Affine { normal: v(&[1.0, 0.0]), offset: 1.0 },
        );
        assert!(matches!(
            weak_oracle(&p, -0.1, &set, &SolverSettings::default(), None),
            Err(Error::InvalidInput(_))
        ));
        let q = problem(
            Function::Linear { coefficients: v(&[1.0, 0.0]) },
            Function::Affine { normal: v(&[1.0, 0.0]), offset: 1.0 },
        );
        assert!(weak_oracle(&q, 0.0, &set, &SolverSettings::default(), None).is_err());
    }

    #[test]
    fn reports_non_convergence_with_last_iterate() {
        let p = problem(
            Function::WeightedQuadratic { weights: v(&[1.0, 100.0]), target: v(&[0.5, 0.5]) },
            Function::Affine { normal: v(&[1.0, 0.0]), offset: 1.0 },
        );
        let set = ActionSet::centered(2, 1.0).unwrap();
        let settings = SolverSettings { tolerance: 1e-12, max_iterations: 3 };
        match weak_oracle(&p, 0.0, &set, &settings, None) {
            Err(Error::NonConvergence { iterations, last_iterate, .. }) => {
                assert_eq!(iterations, 3);
                assert!(set.contains(&last_iterate));
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn dual_point_example() {
        // d(2) for f = ||x||^2, g = 1 - x1: minimizer (1, 0), value 1.
        let p = problem(
            Function::Quadratic { curvature: 2.0, target: v(&[0.0, 0.0]) },
            Function::Affine { normal: v(&[-1.0, 0.0]), offset: -1.0 },
        );
        let set = ActionSet::centered(2, 10.0).unwrap();
        let d = evaluate_dual(&p, 2.0, 0.0, &set, &SolverSettings::default(), None).unwrap();
        assert_abs_diff_eq!(d.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.gradient, 0.0, epsilon = 1e-10);
    }

    fn anisotropic(weights: (f64, f64), target: (f64, f64), normal: (f64, f64)) -> RoundProblem {
        problem(
            Function::WeightedQuadratic { weights: v(&[weights.0, weights.1]), target: v(&[target.0, target.1]) },
            Function::BallDistance { center: v(&[normal.0, normal.1]), radius: 0.3 },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn minimizer_continuity_in_lambda(
            w0 in 0.5f64..3.0, w1 in 0.5f64..3.0,
            t0 in -1.5f64..1.5, t1 in -1.5f64..1.5,
            q0 in -0.5f64..0.5, q1 in -0.5f64..0.5,
            l1 in 0.0f64..5.0, l2 in 0.0f64..5.0,
        ) {
            let p = anisotropic((w0, w1), (t0, t1), (q0, q1));
            let set = ActionSet::centered(2, 1.0).unwrap();
            let settings = SolverSettings::default();
            let a = weak_oracle(&p, l1, &set, &settings, None).unwrap();
            let b = weak_oracle(&p, l2, &set, &settings, None).unwrap();
            let mu = w0.min(w1);
            let l_g = p.constraint.moduli(&set).lipschitz.unwrap();
            let bound = l_g / mu * (l1 - l2).abs() + 2.0 * settings.tolerance / mu;
            prop_assert!((a.minimizer - b.minimizer).norm() <= bound + 1e-12);
        }

        #[test]
        fn linear_convergence_iteration_bound(
            w0 in 0.5f64..3.0, w1 in 0.5f64..3.0,
            t0 in -1.5f64..1.5, t1 in -1.5f64..1.5,
            lambda in 0.0f64..3.0,
        ) {
            let p = anisotropic((w0, w1), (t0, t1), (0.1, -0.2));
            let set = ActionSet::centered(2, 1.0).unwrap();
            let settings = SolverSettings::default();
            let (mu, m) = lagrangian_curvature(&p, lambda, &set).unwrap();
            let x0 = set.center().clone();
            let (_, g0) = lagrangian_value_grad(&p, &x0, lambda, 0.0).unwrap();
            let initial = m * (&x0 - set.project(&(&x0 - g0 / m)).unwrap()).norm();
            let out = weak_oracle(&p, lambda, &set, &settings, None).unwrap();
            let bound = ((m / mu) * (initial / settings.tolerance).max(1.0).ln()).ceil() as usize + 1;
            prop_assert!(out.iterations_used <= bound, "{} > {}", out.iterations_used, bound);
            prop_assert!(set.contains(&out.minimizer));
        }
    }
}
