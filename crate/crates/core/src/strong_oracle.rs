//! Strong oracle: `min f(x) s.t. g(x) + shrink <= 0` over the ball, solved by
//! bisection on the monotone dual gradient `h(lambda) = g(x*_lambda) + shrink`.

use crate::error::{Error, Result};
use crate::functions::{ProblemConstants, RoundProblem};
use crate::geometry::ActionSet;
use crate::inner_solver::{evaluate_dual, DualPoint, SolverSettings};
use crate::Action;

/// Relative headroom on the dual search interval above `lambda_hat`.
pub const SEARCH_HEADROOM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongOracleSettings {
    pub inner: SolverSettings,
    /// Bisection stops once the bracket is narrower than this.
    pub dual_tolerance: f64,
    /// The dual bound `lambda_hat`; the search runs over `[0, lambda_max (1 + 1e-6)]`.
    pub lambda_max: f64,
}

impl StrongOracleSettings {
    pub fn new(inner: SolverSettings, lambda_max: f64) -> Self {
        Self {
            inner,
            dual_tolerance: 1e-9,
            lambda_max,
        }
    }

    pub fn for_constants(inner: SolverSettings, constants: &ProblemConstants) -> Result<Self> {
        Ok(Self::new(inner, constants.lambda_hat()?))
    }

    pub fn with_dual_tolerance(mut self, dual_tolerance: f64) -> Self {
        self.dual_tolerance = dual_tolerance;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualSolution {
    pub primal: Action,
    pub dual: f64,
    /// `h(dual) = g(primal) + shrink`
    pub dual_gradient_at_solution: f64,
    /// `max(0, g(primal) + shrink)`
    pub feasibility_residual: f64,
    /// `d(dual)`, the shrunk dual value at the returned multiplier.
    pub dual_value: f64,
    /// Weak-oracle iterations summed over the bisection.
    pub inner_iterations: usize,
}

impl PrimalDualSolution {
    fn from_point(point: DualPoint, inner_iterations: usize) -> Self {
        Self {
            feasibility_residual: point.gradient.max(0.0),
            dual_gradient_at_solution: point.gradient,
            dual: point.lambda,
            dual_value: point.value,
            primal: point.minimizer,
            inner_iterations,
        }
    }
}

/// Solve the shrunk constrained problem and return its primal-dual pair.
///
/// The returned dual is the upper end of the final bracket, where
/// `h <= 0` was observed, so the primal satisfies `g(primal) + shrink <= 0`.
pub fn strong_oracle(
    p: &RoundProblem,
    shrink: f64,
    set: &ActionSet,
    settings: &StrongOracleSettings,
) -> Result<PrimalDualSolution> {
    if !(shrink >= 0.0) || !shrink.is_finite() {
        return Err(Error::InvalidInput(format!("shrink must be finite and >= 0, got {shrink}")));
    }
    if !(settings.dual_tolerance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dual_tolerance must be > 0, got {}",
            settings.dual_tolerance
        )));
    }
    if !(settings.lambda_max >= 0.0) || !settings.lambda_max.is_finite() {
        return Err(Error::InvalidConstants(format!(
            "lambda_max must be finite and >= 0, got {}",
            settings.lambda_max
        )));
    }

    let inner = &settings.inner;
    let at_zero = evaluate_dual(p, 0.0, shrink, set, inner, None)?;
    let mut iterations = at_zero.iterations;
    if at_zero.gradient <= 0.0 {
        return Ok(PrimalDualSolution::from_point(at_zero, iterations));
    }

    let lambda_search = settings.lambda_max * (1.0 + SEARCH_HEADROOM);
    let mut upper = evaluate_dual(p, lambda_search, shrink, set, inner, Some(&at_zero.minimizer))?;
    iterations += upper.iterations;
    if upper.gradient > 0.0 {
        return Err(Error::InfeasibleOrBadConstants {
            lambda_max: lambda_search,
            residual: upper.gradient,
        });
    }

    let mut lo = 0.0;
    let mut warm = at_zero.minimizer;
    while upper.lambda - lo > settings.dual_tolerance {
        let mid = 0.5 * (lo + upper.lambda);
        if mid <= lo || mid >= upper.lambda {
            break;
        }
        let point = evaluate_dual(p, mid, shrink, set, inner, Some(&warm))?;
        iterations += point.iterations;
        warm = point.minimizer.clone();
        if point.gradient > 0.0 {
            lo = mid;
        } else {
            upper = point;
        }
    }
    Ok(PrimalDualSolution::from_point(upper, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Differentiable, Function};
    use crate::inner_solver::weak_oracle;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Action {
        Action::from_column_slice(xs)
    }

    fn settings(lambda_max: f64) -> StrongOracleSettings {
        StrongOracleSettings::new(SolverSettings::default(), lambda_max)
    }

    fn norm_sq_loss() -> Function {
        Function::Quadratic { curvature: 2.0, target: v(&[0.0, 0.0]) }
    }

    #[test]
    fn active_halfspace_kkt() {
        let p = RoundProblem {
            loss: norm_sq_loss(),
            constraint: Function::Affine { normal: v(&[-1.0, 0.0]), offset: -1.0 },
            round_index: 1,
        };
        let set = ActionSet::centered(2, 10.0).unwrap();
        let s = strong_oracle(&p, 0.0, &set, &settings(50.0)).unwrap();
        assert_abs_diff_eq!(s.primal[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.primal[1], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.dual, 2.0, epsilon = 1e-8);
        assert!(s.feasibility_residual <= 1e-8);
    }

    #[test]
    fn inactive_constraint_returns_zero_dual() {
        let p = RoundProblem {
            loss: norm_sq_loss(),
            constraint: Function::Affine { normal: v(&[1.0, 0.0]), offset: 1.0 },
            round_index: 1,
        };
        let set = ActionSet::centered(2, 10.0).unwrap();
        let s = strong_oracle(&p, 0.0, &set, &settings(50.0)).unwrap();
        assert_eq!(s.dual, 0.0);
        assert_abs_diff_eq!(s.primal.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn shrunk_ball_constraint() {
        // Brute force: ||x||^2 <= 0.81 is active, so x = (0.9, 0) and
        // stationarity 2(x1 - 2) + 2 lambda x1 = 0 gives lambda = 11/9.
        let p = RoundProblem {
            loss: Function::Quadratic { curvature: 2.0, target: v(&[2.0, 0.0]) },
            constraint: Function::BallDistance { center: v(&[0.0, 0.0]), radius: 1.0 },
            round_index: 1,
        };
        let set = ActionSet::centered(2, 3.0).unwrap();
        let s = strong_oracle(&p, 0.19, &set, &settings(30.0)).unwrap();
        assert_abs_diff_eq!(s.primal[0], 0.9, epsilon = 1e-8);
        assert_abs_diff_eq!(s.primal[1], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.dual, 11.0 / 9.0, epsilon = 1e-8);
    }

    #[test]
    fn too_small_lambda_max_is_reported() {
        let p = RoundProblem {
            loss: norm_sq_loss(),
            constraint: Function::Affine { normal: v(&[-1.0, 0.0]), offset: -1.0 },
            round_index: 1,
        };
        let set = ActionSet::centered(2, 10.0).unwrap();
        assert!(matches!(
            strong_oracle(&p, 0.0, &set, &settings(1.0)),
            Err(Error::InfeasibleOrBadConstants { .. })
        ));
        assert!(strong_oracle(&p, -0.1, &set, &settings(50.0)).is_err());
    }

    fn instance(t: (f64, f64), q: (f64, f64), r: f64) -> RoundProblem {
        RoundProblem {
            loss: Function::Quadratic { curvature: 2.0, target: v(&[t.0, t.1]) },
            constraint: Function::BallDistance { center: v(&[q.0, q.1]), radius: r },
            round_index: 1,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn certificate_duality_and_slackness(
            t0 in -2.0f64..2.0, t1 in -2.0f64..2.0,
            q0 in -0.3f64..0.3, q1 in -0.3f64..0.3,
            r in 0.4f64..0.6, shrink in 0.0f64..0.1,
        ) {
            let p = instance((t0, t1), (q0, q1), r);
            let set = ActionSet::centered(2, 1.0).unwrap();
            // L_f = 2 * (|t| + 1), R = 2, depth G = r^2.
            let lambda_hat = 2.0 * ((t0 * t0 + t1 * t1).sqrt() + 1.0) * 2.0 / (r * r);
            let st = settings(lambda_hat);
            let s = strong_oracle(&p, shrink, &set, &st).unwrap();
            prop_assert!(s.dual >= 0.0 && s.dual <= lambda_hat + 1e-6);
            prop_assert!(s.feasibility_residual <= 1e-8);
            prop_assert!((s.dual * (p.constraint.value(&s.primal) + shrink)).abs() <= 1e-6);

            let d = evaluate_dual(&p, s.dual, shrink, &set, &st.inner, None).unwrap();
            prop_assert!(p.loss.value(&s.primal) - d.value <= 1e-6);

            if s.dual > 0.0 {
                let below = (s.dual - st.dual_tolerance).max(0.0);
                let h_lo = evaluate_dual(&p, below, shrink, &set, &st.inner, None).unwrap().gradient;
                prop_assert!(h_lo >= -1e-8);
                prop_assert!(s.dual_gradient_at_solution <= 1e-8);
            }
        }

        #[test]
        fn dual_gradient_is_monotone(
            t0 in -2.0f64..2.0, t1 in -2.0f64..2.0,
            q0 in -0.3f64..0.3, q1 in -0.3f64..0.3,
        ) {
            let p = instance((t0, t1), (q0, q1), 0.5);
            let set = ActionSet::centered(2, 1.0).unwrap();
            let inner = SolverSettings::default();
            let l_g = 2.0 * ((q0 * q0 + q1 * q1).sqrt() + 1.0);
            let jitter = 2.0 * l_g * inner.tolerance / 2.0;
            let mut prev = f64::INFINITY;
            for k in 0..60 {
                let lambda = k as f64 * 0.25;
                let h = evaluate_dual(&p, lambda, 0.0, &set, &inner, None).unwrap().gradient;
                prop_assert!(h <= prev + jitter);
                prev = h;
            }
        }
    }

    /// Against a resolution-1e-3 grid over the unit disc.
    #[test]
    fn agrees_with_grid_search() {
        let set = ActionSet::centered(2, 1.0).unwrap();
        let p = instance((1.5, 0.4), (0.1, -0.1), 0.5);
        let lambda_hat = 2.0 * (1.5f64.hypot(0.4) + 1.0) * 2.0 / 0.25;
        let s = strong_oracle(&p, 0.0, &set, &settings(lambda_hat)).unwrap();
        let h = 1e-3;
        let mut best = f64::INFINITY;
        let n = (1.0 / h) as i64;
        for i in -n..=n {
            for j in -n..=n {
                let x = v(&[i as f64 * h, j as f64 * h]);
                if x.norm() <= 1.0 && p.constraint.value(&x) <= 0.0 {
                    best = best.min(p.loss.value(&x));
                }
            }
        }
        let l_f = 2.0 * (1.5f64.hypot(0.4) + 1.0);
        let gap = p.loss.value(&s.primal) - best;
        assert!(gap.abs() <= 1e-3 * l_f, "gap {gap}");
        let unconstrained = weak_oracle(&p, 0.0, &set, &SolverSettings::default(), None).unwrap();
        assert!(p.loss.value(&unconstrained.minimizer) <= p.loss.value(&s.primal));
    }
}
