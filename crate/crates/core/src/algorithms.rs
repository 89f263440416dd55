//! The two safe learners and the convex-loss surrogate wrapper.
//!
//! Both learners play `x_1`, then after each revealed round `t - 1` produce
//! `x_t` from `(f_{t-1}, g_{t-1})`. A horizon of `T` means `T` plays and
//! `T - 1` updates.

use std::fmt;

use crate::error::{Error, Result};
use crate::functions::{Differentiable, Function, ProblemConstants, RoundProblem};
use crate::geometry::ActionSet;
use crate::inner_solver::{evaluate_dual, weak_oracle};
use crate::strong_oracle::{strong_oracle, StrongOracleSettings};
use crate::Action;

/// Surrogate curvature used when the stream is static (`V_f + V_g = 0`).
pub const SURROGATE_MU_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Init,
    Safe,
    Danger,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Safe => "safe",
            Phase::Danger => "danger",
        }
    }

    /// Phase implied by an observed dual gradient.
    pub fn from_dual_gradient(grad: f64) -> Phase {
        if grad > 0.0 {
            Phase::Danger
        } else {
            Phase::Safe
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Naive,
    DualOga,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Naive => "naive",
            Algorithm::DualOga => "dual-oga",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Algorithm::Naive),
            "dual-oga" | "dual_oga" => Ok(Algorithm::DualOga),
            other => Err(Error::Config(format!("unknown algorithm '{other}' (expected naive or dual-oga)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    /// The action to play this round.
    pub current_action: Action,
    /// `lambda_t`; for the naive learner the multiplier returned by the strong oracle.
    pub current_dual: f64,
    pub phase: Phase,
    /// The dual gradient that decided `phase`; `None` before the first update.
    pub last_dual_gradient: Option<f64>,
}

/// The two-valued dual step: `mu / L_g^2` when the observed dual gradient is
/// nonpositive, `2 / mu_d` when it is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizePolicy {
    pub safe_step: f64,
    pub danger_step: f64,
}

impl StepSizePolicy {
    pub fn new(constants: &ProblemConstants) -> Result<Self> {
        let l_g = constants.constraint_lipschitz;
        if !(l_g > 0.0) {
            return Err(Error::DegenerateConstraint(format!(
                "L_g = {l_g}; the safe step mu / L_g^2 is undefined"
            )));
        }
        let safe_step = constants.mu / (l_g * l_g);
        let danger_step = 2.0 / constants.mu_d()?;
        if !(danger_step >= safe_step) {
            return Err(Error::InvalidConstants(format!(
                "dichotomy gap violated: 2/mu_d = {danger_step} < mu/L_g^2 = {safe_step}"
            )));
        }
        Ok(Self { safe_step, danger_step })
    }

    pub fn step_for(&self, dual_gradient: f64) -> f64 {
        if dual_gradient > 0.0 {
            self.danger_step
        } else {
            self.safe_step
        }
    }
}

/// Everything a learner needs besides the rounds themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub constants: ProblemConstants,
    pub set: ActionSet,
    pub oracle: StrongOracleSettings,
    /// Extra shrink on top of `delta`; zero unless strict safety is requested.
    pub margin: f64,
}

impl LearnerConfig {
    pub fn new(constants: ProblemConstants, set: ActionSet, oracle: StrongOracleSettings) -> Self {
        Self { constants, set, oracle, margin: 0.0 }
    }

    /// Shrink by `delta + L_g tol / mu` so inexact minimizers still land inside.
    pub fn strict(mut self) -> Self {
        self.margin = strict_margin(&self.constants, self.oracle.inner.tolerance);
        self
    }

    pub fn shrink(&self) -> f64 {
        self.constants.delta + self.margin
    }
}

/// `L_g tol / mu`, the worst-case constraint error of a weak-oracle output.
pub fn strict_margin(constants: &ProblemConstants, tolerance: f64) -> f64 {
    constants.constraint_lipschitz * tolerance / constants.mu
}

/// `L_g tol / mu + 1e-9`, the slack allowed on `g_t(x_t) <= 0` outside strict mode.
pub fn safety_slack(constants: &ProblemConstants, tolerance: f64) -> f64 {
    strict_margin(constants, tolerance) + 1e-9
}

/// What one update produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Step size used; `None` for the naive learner.
    pub gamma: Option<f64>,
    /// The new dual iterate.
    pub dual: f64,
    /// The observed dual gradient that selected the phase.
    pub dual_gradient: f64,
    /// `g_{t-1}(x_t) + shrink` at the new action.
    pub post_update_gradient: f64,
    pub phase: Phase,
    pub inner_iterations: usize,
}

pub trait Learner {
    fn state(&self) -> &LearnerState;

    /// Consume the just-revealed round `t - 1` and move to `x_t`.
    fn step(&mut self, revealed: &RoundProblem) -> Result<StepDiagnostics>;

    fn action(&self) -> &Action {
        &self.state().current_action
    }
}

/// Plays the shrunk constrained optimum of the previous round.
#[derive(Debug, Clone)]
pub struct SafeNaive {
    config: LearnerConfig,
    state: LearnerState,
}

impl SafeNaive {
    pub fn new(first: &RoundProblem, safe_start: Action, config: LearnerConfig) -> Result<Self> {
        if safe_start.len() != config.set.dimension() {
            return Err(Error::InvalidInput("safe start has the wrong dimension".into()));
        }
        let value = first.constraint.value(&safe_start);
        if value > 0.0 {
            return Err(Error::UnsafeStart { value });
        }
        Ok(Self {
            config,
            state: LearnerState {
                current_action: safe_start,
                current_dual: 0.0,
                phase: Phase::Init,
                last_dual_gradient: None,
            },
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }
}

impl Learner for SafeNaive {
    fn state(&self) -> &LearnerState {
        &self.state
    }

    fn step(&mut self, revealed: &RoundProblem) -> Result<StepDiagnostics> {
        let sol = strong_oracle(revealed, self.config.shrink(), &self.config.set, &self.config.oracle)?;
        let phase = if sol.dual > 0.0 { Phase::Danger } else { Phase::Safe };
        self.state = LearnerState {
            current_action: sol.primal,
            current_dual: sol.dual,
            phase,
            last_dual_gradient: Some(sol.dual_gradient_at_solution),
        };
        Ok(StepDiagnostics {
            gamma: None,
            dual: sol.dual,
            dual_gradient: sol.dual_gradient_at_solution,
            post_update_gradient: sol.dual_gradient_at_solution,
            phase,
            inner_iterations: sol.inner_iterations,
        })
    }
}

/// Dual gradient ascent on the shrunk dual with the dichotomous step size.
#[derive(Debug, Clone)]
pub struct SafeDualOga {
    config: LearnerConfig,
    policy: StepSizePolicy,
    state: LearnerState,
    init_iterations: usize,
}

impl SafeDualOga {
    /// Initializes `(x_1, lambda_1)` with the one strong-oracle call on round 1.
    pub fn new(first: &RoundProblem, config: LearnerConfig) -> Result<Self> {
        let policy = StepSizePolicy::new(&config.constants)?;
        let sol = strong_oracle(first, config.shrink(), &config.set, &config.oracle)?;
        Ok(Self {
            policy,
            init_iterations: sol.inner_iterations,
            state: LearnerState {
                current_action: sol.primal,
                current_dual: sol.dual,
                phase: Phase::Init,
                last_dual_gradient: None,
            },
            config,
        })
    }

    pub fn policy(&self) -> &StepSizePolicy {
        &self.policy
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    /// Weak-oracle iterations spent by the initial strong-oracle call.
    pub fn init_iterations(&self) -> usize {
        self.init_iterations
    }
}

impl Learner for SafeDualOga {
    fn state(&self) -> &LearnerState {
        &self.state
    }

    fn step(&mut self, revealed: &RoundProblem) -> Result<StepDiagnostics> {
        let shrink = self.config.shrink();
        let set = &self.config.set;
        let inner = &self.config.oracle.inner;
        let warm = self.state.current_action.clone();

        let observed = evaluate_dual(revealed, self.state.current_dual, shrink, set, inner, Some(&warm))?;
        let grad = observed.gradient;
        let gamma = self.policy.step_for(grad);
        let dual = (self.state.current_dual + gamma * grad).max(0.0);
        let next = weak_oracle(revealed, dual, set, inner, Some(&observed.minimizer))?;
        let post = revealed.constraint.value(&next.minimizer) + shrink;
        let phase = Phase::from_dual_gradient(grad);

        self.state = LearnerState {
            current_action: next.minimizer,
            current_dual: dual,
            phase,
            last_dual_gradient: Some(grad),
        };
        Ok(StepDiagnostics {
            gamma: Some(gamma),
            dual,
            dual_gradient: grad,
            post_update_gradient: post,
            phase,
            inner_iterations: observed.iterations + next.iterations_used,
        })
    }
}

/// Either learner behind one type.
#[derive(Debug, Clone)]
pub enum AnyLearner {
    Naive(SafeNaive),
    DualOga(SafeDualOga),
}

impl AnyLearner {
    pub fn new(
        algorithm: Algorithm,
        first: &RoundProblem,
        safe_start: Action,
        config: LearnerConfig,
    ) -> Result<Self> {
        Ok(match algorithm {
            Algorithm::Naive => AnyLearner::Naive(SafeNaive::new(first, safe_start, config)?),
            Algorithm::DualOga => AnyLearner::DualOga(SafeDualOga::new(first, config)?),
        })
    }

    /// Weak-oracle iterations spent before the first play.
    pub fn init_iterations(&self) -> usize {
        match self {
            AnyLearner::Naive(_) => 0,
            AnyLearner::DualOga(l) => l.init_iterations(),
        }
    }
}

impl Learner for AnyLearner {
    fn state(&self) -> &LearnerState {
        match self {
            AnyLearner::Naive(l) => l.state(),
            AnyLearner::DualOga(l) => l.state(),
        }
    }

    fn step(&mut self, revealed: &RoundProblem) -> Result<StepDiagnostics> {
        match self {
            AnyLearner::Naive(l) => l.step(revealed),
            AnyLearner::DualOga(l) => l.step(revealed),
        }
    }
}

/// Replace each loss by `f_t + (mu/2) ||x||^2`; constraints are unchanged.
pub fn make_surrogate_stream(raw: &[RoundProblem], mu: f64) -> Result<Vec<RoundProblem>> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidInput(format!("surrogate mu must be finite and > 0, got {mu}")));
    }
    Ok(raw
        .iter()
        .map(|p| RoundProblem {
            loss: Function::Regularized { base: Box::new(p.loss.clone()), mu },
            constraint: p.constraint.clone(),
            round_index: p.round_index,
        })
        .collect())
}

/// Constants of the surrogate stream: `mu`, `M_f + mu`, `L_f + mu (||c0|| + radius)`.
pub fn surrogate_constants(raw: &ProblemConstants, mu: f64, set: &ActionSet) -> Result<ProblemConstants> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidInput(format!("surrogate mu must be finite and > 0, got {mu}")));
    }
    let origin = Action::zeros(set.dimension());
    Ok(ProblemConstants {
        mu,
        loss_smoothness: raw.loss_smoothness + mu,
        loss_lipschitz: raw.loss_lipschitz + mu * set.max_distance_from(&origin),
        ..*raw
    })
}

/// Surrogate curvature balancing the regularization bias against the
/// strongly convex regret bound.
pub fn select_surrogate_mu(v_f: f64, v_g: f64, horizon: usize, algorithm: Algorithm) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    if !(v_f >= 0.0 && v_g >= 0.0) || !(v_f + v_g).is_finite() {
        return Err(Error::InvalidInput(format!("variations must be finite and >= 0, got {v_f}, {v_g}")));
    }
    if v_f + v_g == 0.0 {
        log::warn!("static stream (V_f + V_g = 0); using surrogate mu floor {SURROGATE_MU_FLOOR}");
        return Ok(SURROGATE_MU_FLOOR);
    }
    let t = horizon as f64;
    let mu = match algorithm {
        Algorithm::Naive => (v_f.cbrt() + v_g.cbrt()) * t.powf(-1.0 / 3.0),
        Algorithm::DualOga => (v_f + v_g).powf(1.0 / 7.0) * t.powf(-1.0 / 7.0),
    };
    Ok(mu.max(SURROGATE_MU_FLOOR))
}
