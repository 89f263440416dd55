//! Comparators, regret accumulators and the numeric checks on traces.

use crate::algorithms::Phase;
use crate::error::{Error, Result};
use crate::functions::{Differentiable, ProblemConstants, RoundProblem};
use crate::geometry::ActionSet;
use crate::inner_solver::{evaluate_dual, SolverSettings};
use crate::strong_oracle::{strong_oracle, StrongOracleSettings};
use crate::Action;

/// Dual regret terms below this are reported as anomalies.
pub const DUAL_REGRET_FLOOR: f64 = -1e-6;

/// One row of an experiment trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub action: Action,
    pub loss: f64,
    pub constraint_value: f64,
    pub comparator_loss: f64,
    pub lambda: f64,
    /// Step size of the update that produced this action.
    pub gamma: Option<f64>,
    pub phase: Phase,
    /// Observed dual gradient of that update.
    pub dual_gradient: Option<f64>,
    pub regret_cum: f64,
    pub dual_regret_cum: Option<f64>,
    pub delta_hat: Option<f64>,
    pub inner_iters: usize,
}

/// The per-round benchmark: the unshrunk constrained optimum `(x_t*, f_t(x_t*))`.
pub fn comparator(p: &RoundProblem, set: &ActionSet, settings: &StrongOracleSettings) -> Result<(Action, f64)> {
    let sol = strong_oracle(p, 0.0, set, settings)?;
    let value = p.loss.value(&sol.primal);
    Ok((sol.primal, value))
}

/// `d_t(lambda_t*) - d_t(lambda_t)` for each round, with `d_t` the dual of the
/// problem shrunk by `shrink`; `optima[t] = (lambda_t*, d_t(lambda_t*))`.
pub fn dual_regret_terms(
    rounds: &[RoundProblem],
    duals: &[f64],
    optima: &[(f64, f64)],
    shrink: f64,
    set: &ActionSet,
    inner: &SolverSettings,
) -> Result<Vec<f64>> {
    if rounds.len() != duals.len() || rounds.len() != optima.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} rounds, {} duals, {} optima",
            rounds.len(),
            duals.len(),
            optima.len()
        )));
    }
    let mut out = Vec::with_capacity(rounds.len());
    let mut warm: Option<Action> = None;
    for ((p, &lambda), &(_, best)) in rounds.iter().zip(duals).zip(optima) {
        let d = evaluate_dual(p, lambda, shrink, set, inner, warm.as_ref())?;
        out.push(best - d.value);
        warm = Some(d.minimizer);
    }
    Ok(out)
}

/// `delta + L_g sqrt((2/mu) (jump + lambda_hat delta))`, the bound on how far
/// the dual gradient moves between consecutive rounds.
pub fn delta_hat(measured_loss_jump: f64, constants: &ProblemConstants) -> Result<f64> {
    if !(measured_loss_jump >= 0.0) {
        return Err(Error::InvalidInput(format!("loss jump must be >= 0, got {measured_loss_jump}")));
    }
    let lambda_hat = constants.lambda_hat()?;
    let inside = (2.0 / constants.mu) * (measured_loss_jump + lambda_hat * constants.delta);
    Ok(constants.delta + constants.constraint_lipschitz * inside.sqrt())
}

/// `sqrt((2/mu) (jump + lambda_hat delta))`, the tracking radius of the naive learner.
pub fn tracking_radius(measured_loss_jump: f64, constants: &ProblemConstants) -> Result<f64> {
    let lambda_hat = constants.lambda_hat()?;
    Ok(((2.0 / constants.mu) * (measured_loss_jump + lambda_hat * constants.delta)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    /// `||x_t - x_t*|| / (radius_t + slack)` for `t >= 2`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Rounds (1-based) with ratio above 1.
    pub violations: Vec<usize>,
}

/// Check `||x_t - x_t*|| <= tracking_radius(jump_t) + slack` for `t >= 2`.
pub fn lemma8_bound_check(
    actions: &[Action],
    comparators: &[Action],
    loss_jumps: &[f64],
    constants: &ProblemConstants,
    slack: f64,
) -> Result<TrackingReport> {
    let n = actions.len();
    if comparators.len() != n || loss_jumps.len() != n {
        return Err(Error::InvalidInput("actions, comparators and jumps must have equal length".into()));
    }
    let mut ratios = Vec::with_capacity(n.saturating_sub(1));
    let mut violations = Vec::new();
    for t in 1..n {
        let bound = tracking_radius(loss_jumps[t], constants)? + slack;
        let dist = (&actions[t] - &comparators[t]).norm();
        let ratio = if bound > 0.0 { dist / bound } else if dist == 0.0 { 0.0 } else { f64::INFINITY };
        if ratio > 1.0 {
            violations.push(t + 1);
        }
        ratios.push(ratio);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(TrackingReport { ratios, max_ratio, violations })
}

/// Least-squares slope of `log(regret)` against `log(T)`.
///
/// Nonpositive regrets are dropped; fewer than four remaining points is an error.
pub fn fit_regret_slope(points: &[(f64, f64)]) -> Result<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| *t > 0.0 && *r > 0.0 && r.is_finite())
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    if logs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} usable (T, regret) points, need at least 4",
            logs.len()
        )));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("all horizons are equal".into()));
    }
    Ok(sxy / sxx)
}

/// `lambda -> g(x*_lambda) + shrink` on the given grid.
pub fn dual_gradient_profile(
    p: &RoundProblem,
    shrink: f64,
    set: &ActionSet,
    inner: &SolverSettings,
    lambdas: &[f64],
) -> Result<Vec<f64>> {
    let mut warm: Option<Action> = None;
    let mut out = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let d = evaluate_dual(p, l, shrink, set, inner, warm.as_ref())?;
        out.push(d.gradient);
        warm = Some(d.minimizer);
    }
    Ok(out)
}

/// `n` evenly spaced points on `[0, upper]`.
pub fn lambda_grid(upper: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| upper * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Largest finite-difference slope `|h(l_{k+1}) - h(l_k)| / (l_{k+1} - l_k)`.
pub fn max_profile_slope(lambdas: &[f64], profile: &[f64]) -> f64 {
    lambdas
        .windows(2)
        .zip(profile.windows(2))
        .map(|(l, h)| (h[1] - h[0]).abs() / (l[1] - l[0]))
        .fold(0.0, f64::max)
}

/// One maximal run of safe-phase updates.
#[derive(Debug, Clone, PartialEq)]
pub struct SafePhase {
    /// First and last round (1-based) of the run.
    pub start: usize,
    pub end: usize,
    /// `sum of -dual_gradient` over the run.
    pub gradient_sum: f64,
    /// The dual iterate the run started from.
    pub lambda_start: f64,
    /// Whether any update in the run was clipped at zero.
    pub clipped: bool,
}

/// Split a trace into maximal safe runs and sum the negated dual gradients.
pub fn safe_phases(records: &[RoundRecord]) -> Vec<SafePhase> {
    let mut out: Vec<SafePhase> = Vec::new();
    let mut open = false;
    for (i, r) in records.iter().enumerate() {
        let (Phase::Safe, Some(grad), Some(gamma)) = (r.phase, r.dual_gradient, r.gamma) else {
            open = false;
            continue;
        };
        let prev_lambda = if i > 0 { records[i - 1].lambda } else { 0.0 };
        let clipped = prev_lambda + gamma * grad < 0.0;
        if !open {
            out.push(SafePhase { start: r.t, end: r.t, gradient_sum: 0.0, lambda_start: prev_lambda, clipped: false });
            open = true;
        }
        let phase = out.last_mut().expect("phase opened above");
        phase.end = r.t;
        phase.gradient_sum += -grad;
        phase.clipped |= clipped;
    }
    out
}

/// Summary counters over a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhaseCounts {
    pub init: usize,
    pub safe: usize,
    pub danger: usize,
}

pub fn phase_counts(records: &[RoundRecord]) -> PhaseCounts {
    let mut c = PhaseCounts::default();
    for r in records {
        match r.phase {
            Phase::Init => c.init += 1,
            Phase::Safe => c.safe += 1,
            Phase::Danger => c.danger += 1,
        }
    }
    c
}

pub fn max_violation(records: &[RoundRecord]) -> f64 {
    records.iter().map(|r| r.constraint_value).fold(f64::NEG_INFINITY, f64::max)
}
