//! Single runs and horizon-by-seed sweeps, with trace and summary output.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::algorithms::{
    safety_slack, select_surrogate_mu, surrogate_constants, Algorithm, AnyLearner, Learner, LearnerConfig, Phase,
    StepDiagnostics,
};
use crate::config::{ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::functions::{Differentiable, Function, ProblemConstants, RoundProblem};
use crate::inner_solver::evaluate_dual;
use crate::metrics::{self, PhaseCounts, RoundRecord};
use crate::streams::{generate, halton_probes, Stream};
use crate::strong_oracle::{strong_oracle, StrongOracleSettings};
use crate::Action;

/// Curvature added to a linear loss so the comparator has a unique optimum.
pub const COMPARATOR_REGULARIZATION: f64 = 1e-6;
/// Bisection tolerance of the regularized comparator.
pub const COMPARATOR_DUAL_TOLERANCE: f64 = 1e-15;

pub const TRACE_COLUMNS: [&str; 12] = [
    "t",
    "phase",
    "lambda",
    "gamma",
    "dual_gradient",
    "loss",
    "constraint_value",
    "comparator_loss",
    "regret_cum",
    "dual_regret_cum",
    "delta_hat",
    "inner_iters",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub horizon: usize,
    pub seed: u64,
    pub strict_safety: bool,
    pub surrogate_mu: Option<f64>,
    pub final_regret: f64,
    pub final_dual_regret: Option<f64>,
    pub max_violation: f64,
    /// Allowed slack on `g_t(x_t) <= 0`; zero in strict mode.
    pub safety_slack: f64,
    pub safe: bool,
    /// `max_t g_{t-1}(x_t) + delta` over dual-ascent updates.
    pub max_post_update_gradient: Option<f64>,
    pub phases: PhaseCounts,
    pub lambda_hat: f64,
    pub max_comparator_dual: f64,
    pub max_shrunk_dual: Option<f64>,
    pub min_dual_regret_term: Option<f64>,
    pub inner_iterations: usize,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
    /// Constants the learner ran with (surrogate constants in convex mode).
    pub constants: ProblemConstants,
    pub comparators: Vec<Action>,
    pub comparator_duals: Vec<f64>,
    /// `(lambda~_t*, d~_t(lambda~_t*))` of the shrunk duals, when diagnostics are on.
    pub shrunk_optima: Option<Vec<(f64, f64)>>,
    pub loss_jumps: Vec<f64>,
    /// `g_{t-1}(x_t) + delta` for `t >= 2`.
    pub post_update_gradients: Vec<f64>,
}

fn comparator_problem(p: &RoundProblem) -> RoundProblem {
    match p.loss {
        Function::Linear { .. } => RoundProblem {
            loss: Function::Regularized { base: Box::new(p.loss.clone()), mu: COMPARATOR_REGULARIZATION },
            constraint: p.constraint.clone(),
            round_index: p.round_index,
        },
        _ => p.clone(),
    }
}

/// The configured surrogate curvature, or the one selected from the stream's
/// variation budgets `V_f = T * loss_drift` and `V_g = T * delta`.
pub fn surrogate_mu_for(config: &ExperimentConfig, raw: &Stream) -> Result<f64> {
    if let Some(mu) = config.surrogate_mu {
        return Ok(mu);
    }
    let horizon = raw.horizon();
    let v_f = raw.loss_drift * horizon as f64;
    let v_g = raw.constants.delta * horizon as f64;
    select_surrogate_mu(v_f, v_g, horizon, config.algorithm)
}

/// Run one experiment on the stream built for `(horizon, seed)`.
pub fn run_once(config: &ExperimentConfig, horizon: usize, seed: u64) -> Result<RunOutput> {
    let spec = config.stream_spec(horizon, seed);
    let raw = generate(&spec)?;
    run_on_stream(config, &raw, seed)
}

/// Run one experiment on an already generated stream.
pub fn run_on_stream(config: &ExperimentConfig, raw: &Stream, seed: u64) -> Result<RunOutput> {
    let horizon = raw.horizon();
    let set = raw.set.clone();
    let inner = config.solver;

    let (learner_stream, surrogate_mu, comparator_settings) = match config.mode {
        Mode::StronglyConvex => {
            let lh = raw.constants.lambda_hat()?;
            let st = StrongOracleSettings::new(inner, lh).with_dual_tolerance(config.dual_tolerance);
            (raw.clone(), None, st)
        }
        Mode::ConvexSurrogate => {
            let mu = surrogate_mu_for(config, raw)?;
            let reg = surrogate_constants(&raw.constants, COMPARATOR_REGULARIZATION, &set)?;
            let st = StrongOracleSettings::new(inner, reg.lambda_hat()?).with_dual_tolerance(COMPARATOR_DUAL_TOLERANCE);
            (raw.surrogate(mu)?, Some(mu), st)
        }
    };
    let constants = learner_stream.constants;
    constants.validate()?;
    let lambda_hat = constants.lambda_hat()?;
    let oracle = StrongOracleSettings::new(inner, lambda_hat).with_dual_tolerance(config.dual_tolerance);
    let mut learner_config = LearnerConfig::new(constants, set.clone(), oracle);
    if config.strict_safety {
        learner_config = learner_config.strict();
    }
    let shrink = learner_config.shrink();
    let margin = learner_config.margin;
    let slack = if config.strict_safety { 0.0 } else { safety_slack(&constants, inner.tolerance) };

    let rounds = &learner_stream.rounds;
    let mut learner = AnyLearner::new(config.algorithm, &rounds[0], learner_stream.safe_start.clone(), learner_config)?;

    let probes = halton_probes(&set, 256);
    let loss_jumps = learner_stream.loss_jumps(&probes);

    let mut records = Vec::with_capacity(horizon);
    let mut comparators = Vec::with_capacity(horizon);
    let mut comparator_duals = Vec::with_capacity(horizon);
    let mut shrunk_optima = config.diagnostics.then(|| Vec::with_capacity(horizon));
    let mut post_update_gradients = Vec::with_capacity(horizon.saturating_sub(1));
    let mut regret = 0.0;
    let mut dual_regret = 0.0;
    let mut min_dual_term = f64::INFINITY;
    let mut max_shrunk_dual = 0.0f64;
    let mut total_inner = learner.init_iterations();
    let mut last_step: Option<StepDiagnostics> = None;
    let track_dual_regret = config.diagnostics && config.algorithm == Algorithm::DualOga;

    for t in 0..horizon {
        let raw_round = &raw.rounds[t];
        let x = learner.action().clone();
        let lambda = learner.state().current_dual;

        let cmp = strong_oracle(&comparator_problem(raw_round), 0.0, &set, &comparator_settings)?;
        let loss = raw_round.loss.value(&x);
        let comparator_loss = raw_round.loss.value(&cmp.primal);
        regret += loss - comparator_loss;

        let dual_regret_cum = match shrunk_optima.as_mut() {
            Some(optima) => {
                let star = strong_oracle(&rounds[t], shrink, &set, &oracle)?;
                max_shrunk_dual = max_shrunk_dual.max(star.dual);
                optima.push((star.dual, star.dual_value));
                if track_dual_regret {
                    let d = evaluate_dual(&rounds[t], lambda, shrink, &set, &inner, Some(&x))?;
                    let term = star.dual_value - d.value;
                    min_dual_term = min_dual_term.min(term);
                    dual_regret += term;
                    Some(dual_regret)
                } else {
                    None
                }
            }
            None => None,
        };

        let (phase, gamma, dual_gradient, inner_iters) = match &last_step {
            None => (Phase::Init, None, None, learner.init_iterations()),
            Some(d) => (d.phase, d.gamma, Some(d.dual_gradient), d.inner_iterations),
        };
        let delta_hat = if t == 0 { None } else { Some(metrics::delta_hat(loss_jumps[t], &constants)?) };

        let constraint_value = raw_round.constraint.value(&x);
        records.push(RoundRecord {
            t: t + 1,
            action: x,
            loss,
            constraint_value,
            comparator_loss,
            lambda,
            gamma,
            phase,
            dual_gradient,
            regret_cum: regret,
            dual_regret_cum,
            delta_hat,
            inner_iters,
        });
        comparators.push(cmp.primal);
        comparator_duals.push(cmp.dual);

        if t + 1 < horizon {
            let step = learner.step(&rounds[t])?;
            total_inner += step.inner_iterations;
            if config.algorithm == Algorithm::DualOga {
                post_update_gradients.push(step.post_update_gradient - margin);
            }
            last_step = Some(step);
        }
    }

    let max_violation = metrics::max_violation(&records);
    let summary = RunSummary {
        algorithm: config.algorithm,
        mode: config.mode,
        horizon,
        seed,
        strict_safety: config.strict_safety,
        surrogate_mu,
        final_regret: regret,
        final_dual_regret: track_dual_regret.then_some(dual_regret),
        max_violation,
        safety_slack: slack,
        safe: max_violation <= slack,
        max_post_update_gradient: (config.algorithm == Algorithm::DualOga)
            .then(|| post_update_gradients.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        phases: metrics::phase_counts(&records),
        lambda_hat,
        max_comparator_dual: comparator_duals.iter().copied().fold(0.0, f64::max),
        max_shrunk_dual: config.diagnostics.then_some(max_shrunk_dual),
        min_dual_regret_term: (track_dual_regret && horizon > 0).then_some(min_dual_term),
        inner_iterations: total_inner,
    };
    Ok(RunOutput {
        records,
        summary,
        constants,
        comparators,
        comparator_duals,
        shrunk_optima,
        loss_jumps,
        post_update_gradients,
    })
}

fn float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn opt(v: Option<f64>) -> String {
    float(v.unwrap_or(f64::NAN))
}

/// The trace as CSV text with the fixed column order.
pub fn trace_csv(records: &[RoundRecord]) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.phase.as_str(),
            float(r.lambda),
            opt(r.gamma),
            opt(r.dual_gradient),
            float(r.loss),
            float(r.constraint_value),
            float(r.comparator_loss),
            float(r.regret_cum),
            opt(r.dual_regret_cum),
            opt(r.delta_hat),
            r.inner_iters
        );
    }
    out
}

impl RunSummary {
    /// `key = value` lines, readable by eye and by the config parser's tokenizer.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("algorithm", self.algorithm.as_str().into());
        kv("mode", self.mode.as_str().into());
        kv("horizon", self.horizon.to_string());
        kv("seed", self.seed.to_string());
        kv("strict_safety", self.strict_safety.to_string());
        kv("surrogate_mu", opt(self.surrogate_mu));
        kv("final_regret", float(self.final_regret));
        kv("final_dual_regret", opt(self.final_dual_regret));
        kv("max_violation", float(self.max_violation));
        kv("safety_slack", float(self.safety_slack));
        kv("safe", self.safe.to_string());
        kv("max_post_update_gradient", opt(self.max_post_update_gradient));
        kv("phase_init", self.phases.init.to_string());
        kv("phase_safe", self.phases.safe.to_string());
        kv("phase_danger", self.phases.danger.to_string());
        kv("lambda_hat", float(self.lambda_hat));
        kv("max_comparator_dual", float(self.max_comparator_dual));
        kv("max_shrunk_dual", opt(self.max_shrunk_dual));
        kv("min_dual_regret_term", opt(self.min_dual_regret_term));
        kv("inner_iterations", self.inner_iterations.to_string());
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_run(dir: &Path, tag: &str, output: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
    write_file(&dir.join(format!("trace{tag}.csv")), &trace_csv(&output.records))?;
    write_file(&dir.join(format!("summary{tag}.txt")), &output.summary.to_text())
}

/// One failed sweep cell.
#[derive(Debug)]
pub struct CellFailure {
    pub horizon: usize,
    pub seed: u64,
    pub error: Error,
}

#[derive(Debug)]
pub struct SweepOutput {
    /// Successful cell summaries ordered by `(horizon, seed)`.
    pub cells: Vec<RunSummary>,
    pub failures: Vec<CellFailure>,
    /// Median final regret per horizon over the successful cells.
    pub medians: Vec<(usize, f64)>,
    pub slope: Result<f64>,
    pub predicted_exponent: f64,
}

impl SweepOutput {
    pub fn any_breach(&self) -> bool {
        self.cells.iter().any(|c| !c.safe)
    }

    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("T,seed,final_regret,max_violation,phase_init,phase_safe,phase_danger,status\n");
        let mut rows: Vec<(usize, u64, String)> = self
            .cells
            .iter()
            .map(|c| {
                let status = if c.safe { "ok" } else { "breach" };
                let row = format!(
                    "{},{},{},{},{},{},{},{status}",
                    c.horizon,
                    c.seed,
                    float(c.final_regret),
                    float(c.max_violation),
                    c.phases.init,
                    c.phases.safe,
                    c.phases.danger
                );
                (c.horizon, c.seed, row)
            })
            .chain(self.failures.iter().map(|f| {
                let msg = f.error.to_string().replace([',', '\n'], ";");
                (f.horizon, f.seed, format!("{},{},NaN,NaN,0,0,0,error: {msg}", f.horizon, f.seed))
            }))
            .collect();
        rows.sort_by_key(|r| (r.0, r.1));
        for (_, _, row) in rows {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for (t, m) in &self.medians {
            let _ = writeln!(s, "median_regret_T{t} = {}", float(*m));
        }
        match &self.slope {
            Ok(v) => {
                let _ = writeln!(s, "slope = {}", float(*v));
            }
            Err(e) => {
                let _ = writeln!(s, "slope = NaN  # {e}");
            }
        }
        let _ = writeln!(s, "predicted_exponent = {}", float(self.predicted_exponent));
        let _ = writeln!(s, "all_safe = {}", !self.any_breach());
        let _ = writeln!(s, "failed_cells = {}", self.failures.len());
        s
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Worker count from `SAFE_OCO_THREADS`, or rayon's default.
pub fn thread_cap() -> Option<usize> {
    std::env::var("SAFE_OCO_THREADS").ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Run every `(horizon, seed)` cell in parallel. Failed cells are collected
/// rather than aborting the sweep. When `out` is given, each cell's trace and
/// summary plus `sweep.csv` and `sweep_summary.txt` are written there.
pub fn run_sweep(config: &ExperimentConfig, out: Option<&Path>) -> Result<SweepOutput> {
    let cells: Vec<(usize, u64)> = config
        .sweep_horizons()
        .into_iter()
        .flat_map(|t| config.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let work = || -> Vec<Result<RunSummary>> {
        cells
            .par_iter()
            .map(|&(t, seed)| {
                let output = run_once(config, t, seed)?;
                if let Some(dir) = out {
                    write_run(dir, &format!("_T{t}_seed{seed}"), &output)?;
                }
                Ok(output.summary)
            })
            .collect()
    };
    let results = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (&(horizon, seed), r) in cells.iter().zip(results) {
        match r {
            Ok(s) => summaries.push(s),
            Err(error) => failures.push(CellFailure { horizon, seed, error }),
        }
    }
    let cells = summaries;

    let mut medians = Vec::new();
    for t in config.sweep_horizons() {
        let mut v: Vec<f64> = cells.iter().filter(|c| c.horizon == t).map(|c| c.final_regret).collect();
        if !v.is_empty() && !medians.iter().any(|&(h, _)| h == t) {
            medians.push((t, median(&mut v)));
        }
    }
    let points: Vec<(f64, f64)> = medians.iter().map(|&(t, m)| (t as f64, m)).collect();
    let sweep = SweepOutput {
        cells,
        failures,
        medians,
        slope: metrics::fit_regret_slope(&points),
        predicted_exponent: config.predicted_exponent(),
    };
    if let Some(dir) = out {
        write_file(&dir.join("sweep.csv"), &sweep.sweep_csv())?;
        write_file(&dir.join("sweep_summary.txt"), &sweep.summary_text())?;
    }
    Ok(sweep)
}
