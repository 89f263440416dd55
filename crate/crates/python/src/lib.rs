//! Python bindings for `safe_oco`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use safe_oco::algorithms::{Algorithm, AnyLearner, Learner as _, LearnerConfig};
use safe_oco::experiment::{run_once, trace_csv};
use safe_oco::streams::{generate, verify_assumptions};
use safe_oco::{
    Action, Differentiable, Error, ExperimentConfig, Function as CoreFunction, RoundProblem, SolverSettings,
    StrongOracleSettings,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. } | Error::InfeasibleOrBadConstants { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn vector(xs: Vec<f64>) -> Action {
    Action::from_vec(xs)
}

fn list(x: &Action) -> Vec<f64> {
    x.iter().copied().collect()
}

#[pyclass(module = "safe_oco_py")]
struct ActionSet {
    inner: safe_oco::ActionSet,
}

#[pymethods]
impl ActionSet {
    #[new]
    fn new(center: Vec<f64>, radius: f64) -> PyResult<Self> {
        Ok(Self { inner: safe_oco::ActionSet::new(vector(center), radius).map_err(to_py)? })
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius()
    }

    #[getter]
    fn center(&self) -> Vec<f64> {
        list(self.inner.center())
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn contains(&self, x: Vec<f64>) -> bool {
        self.inner.contains(&vector(x))
    }

    fn project(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(list(&self.inner.project(&vector(x)).map_err(to_py)?))
    }
}

#[pyclass(module = "safe_oco_py")]
struct Function {
    inner: CoreFunction,
}

#[pymethods]
impl Function {
    /// `(a/2) ||x - target||^2`
    #[staticmethod]
    fn quadratic(curvature: f64, target: Vec<f64>) -> Self {
        Self { inner: CoreFunction::Quadratic { curvature, target: vector(target) } }
    }

    /// `<normal, x> - offset`
    #[staticmethod]
    fn affine(normal: Vec<f64>, offset: f64) -> Self {
        Self { inner: CoreFunction::Affine { normal: vector(normal), offset } }
    }

    /// `||x - center||^2 - radius^2`
    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> Self {
        Self { inner: CoreFunction::BallDistance { center: vector(center), radius } }
    }

    #[staticmethod]
    fn linear(coefficients: Vec<f64>) -> Self {
        Self { inner: CoreFunction::Linear { coefficients: vector(coefficients) } }
    }

    fn value(&self, x: Vec<f64>) -> f64 {
        self.inner.value(&vector(x))
    }

    fn gradient(&self, x: Vec<f64>) -> Vec<f64> {
        list(&self.inner.gradient(&vector(x)))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn problem(loss: &Function, constraint: &Function) -> RoundProblem {
    RoundProblem { loss: loss.inner.clone(), constraint: constraint.inner.clone(), round_index: 1 }
}

/// Result of a constrained solve.
#[pyclass(module = "safe_oco_py", get_all)]
struct Solution {
    primal: Vec<f64>,
    dual: f64,
    dual_gradient: f64,
    dual_value: f64,
    inner_iterations: usize,
}

/// Minimize `loss` subject to `constraint + shrink <= 0` over `set`.
#[pyfunction]
#[pyo3(signature = (loss, constraint, set, shrink=0.0, lambda_max=100.0, tolerance=1e-10, dual_tolerance=1e-9))]
fn strong_oracle(
    loss: &Function,
    constraint: &Function,
    set: &ActionSet,
    shrink: f64,
    lambda_max: f64,
    tolerance: f64,
    dual_tolerance: f64,
) -> PyResult<Solution> {
    let inner = SolverSettings { tolerance, ..SolverSettings::default() };
    let settings = StrongOracleSettings::new(inner, lambda_max).with_dual_tolerance(dual_tolerance);
    let s = safe_oco::strong_oracle(&problem(loss, constraint), shrink, &set.inner, &settings).map_err(to_py)?;
    Ok(Solution {
        primal: list(&s.primal),
        dual: s.dual,
        dual_gradient: s.dual_gradient_at_solution,
        dual_value: s.dual_value,
        inner_iterations: s.inner_iterations,
    })
}

/// Minimize the Lagrangian `loss + lam * constraint` over `set`.
#[pyfunction]
#[pyo3(signature = (loss, constraint, lam, set, tolerance=1e-10))]
fn weak_oracle(loss: &Function, constraint: &Function, lam: f64, set: &ActionSet, tolerance: f64) -> PyResult<Vec<f64>> {
    let settings = SolverSettings { tolerance, ..SolverSettings::default() };
    let out = safe_oco::weak_oracle(&problem(loss, constraint), lam, &set.inner, &settings, None).map_err(to_py)?;
    Ok(list(&out.minimizer))
}

/// A generated stream together with a learner stepping through it.
#[pyclass(module = "safe_oco_py")]
struct Session {
    stream: safe_oco::Stream,
    learner: AnyLearner,
    round: usize,
}

#[pymethods]
impl Session {
    /// Build the stream described by `config` (flat `key = value` text).
    #[new]
    #[pyo3(signature = (config, seed=0))]
    fn new(config: &str, seed: u64) -> PyResult<Self> {
        let c = ExperimentConfig::parse(config).map_err(to_py)?;
        let stream = generate(&c.stream_spec(c.horizon, seed)).map_err(to_py)?;
        let oracle = StrongOracleSettings::for_constants(c.solver, &stream.constants)
            .map_err(to_py)?
            .with_dual_tolerance(c.dual_tolerance);
        let mut lc = LearnerConfig::new(stream.constants, stream.set.clone(), oracle);
        if c.strict_safety {
            lc = lc.strict();
        }
        let learner =
            AnyLearner::new(c.algorithm, &stream.rounds[0], stream.safe_start.clone(), lc).map_err(to_py)?;
        Ok(Self { stream, learner, round: 1 })
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.stream.horizon()
    }

    /// 1-based index of the round the current action is played in.
    #[getter]
    fn round(&self) -> usize {
        self.round
    }

    #[getter]
    fn action(&self) -> Vec<f64> {
        list(self.learner.action())
    }

    #[getter]
    fn dual(&self) -> f64 {
        self.learner.state().current_dual
    }

    #[getter]
    fn phase(&self) -> &'static str {
        self.learner.state().phase.as_str()
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        match self.learner {
            AnyLearner::Naive(_) => Algorithm::Naive.as_str(),
            AnyLearner::DualOga(_) => Algorithm::DualOga.as_str(),
        }
    }

    /// `(loss, constraint)` of the current round at the current action.
    fn evaluate(&self) -> (f64, f64) {
        let p = &self.stream.rounds[self.round - 1];
        let x = self.learner.action();
        (p.loss.value(x), p.constraint.value(x))
    }

    /// Reveal the current round and move to the next action.
    fn step(&mut self) -> PyResult<()> {
        if self.round >= self.stream.horizon() {
            return Err(PyValueError::new_err("stream exhausted"));
        }
        self.learner.step(&self.stream.rounds[self.round - 1]).map_err(to_py)?;
        self.round += 1;
        Ok(())
    }
}

#[pyclass(module = "safe_oco_py", get_all)]
struct RunResult {
    final_regret: f64,
    max_violation: f64,
    safety_slack: f64,
    safe: bool,
    phase_counts: (usize, usize, usize),
    summary: String,
    trace_csv: String,
}

/// Run one experiment described by `config`.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn run(config: &str, seed: Option<u64>) -> PyResult<RunResult> {
    let c = ExperimentConfig::parse(config).map_err(to_py)?;
    let seed = seed.unwrap_or(c.seeds[0]);
    let out = run_once(&c, c.horizon, seed).map_err(to_py)?;
    let s = &out.summary;
    Ok(RunResult {
        final_regret: s.final_regret,
        max_violation: s.max_violation,
        safety_slack: s.safety_slack,
        safe: s.safe,
        phase_counts: (s.phases.init, s.phases.safe, s.phases.danger),
        summary: s.to_text(),
        trace_csv: trace_csv(&out.records),
    })
}

/// Check the configured stream; returns `(all_pass, report)`.
#[pyfunction]
#[pyo3(signature = (config, probes=2048))]
fn verify(config: &str, probes: usize) -> PyResult<(bool, String)> {
    let c = ExperimentConfig::parse(config).map_err(to_py)?;
    let stream = generate(&c.stream_spec(c.horizon, c.seeds[0])).map_err(to_py)?;
    let report = verify_assumptions(&stream, &stream.constants, probes);
    Ok((report.all_pass(), report.to_string()))
}

#[pymodule]
fn safe_oco_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ActionSet>()?;
    m.add_class::<Function>()?;
    m.add_class::<Solution>()?;
    m.add_class::<Session>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(strong_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(weak_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
