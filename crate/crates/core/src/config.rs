//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; unknown keys are errors.
//! Lists are comma separated.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::algorithms::Algorithm;
use crate::error::{Error, Result};
use crate::inner_solver::SolverSettings;
use crate::streams::{ConstraintFamily, LossFamily, PowerSchedule, StreamSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    StronglyConvex,
    ConvexSurrogate,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::StronglyConvex => "strongly-convex",
            Mode::ConvexSurrogate => "convex-surrogate",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strongly-convex" => Ok(Mode::StronglyConvex),
            "convex-surrogate" | "convex" => Ok(Mode::ConvexSurrogate),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected strongly-convex or convex-surrogate)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub constraint: ConstraintFamily,
    pub loss: LossFamily,
    pub dimension: usize,
    /// Horizon of a single run.
    pub horizon: usize,
    /// Horizons of a sweep; defaults to `[horizon]`.
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    /// `delta(T)`
    pub delta: PowerSchedule,
    /// `V_f(T)`; the per-round loss drift is `V_f(T) / T`.
    pub loss_variation: PowerSchedule,
    /// `||v_t||(T)` for the linear-drift loss.
    pub gradient_scale: PowerSchedule,
    pub radius: f64,
    pub curvature: f64,
    pub depth: Option<f64>,
    pub drift_scale: f64,
    /// Fixed surrogate curvature; chosen from the variation budgets when unset.
    pub surrogate_mu: Option<f64>,
    pub solver: SolverSettings,
    pub dual_tolerance: f64,
    pub strict_safety: bool,
    /// Compute the shrunk dual optima and dual regret per round.
    pub diagnostics: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::DualOga,
            mode: Mode::StronglyConvex,
            constraint: ConstraintFamily::Affine,
            loss: LossFamily::QuadraticTarget,
            dimension: 2,
            horizon: 1000,
            horizons: Vec::new(),
            seeds: vec![0],
            delta: PowerSchedule::constant(0.01),
            loss_variation: PowerSchedule { coefficient: 1.0, exponent: 0.5 },
            gradient_scale: PowerSchedule { coefficient: 0.5, exponent: -1.0 / 3.0 },
            radius: 1.0,
            curvature: 2.0,
            depth: None,
            drift_scale: 1.0,
            surrogate_mu: None,
            solver: SolverSettings::default(),
            dual_tolerance: 1e-9,
            strict_safety: false,
            diagnostics: true,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{value}'"))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let mut loss_set = false;
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            match key {
                "algorithm" => c.algorithm = value.parse()?,
                "mode" => c.mode = value.parse()?,
                "constraint" => c.constraint = value.parse()?,
                "loss" => {
                    c.loss = value.parse()?;
                    loss_set = true;
                }
                "dimension" => c.dimension = parse(key, value)?,
                "horizon" => c.horizon = parse(key, value)?,
                "horizons" => c.horizons = parse_list(key, value)?,
                "seed" => c.seeds = vec![parse(key, value)?],
                "seeds" => c.seeds = parse_list(key, value)?,
                "delta" => c.delta = PowerSchedule::constant(parse(key, value)?),
                "delta_coefficient" => c.delta.coefficient = parse(key, value)?,
                "delta_exponent" => c.delta.exponent = parse(key, value)?,
                "loss_drift" => {
                    // per-round drift d means V_f(T) = d T
                    c.loss_variation = PowerSchedule { coefficient: parse(key, value)?, exponent: 1.0 };
                }
                "loss_variation_coefficient" => c.loss_variation.coefficient = parse(key, value)?,
                "loss_variation_exponent" => c.loss_variation.exponent = parse(key, value)?,
                "gradient_scale" => c.gradient_scale = PowerSchedule::constant(parse(key, value)?),
                "gradient_scale_coefficient" => c.gradient_scale.coefficient = parse(key, value)?,
                "gradient_scale_exponent" => c.gradient_scale.exponent = parse(key, value)?,
                "radius" => c.radius = parse(key, value)?,
                "curvature" => c.curvature = parse(key, value)?,
                "depth" => c.depth = Some(parse(key, value)?),
                "drift_scale" => c.drift_scale = parse(key, value)?,
                "surrogate_mu" => c.surrogate_mu = Some(parse(key, value)?),
                "tolerance" => c.solver.tolerance = parse(key, value)?,
                "max_iterations" => c.solver.max_iterations = parse(key, value)?,
                "dual_tolerance" => c.dual_tolerance = parse(key, value)?,
                "strict_safety" => c.strict_safety = parse_bool(key, value)?,
                "diagnostics" => c.diagnostics = parse_bool(key, value)?,
                "output_dir" => c.output_dir = PathBuf::from(value),
                other => return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        if c.mode == Mode::ConvexSurrogate && !loss_set {
            c.loss = LossFamily::LinearDrift;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dimension == 0 {
            return bad("dimension must be >= 1".into());
        }
        if self.horizon == 0 || self.horizons.iter().any(|&t| t == 0) {
            return bad("horizons must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.dual_tolerance > 0.0) {
            return bad(format!("dual_tolerance must be > 0, got {}", self.dual_tolerance));
        }
        if let Some(mu) = self.surrogate_mu {
            if !(mu > 0.0) {
                return bad(format!("surrogate_mu must be > 0, got {mu}"));
            }
        }
        match (self.mode, self.loss) {
            (Mode::StronglyConvex, LossFamily::LinearDrift) => {
                return bad("the linear-drift loss is not strongly convex; use mode = convex-surrogate".into());
            }
            (Mode::ConvexSurrogate, LossFamily::QuadraticTarget) => {
                return bad("convex-surrogate mode expects loss = linear".into());
            }
            _ => {}
        }
        for (name, s) in [
            ("delta", self.delta),
            ("loss variation", self.loss_variation),
            ("gradient scale", self.gradient_scale),
        ] {
            if !s.coefficient.is_finite() || !s.exponent.is_finite() || s.coefficient < 0.0 {
                return bad(format!("{name} schedule must be finite with coefficient >= 0"));
            }
        }
        Ok(())
    }

    /// Sweep horizons, or the single horizon when none are listed.
    pub fn sweep_horizons(&self) -> Vec<usize> {
        if self.horizons.is_empty() {
            vec![self.horizon]
        } else {
            self.horizons.clone()
        }
    }

    pub fn stream_spec(&self, horizon: usize, seed: u64) -> StreamSpec {
        let mut spec = StreamSpec::new(self.constraint, self.loss, horizon, self.dimension);
        spec.delta = self.delta.at(horizon);
        spec.loss_drift = self.loss_variation.at(horizon) / horizon as f64;
        spec.seed = seed;
        spec.radius = self.radius;
        spec.curvature = self.curvature;
        spec.depth = self.depth;
        spec.gradient_scale = self.gradient_scale.at(horizon);
        spec.drift_scale = self.drift_scale;
        spec
    }

    /// Regret exponent implied by the schedules.
    pub fn predicted_exponent(&self) -> f64 {
        let v_g = 1.0 + self.delta.exponent;
        let v_f = if self.loss_variation.coefficient == 0.0 { f64::NEG_INFINITY } else { self.loss_variation.exponent };
        let v = v_g.max(v_f).max(0.0);
        match (self.mode, self.algorithm) {
            (Mode::StronglyConvex, _) => (v + 1.0) / 2.0,
            (Mode::ConvexSurrogate, Algorithm::Naive) => (v + 2.0) / 3.0,
            (Mode::ConvexSurrogate, Algorithm::DualOga) => (v + 6.0) / 7.0,
        }
    }
}
