//! Seeded synthetic streams and a numerical assumption checker.
//!
//! Constraint families (action set: origin-centered ball of radius `rho`):
//!
//! * affine: `g_t(x) = <w, x> - b_t` with a fixed unit `w` and `b_t` on a
//!   reflecting walk in `[G - rho, G - rho/2]`; depth is `rho + b_t >= G`.
//! * ball: `g_t(x) = ||x - q_t||^2 - r^2` with `r^2 = 1.125 G` and `q_t`
//!   wandering inside a ball of radius `rho/5`.
//!
//! Loss families:
//!
//! * quadratic target: `f_t(x) = (a/2) ||x - c_t||^2`, `c_t` drifting inside
//!   radius `0.7 rho`.
//! * linear drift: `f_t(x) = <v_t, x>`, `v_t` of fixed norm rotating in a
//!   seeded plane. Convex only; run it through the surrogate wrapper.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algorithms::surrogate_constants;
use crate::error::{Error, Result};
use crate::functions::{Differentiable, Function, ProblemConstants, RoundProblem};
use crate::geometry::ActionSet;
use crate::Action;

/// Targets `c_t` stay within this fraction of the action-set radius.
pub const TARGET_RADIUS_FRACTION: f64 = 0.7;
/// Ball-constraint centers `q_t` stay within this fraction of the radius.
pub const BALL_CENTER_FRACTION: f64 = 0.2;
/// `r^2 = BALL_DEPTH_FACTOR * G`.
pub const BALL_DEPTH_FACTOR: f64 = 1.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintFamily {
    Affine,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossFamily {
    QuadraticTarget,
    LinearDrift,
}

impl std::str::FromStr for ConstraintFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine" => Ok(ConstraintFamily::Affine),
            "ball" => Ok(ConstraintFamily::Ball),
            other => Err(Error::Config(format!("unknown constraint family '{other}' (expected affine or ball)"))),
        }
    }
}

impl std::str::FromStr for LossFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" | "quadratic-target" => Ok(LossFamily::QuadraticTarget),
            "linear" | "linear-drift" => Ok(LossFamily::LinearDrift),
            other => Err(Error::Config(format!("unknown loss family '{other}' (expected quadratic or linear)"))),
        }
    }
}

impl ConstraintFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintFamily::Affine => "affine",
            ConstraintFamily::Ball => "ball",
        }
    }
}

impl LossFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossFamily::QuadraticTarget => "quadratic",
            LossFamily::LinearDrift => "linear",
        }
    }
}

/// `coefficient * T^exponent`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSchedule {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerSchedule {
    pub fn constant(value: f64) -> Self {
        Self { coefficient: value, exponent: 0.0 }
    }

    pub fn at(&self, horizon: usize) -> f64 {
        self.coefficient * (horizon as f64).powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub constraint: ConstraintFamily,
    pub loss: LossFamily,
    pub horizon: usize,
    pub dimension: usize,
    /// Per-round bound on `max_x |g_t - g_{t-1}|`.
    pub delta: f64,
    /// Per-round bound on `max_x |f_t - f_{t-1}|`.
    pub loss_drift: f64,
    pub seed: u64,
    /// Action-set radius `rho`.
    pub radius: f64,
    /// Curvature `a` of the quadratic-target loss.
    pub curvature: f64,
    /// Slater depth `G`; `None` picks the family default (`rho` affine, `rho^2 / 2` ball).
    pub depth: Option<f64>,
    /// `||v_t||` of the linear-drift loss.
    pub gradient_scale: f64,
    /// Multiplies the realized constraint step. Values above 1 break the
    /// declared drift bound and exist to exercise the checker.
    pub drift_scale: f64,
}

impl StreamSpec {
    pub fn new(constraint: ConstraintFamily, loss: LossFamily, horizon: usize, dimension: usize) -> Self {
        Self {
            constraint,
            loss,
            horizon,
            dimension,
            delta: 0.0,
            loss_drift: 0.0,
            seed: 0,
            radius: 1.0,
            curvature: 2.0,
            depth: None,
            gradient_scale: 0.1,
            drift_scale: 1.0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_loss_drift(mut self, loss_drift: f64) -> Self {
        self.loss_drift = loss_drift;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn resolved_depth(&self) -> f64 {
        self.depth.unwrap_or(match self.constraint {
            ConstraintFamily::Affine => self.radius,
            ConstraintFamily::Ball => 0.5 * self.radius * self.radius,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.dimension == 0 {
            return bad("dimension must be >= 1".into());
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return bad(format!("radius must be finite and > 0, got {}", self.radius));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return bad(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if !(self.loss_drift >= 0.0) || !self.loss_drift.is_finite() {
            return bad(format!("loss_drift must be finite and >= 0, got {}", self.loss_drift));
        }
        if !(self.drift_scale >= 0.0) || !self.drift_scale.is_finite() {
            return bad(format!("drift_scale must be finite and >= 0, got {}", self.drift_scale));
        }
        match self.loss {
            LossFamily::QuadraticTarget if !(self.curvature > 0.0) => {
                return bad(format!("curvature must be > 0, got {}", self.curvature));
            }
            LossFamily::LinearDrift if !(self.gradient_scale > 0.0) => {
                return bad(format!("gradient_scale must be > 0, got {}", self.gradient_scale));
            }
            _ => {}
        }
        let g = self.resolved_depth();
        if !(g > 0.0) || !g.is_finite() {
            return bad(format!("depth G must be finite and > 0, got {g}"));
        }
        if self.delta >= g {
            return bad(format!(
                "delta = {} must be < depth G = {g}: the shrunk problem needs a strictly feasible point",
                self.delta
            ));
        }
        match self.constraint {
            ConstraintFamily::Affine => {
                if g >= 1.5 * self.radius {
                    return bad(format!(
                        "depth G = {g} needs offsets b >= G - radius >= radius / 2; keep G < 1.5 * radius = {}",
                        1.5 * self.radius
                    ));
                }
            }
            ConstraintFamily::Ball => {
                let r = (BALL_DEPTH_FACTOR * g).sqrt();
                let reach = r + BALL_CENTER_FRACTION * self.radius;
                if reach >= self.radius {
                    return bad(format!(
                        "ball constraint of depth G = {g} has radius {r:.6}; with center drift it reaches {reach:.6} >= set radius {}",
                        self.radius
                    ));
                }
            }
        }
        Ok(())
    }

    /// The regularity constants of the generated family.
    ///
    /// For the linear-drift loss these are the raw convex constants (`mu = 0`);
    /// [`surrogate_constants`] turns them into usable ones.
    pub fn declared_constants(&self) -> ProblemConstants {
        let rho = self.radius;
        let diameter = 2.0 * rho;
        let (mu, m_f, l_f) = match self.loss {
            LossFamily::QuadraticTarget => (self.curvature, self.curvature, self.curvature * diameter),
            LossFamily::LinearDrift => (0.0, 0.0, self.gradient_scale),
        };
        let (m_g, l_g) = match self.constraint {
            ConstraintFamily::Affine => (0.0, 1.0),
            ConstraintFamily::Ball => (2.0, 2.0 * (BALL_CENTER_FRACTION * rho + rho)),
        };
        ProblemConstants {
            mu,
            loss_smoothness: m_f,
            loss_lipschitz: l_f,
            constraint_smoothness: m_g,
            constraint_lipschitz: l_g,
            depth: self.resolved_depth(),
            diameter,
            delta: self.delta,
            horizon: self.horizon,
        }
    }
}

/// A materialized stream with its declared constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub set: ActionSet,
    pub rounds: Vec<RoundProblem>,
    /// Deepest feasible point of round 1.
    pub safe_start: Action,
    pub constants: ProblemConstants,
    /// Declared per-round loss drift bound.
    pub loss_drift: f64,
}

impl Stream {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    /// `max_x |f_t - f_{t-1}|` for each round (0 for round 1), exact when the
    /// families allow it, otherwise over `probes`.
    pub fn loss_jumps(&self, probes: &[Action]) -> Vec<f64> {
        jumps(&self.rounds, &self.set, probes, |p| &p.loss)
    }

    pub fn constraint_jumps(&self, probes: &[Action]) -> Vec<f64> {
        jumps(&self.rounds, &self.set, probes, |p| &p.constraint)
    }

    /// The surrogate stream `f_t + (mu/2) ||x||^2` with matching constants.
    pub fn surrogate(&self, mu: f64) -> Result<Stream> {
        Ok(Stream {
            set: self.set.clone(),
            rounds: crate::algorithms::make_surrogate_stream(&self.rounds, mu)?,
            safe_start: self.safe_start.clone(),
            constants: surrogate_constants(&self.constants, mu, &self.set)?,
            loss_drift: self.loss_drift,
        })
    }
}

/// Exact `max_{x in set} |a(x) - b(x)|` where available, else the probe maximum.
pub fn max_difference(a: &Function, b: &Function, set: &ActionSet, probes: &[Action]) -> f64 {
    if let Some(exact) = a.max_abs_difference(b, set) {
        return exact;
    }
    probes.iter().map(|x| (a.value(x) - b.value(x)).abs()).fold(0.0, f64::max)
}

fn jumps<'a, F>(rounds: &'a [RoundProblem], set: &ActionSet, probes: &[Action], pick: F) -> Vec<f64>
where
    F: Fn(&'a RoundProblem) -> &'a Function,
{
    let mut out = Vec::with_capacity(rounds.len());
    if rounds.is_empty() {
        return out;
    }
    out.push(0.0);
    for w in rounds.windows(2) {
        out.push(max_difference(pick(&w[1]), pick(&w[0]), set, probes));
    }
    out
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Action {
    loop {
        let v = Action::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Action {
    let u: f64 = rng.random();
    unit_vector(rng, d) * (radius * u.powf(1.0 / d as f64))
}

/// Move `point` by `step` along `direction` inside the ball of `radius`,
/// reflecting the direction when the step is clipped.
fn drift_step(point: &Action, direction: &mut Action, step: f64, region: &ActionSet) -> Action {
    let moved = point + &*direction * step;
    if region.contains(&moved) {
        return moved;
    }
    let clipped = region.project_unchecked(&moved);
    let n = clipped.norm();
    if n > 0.0 {
        let normal = &clipped / n;
        let along = direction.dot(&normal);
        *direction -= normal * (2.0 * along);
    }
    clipped
}

/// Generate a stream that satisfies Assumptions 1-7 by construction.
pub fn generate(spec: &StreamSpec) -> Result<Stream> {
    spec.validate()?;
    let d = spec.dimension;
    let rho = spec.radius;
    let g = spec.resolved_depth();
    let set = ActionSet::centered(d, rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let constraints: Vec<Function> = match spec.constraint {
        ConstraintFamily::Affine => {
            let w = unit_vector(&mut rng, d);
            let lo = g - rho;
            let hi = lo + 0.5 * rho;
            let mut b = rng.random_range(lo..=hi);
            let mut out = Vec::with_capacity(spec.horizon);
            for t in 0..spec.horizon {
                if t > 0 {
                    let step = spec.drift_scale * spec.delta * rng.random_range(-1.0..=1.0);
                    b += step;
                    if b > hi {
                        b = 2.0 * hi - b;
                    }
                    if b < lo {
                        b = 2.0 * lo - b;
                    }
                    b = b.clamp(lo, hi);
                }
                out.push(Function::Affine { normal: w.clone(), offset: b });
            }
            out
        }
        ConstraintFamily::Ball => {
            let r = (BALL_DEPTH_FACTOR * g).sqrt();
            let q_radius = BALL_CENTER_FRACTION * rho;
            let region = ActionSet::centered(d, q_radius)?;
            let step = spec.drift_scale * spec.delta / (2.0 * (q_radius + rho));
            let mut q = uniform_in_ball(&mut rng, d, q_radius);
            let mut out = Vec::with_capacity(spec.horizon);
            for t in 0..spec.horizon {
                if t > 0 {
                    let mut dir = unit_vector(&mut rng, d);
                    q = drift_step(&q, &mut dir, step, &region);
                }
                out.push(Function::BallDistance { center: q.clone(), radius: r });
            }
            out
        }
    };

    let losses: Vec<Function> = match spec.loss {
        LossFamily::QuadraticTarget => {
            let a = spec.curvature;
            let c_radius = TARGET_RADIUS_FRACTION * rho;
            let region = ActionSet::centered(d, c_radius)?;
            // max_x |f_t - f_{t-1}| = a ||dc|| (||mid|| + rho) <= a ||dc|| (c_radius + rho)
            let step = spec.loss_drift / (a * (c_radius + rho));
            let mut c = uniform_in_ball(&mut rng, d, c_radius);
            let mut dir = unit_vector(&mut rng, d);
            let mut out = Vec::with_capacity(spec.horizon);
            for t in 0..spec.horizon {
                if t > 0 {
                    let noise = Action::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)) * (0.3 / (d as f64).sqrt());
                    let turned = &dir + noise;
                    let n = turned.norm();
                    if n > 1e-12 {
                        dir = turned / n;
                    }
                    c = drift_step(&c, &mut dir, step, &region);
                }
                out.push(Function::Quadratic { curvature: a, target: c.clone() });
            }
            out
        }
        LossFamily::LinearDrift => {
            let nu = spec.gradient_scale;
            let e1 = unit_vector(&mut rng, d);
            let e2 = if d > 1 {
                let raw = unit_vector(&mut rng, d);
                let orth = &raw - &e1 * raw.dot(&e1);
                let n = orth.norm();
                if n > 1e-8 { orth / n } else { Action::zeros(d) }
            } else {
                Action::zeros(d)
            };
            // max_x |<v_t - v_{t-1}, x>| = rho ||dv|| = 2 rho nu sin(theta / 2)
            let ratio = (spec.loss_drift / (2.0 * rho * nu)).min(1.0);
            let theta = 2.0 * ratio.asin();
            let mut phi = rng.random_range(0.0..std::f64::consts::TAU);
            let mut out = Vec::with_capacity(spec.horizon);
            for t in 0..spec.horizon {
                if t > 0 {
                    phi += theta;
                }
                let v = (&e1 * phi.cos() + &e2 * phi.sin()) * nu;
                out.push(Function::Linear { coefficients: v });
            }
            out
        }
    };

    let rounds: Vec<RoundProblem> = losses
        .into_iter()
        .zip(constraints)
        .enumerate()
        .map(|(i, (loss, constraint))| RoundProblem { loss, constraint, round_index: i + 1 })
        .collect();
    let safe_start = rounds[0]
        .constraint
        .minimize_over(&set)
        .ok_or_else(|| Error::InvalidSpec("constraint family has no closed-form minimizer".into()))?;

    Ok(Stream {
        set,
        constants: spec.declared_constants(),
        loss_drift: spec.loss_drift,
        rounds,
        safe_start,
    })
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(n);
    let mut k = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= k).all(|&p| k % p != 0) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// Deterministic Halton probes: half inside the ball, half on its sphere.
pub fn halton_probes(set: &ActionSet, count: usize) -> Vec<Action> {
    let d = set.dimension();
    let bases = first_primes(d);
    let radical_inverse = |mut i: u64, base: u64| {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    };
    let cube = |i: u64| Action::from_fn(d, |k, _| 2.0 * radical_inverse(i, bases[k]) - 1.0);

    let interior_target = count.div_ceil(2);
    let mut out = Vec::with_capacity(count);
    let mut i: u64 = 1;
    while out.len() < interior_target {
        let p = cube(i);
        i += 1;
        if p.norm() <= 1.0 {
            out.push(set.center() + p * set.radius());
        }
    }
    while out.len() < count {
        let p = cube(i);
        i += 1;
        let n = p.norm();
        if n > 1e-9 {
            out.push(set.center() + p * (set.radius() / n));
        }
    }
    out
}

/// Outcome of [`verify_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Pass flags for Assumptions 1-7, in order.
    pub passed: [bool; 7],
    pub measured_max_constraint_drift: f64,
    pub measured_v_f: f64,
    pub measured_v_g: f64,
    /// `delta T`
    pub v_g_bound: f64,
    /// `min_t (-min_x g_t(x))`, the depth every round attains.
    pub slater_depth: f64,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.passed.iter().all(|&p| p)
    }

    /// 1-based indices of the failing assumptions.
    pub fn failures(&self) -> Vec<usize> {
        (1..=7).filter(|&k| !self.passed[k - 1]).collect()
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 7] = [
            "simple action set with diameter R",
            "loss moduli (mu, M_f, L_f)",
            "constraint moduli (convex, M_g, L_g)",
            "constraint drift <= delta",
            "loss variation",
            "Slater depth G",
            "safe starting point",
        ];
        for (k, name) in NAMES.iter().enumerate() {
            let verdict = if self.passed[k] { "pass" } else { "FAIL" };
            writeln!(f, "Assumption {}: {verdict} ({name})", k + 1)?;
        }
        writeln!(f, "measured_max_constraint_drift = {:.6e}", self.measured_max_constraint_drift)?;
        writeln!(f, "measured_V_f = {:.6e}", self.measured_v_f)?;
        writeln!(f, "measured_V_g = {:.6e} (bound delta*T = {:.6e})", self.measured_v_g, self.v_g_bound)?;
        writeln!(f, "slater_depth = {:.6e}", self.slater_depth)?;
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

const SEGMENT_SLACK: f64 = 1e-8;
const MODULI_ROUNDS: usize = 64;

fn segment_check(
    f: &Function,
    probes: &[Action],
    mu: f64,
    smoothness: f64,
    lipschitz: f64,
) -> Option<String> {
    for pair in probes.windows(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let fx = f.value(x);
        let fy = f.value(y);
        let dist = (y - x).norm();
        let lin = fx + f.gradient(x).dot(&(y - x));
        let d2 = dist * dist;
        if fy < lin + 0.5 * mu * d2 - SEGMENT_SLACK {
            return Some(format!("strong convexity {mu} fails on a probe segment"));
        }
        if fy > lin + 0.5 * smoothness * d2 + SEGMENT_SLACK {
            return Some(format!("smoothness {smoothness} fails on a probe segment"));
        }
        if (fy - fx).abs() > lipschitz * dist + SEGMENT_SLACK {
            return Some(format!("Lipschitz bound {lipschitz} fails on a probe segment"));
        }
    }
    None
}

/// `min_{x in set} g(x)` by projected gradient with backtracking.
pub fn minimize_constraint(g: &Function, set: &ActionSet) -> f64 {
    let mut x = set.center().clone();
    let mut fx = g.value(&x);
    for _ in 0..10_000 {
        let grad = g.gradient(&x);
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let y = set.project_unchecked(&(&x - &grad * step));
            let fy = g.value(&y);
            let d = &y - &x;
            if fy <= fx + grad.dot(&d) + 0.5 / step * d.norm_squared() {
                improved = d.norm() > 1e-14;
                x = y;
                fx = fy;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    fx
}

/// Check a stream against the declared constants.
///
/// `probe_budget` (at least 100) Halton points drive the segment tests and any
/// drift maxima without a closed form.
pub fn verify_assumptions(stream: &Stream, constants: &ProblemConstants, probe_budget: usize) -> AssumptionReport {
    let budget = probe_budget.max(100);
    let set = &stream.set;
    let probes = halton_probes(set, budget);
    let mut notes = Vec::new();
    let mut passed = [true; 7];
    let t_len = stream.rounds.len();

    if probe_budget < 100 {
        notes.push(format!("probe_budget {probe_budget} raised to 100"));
    }

    // 1: diameter bound and dimensions.
    if constants.diameter + 1e-12 < set.diameter() {
        passed[0] = false;
        notes.push(format!("declared R = {} below the set diameter {}", constants.diameter, set.diameter()));
    }
    if stream.rounds.iter().any(|p| p.loss.dimension() != set.dimension() || p.constraint.dimension() != set.dimension()) {
        passed[0] = false;
        notes.push("a round's dimension differs from the action set".into());
    }

    // 2 and 3: moduli on probe segments over a spread of rounds.
    let stride = (t_len / MODULI_ROUNDS).max(1);
    for p in stream.rounds.iter().step_by(stride) {
        if passed[1] {
            if !(constants.mu > 0.0) {
                passed[1] = false;
                notes.push(format!("declared mu = {} is not positive", constants.mu));
            } else if let Some(why) = segment_check(&p.loss, &probes, constants.mu, constants.loss_smoothness, constants.loss_lipschitz) {
                passed[1] = false;
                notes.push(format!("round {}: loss {why}", p.round_index));
            }
        }
        if passed[2] {
            if let Some(why) = segment_check(
                &p.constraint,
                &probes,
                0.0,
                constants.constraint_smoothness,
                constants.constraint_lipschitz,
            ) {
                passed[2] = false;
                notes.push(format!("round {}: constraint {why}", p.round_index));
            }
        }
    }

    // 4: constraint drift.
    let g_jumps = stream.constraint_jumps(&probes);
    let max_drift = g_jumps.iter().copied().fold(0.0, f64::max);
    let measured_v_g: f64 = g_jumps.iter().sum();
    let drift_tol = constants.delta * 1e-9 + 1e-12;
    if let Some(t) = g_jumps.iter().position(|&j| j > constants.delta + drift_tol) {
        passed[3] = false;
        notes.push(format!(
            "round {}: max_x |g_t - g_(t-1)| = {:.6e} exceeds delta = {:.6e}",
            t + 1,
            g_jumps[t],
            constants.delta
        ));
    }

    // 5: loss variation.
    let f_jumps = stream.loss_jumps(&probes);
    let measured_v_f: f64 = f_jumps.iter().sum();
    let loss_tol = stream.loss_drift * 1e-9 + 1e-12;
    if let Some(t) = f_jumps.iter().position(|&j| j > stream.loss_drift + loss_tol) {
        passed[4] = false;
        notes.push(format!(
            "round {}: max_x |f_t - f_(t-1)| = {:.6e} exceeds the declared drift {:.6e}",
            t + 1,
            f_jumps[t],
            stream.loss_drift
        ));
    }
    if !measured_v_f.is_finite() {
        passed[4] = false;
    }

    // 6: depth.
    let mut slater_depth = f64::INFINITY;
    for p in &stream.rounds {
        let mut lowest = minimize_constraint(&p.constraint, set);
        for x in &probes {
            lowest = lowest.min(p.constraint.value(x));
        }
        slater_depth = slater_depth.min(-lowest);
    }
    if t_len == 0 {
        slater_depth = 0.0;
    }
    if slater_depth < constants.depth - 1e-9 {
        passed[5] = false;
        notes.push(format!("attained depth {slater_depth:.6e} is below the declared G = {:.6e}", constants.depth));
    }

    // 7: safe start.
    match stream.rounds.first() {
        Some(first) => {
            let value = first.constraint.value(&stream.safe_start);
            if !set.contains(&stream.safe_start) || value > 0.0 {
                passed[6] = false;
                notes.push(format!("safe start has g_1 = {value:.6e}"));
            }
        }
        None => {
            passed[6] = false;
            notes.push("stream is empty".into());
        }
    }

    AssumptionReport {
        passed,
        measured_max_constraint_drift: max_drift,
        measured_v_f,
        measured_v_g,
        v_g_bound: constants.delta * t_len as f64,
        slater_depth,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn affine(seed: u64) -> StreamSpec {
        StreamSpec::new(ConstraintFamily::Affine, LossFamily::QuadraticTarget, 200, 2)
            .with_delta(0.01)
            .with_loss_drift(0.02)
            .with_seed(seed)
    }

    #[test]
    fn static_constraint_has_zero_drift() {
        let s = generate(&affine(1).with_delta(0.0)).unwrap();
        let probes = halton_probes(&s.set, 100);
        assert!(s.constraint_jumps(&probes).iter().all(|&j| j == 0.0));
        assert!(s.rounds.windows(2).all(|w| w[0].constraint == w[1].constraint));
    }

    #[test]
    fn static_loss_has_zero_variation() {
        for family in [LossFamily::QuadraticTarget, LossFamily::LinearDrift] {
            let mut spec = affine(2).with_loss_drift(0.0);
            spec.loss = family;
            let s = generate(&spec).unwrap();
            let r = verify_assumptions(&s, &s.constants, 100);
            assert_eq!(r.measured_v_f, 0.0);
        }
    }

    #[test]
    fn sampled_drift_within_delta() {
        let spec = StreamSpec::new(ConstraintFamily::Affine, LossFamily::QuadraticTarget, 100, 2)
            .with_delta(0.01)
            .with_seed(7);
        let s = generate(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let samples: Vec<Action> = (0..10_000).map(|_| uniform_in_ball(&mut rng, 2, 1.0)).collect();
        for w in s.rounds.windows(2) {
            let m = samples
                .iter()
                .map(|x| (w[1].constraint.value(x) - w[0].constraint.value(x)).abs())
                .fold(0.0, f64::max);
            assert!(m <= 0.01 + 1e-15);
        }
    }

    #[test]
    fn affine_drift_is_offset_change() {
        let s = generate(&affine(3)).unwrap();
        let probes = halton_probes(&s.set, 100);
        let jumps = s.constraint_jumps(&probes);
        for (t, w) in s.rounds.windows(2).enumerate() {
            let (Function::Affine { offset: b0, .. }, Function::Affine { offset: b1, .. }) = (&w[0].constraint, &w[1].constraint) else {
                panic!("affine family expected");
            };
            assert_abs_diff_eq!(jumps[t + 1], (b1 - b0).abs(), epsilon = 1e-15);
        }
    }

    #[test]
    fn shipped_generators_pass_the_checker() {
        for constraint in [ConstraintFamily::Affine, ConstraintFamily::Ball] {
            for d in [2, 5] {
                for seed in 0..3 {
                    let mut spec = affine(seed);
                    spec.constraint = constraint;
                    spec.dimension = d;
                    let s = generate(&spec).unwrap();
                    let r = verify_assumptions(&s, &s.constants, 200);
                    assert!(r.all_pass(), "{constraint:?} D={d} seed={seed}\n{r}");
                    assert!(r.measured_v_g <= r.v_g_bound + 1e-12);
                }
            }
        }
    }

    #[test]
    fn surrogate_linear_stream_passes_the_checker() {
        let mut spec = affine(4);
        spec.loss = LossFamily::LinearDrift;
        let s = generate(&spec).unwrap().surrogate(0.3).unwrap();
        let r = verify_assumptions(&s, &s.constants, 200);
        assert!(r.all_pass(), "{r}");
    }

    #[test]
    fn oversized_walk_step_flags_drift() {
        let mut spec = affine(5);
        spec.drift_scale = 2.0;
        let s = generate(&spec).unwrap();
        let r = verify_assumptions(&s, &s.constants, 100);
        assert_eq!(r.failures(), vec![4]);
        assert!(r.to_string().contains("Assumption 4: FAIL"));
    }

    #[test]
    fn overstated_depth_flags_slater() {
        let s = generate(&affine(6)).unwrap();
        let c = ProblemConstants { depth: 3.0, ..s.constants };
        let r = verify_assumptions(&s, &c, 100);
        assert!(!r.passed[5]);
    }

    #[test]
    fn unsafe_start_flags_assumption_seven() {
        let mut s = generate(&affine(8)).unwrap();
        s.safe_start = -s.safe_start.clone();
        let r = verify_assumptions(&s, &s.constants, 100);
        assert!(!r.passed[6]);
    }

    #[test]
    fn rejects_infeasible_specs() {
        assert!(matches!(generate(&affine(0).with_delta(1.0)), Err(Error::InvalidSpec(_))));
        let mut ball = affine(0);
        ball.constraint = ConstraintFamily::Ball;
        ball.depth = Some(0.9);
        assert!(matches!(generate(&ball), Err(Error::InvalidSpec(_))));
        let mut wide = affine(0);
        wide.depth = Some(1.6);
        assert!(generate(&wide).is_err());
    }

    #[test]
    fn generation_is_deterministic_in_seed() {
        let a = generate(&affine(11)).unwrap();
        let b = generate(&affine(11)).unwrap();
        let c = generate(&affine(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.rounds, c.rounds);
    }

    #[test]
    fn loss_drift_respected_exactly() {
        for constraint in [ConstraintFamily::Affine, ConstraintFamily::Ball] {
            let mut spec = affine(13).with_loss_drift(0.05);
            spec.constraint = constraint;
            let s = generate(&spec).unwrap();
            let jumps = s.loss_jumps(&[]);
            assert!(jumps.iter().all(|&j| j <= 0.05 * (1.0 + 1e-12)));
            assert!(jumps.iter().skip(1).any(|&j| j > 0.01));
        }
    }

    #[test]
    fn probes_are_in_the_set() {
        let set = ActionSet::centered(5, 2.0).unwrap();
        let p = halton_probes(&set, 300);
        assert_eq!(p.len(), 300);
        assert!(p.iter().all(|x| set.contains(x)));
        assert_eq!(p, halton_probes(&set, 300));
    }

    #[test]
    fn schedules() {
        let s = PowerSchedule { coefficient: 0.05, exponent: -0.5 };
        assert_abs_diff_eq!(s.at(100), 0.005, epsilon = 1e-15);
        assert_eq!(PowerSchedule::constant(3.0).at(1000), 3.0);
    }
}
