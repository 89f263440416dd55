//! Safe online convex optimization under slowly changing constraints.
//!
//! Two learners play actions in a Euclidean ball while every per-round
//! constraint `g_t(x_t) <= 0` holds: [`algorithms::SafeNaive`], which calls a
//! constrained solver each round, and [`algorithms::SafeDualOga`], which runs
//! dual gradient ascent with a two-valued step size and needs only a
//! Lagrangian minimizer after its first round.

pub mod algorithms;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod functions;
pub mod geometry;
pub mod inner_solver;
pub mod metrics;
pub mod streams;
pub mod strong_oracle;

/// A point in the decision space.
pub type Action = nalgebra::DVector<f64>;

pub use algorithms::{Algorithm, AnyLearner, Learner, LearnerConfig, Phase, SafeDualOga, SafeNaive, StepSizePolicy};
pub use error::{Error, Result};
pub use functions::{Differentiable, Function, ProblemConstants, RoundProblem};
pub use geometry::ActionSet;
pub use inner_solver::{weak_oracle, SolveOutcome, SolverSettings};
pub use streams::{generate, verify_assumptions, AssumptionReport, ConstraintFamily, LossFamily, Stream, StreamSpec};
pub use strong_oracle::{strong_oracle, PrimalDualSolution, StrongOracleSettings};
pub use config::{ExperimentConfig, Mode};
pub use experiment::{run_once, run_sweep, RunOutput, RunSummary, SweepOutput};
