//! `safe-oco run|sweep|verify`.
//!
//! Exit codes: 0 ok, 1 usage or I/O, 2 invariant breach, 3 solver failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, Mode};
use crate::error::Error;
use crate::experiment::{run_once, run_sweep, surrogate_mu_for, write_run};
use crate::streams::{generate, verify_assumptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BREACH: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Probe points handed to the assumption checker.
pub const VERIFY_PROBES: usize = 2048;

#[derive(Debug, Parser)]
#[command(name = "safe-oco", version, about = "Safe online learning under drifting constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub strict_safety: bool,
    /// Comma-separated seeds; overrides the config.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its trace and summary.
    Run(CommonArgs),
    /// Run every (horizon, seed) cell and fit the regret slope.
    Sweep(CommonArgs),
    /// Check the generated stream against the standing assumptions.
    Verify(CommonArgs),
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } | Error::InfeasibleOrBadConstants { .. } => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

fn load(args: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut c = ExperimentConfig::from_file(&args.config)?;
    if let Some(out) = &args.out {
        c.output_dir = out.clone();
    }
    if args.strict_safety {
        c.strict_safety = true;
    }
    if let Some(seeds) = &args.seeds {
        c.seeds = seeds.clone();
    }
    c.validate()?;
    Ok(c)
}

fn fail(err: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(err, "error: {e}");
    exit_code_for(e)
}

pub fn cmd_run(args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let config = match load(args) {
        Ok(c) => c,
        Err(e) => return fail(err, &e),
    };
    let seed = config.seeds[0];
    let output = match run_once(&config, config.horizon, seed) {
        Ok(o) => o,
        Err(e) => return fail(err, &e),
    };
    if let Err(e) = write_run(&config.output_dir, "", &output) {
        return fail(err, &e);
    }
    let _ = write!(out, "{}", output.summary.to_text());
    if output.summary.safe {
        EXIT_OK
    } else {
        let _ = writeln!(
            err,
            "safety breach: max violation {:.6e} exceeds slack {:.6e}",
            output.summary.max_violation, output.summary.safety_slack
        );
        EXIT_BREACH
    }
}

pub fn cmd_sweep(args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let config = match load(args) {
        Ok(c) => c,
        Err(e) => return fail(err, &e),
    };
    if config.sweep_horizons().len() < 4 {
        let _ = writeln!(err, "error: a sweep needs at least 4 horizons");
        return EXIT_USAGE;
    }
    let dir: &Path = &config.output_dir;
    if let Err(e) = std::fs::create_dir_all(dir) {
        return fail(err, &Error::Io(format!("cannot create {}: {e}", dir.display())));
    }
    let sweep = match run_sweep(&config, Some(dir)) {
        Ok(s) => s,
        Err(e) => return fail(err, &e),
    };
    let _ = write!(out, "{}", sweep.summary_text());
    for f in &sweep.failures {
        let _ = writeln!(err, "cell T={} seed={} failed: {}", f.horizon, f.seed, f.error);
    }
    if sweep.any_breach() {
        EXIT_BREACH
    } else if let Some(f) = sweep.failures.first() {
        exit_code_for(&f.error)
    } else {
        EXIT_OK
    }
}

pub fn cmd_verify(args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let config = match load(args) {
        Ok(c) => c,
        Err(e) => return fail(err, &e),
    };
    let spec = config.stream_spec(config.horizon, config.seeds[0]);
    let stream = match generate(&spec) {
        Ok(s) => s,
        Err(e) => return fail(err, &e),
    };
    let checked = match config.mode {
        Mode::StronglyConvex => Ok(stream),
        Mode::ConvexSurrogate => surrogate_mu_for(&config, &stream).and_then(|mu| stream.surrogate(mu)),
    };
    let checked = match checked {
        Ok(s) => s,
        Err(e) => return fail(err, &e),
    };
    let report = verify_assumptions(&checked, &checked.constants, VERIFY_PROBES);
    let _ = write!(out, "{report}");
    if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_BREACH
    }
}

/// Parse `args` (including the program name) and dispatch.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Verify(a) => cmd_verify(a, out, err),
    }
}
