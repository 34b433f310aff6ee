//! Command-line front end: `run`, `check-grad` and `list`.
//!
//! Exit codes: 0 on success, 1 for usage, configuration and I/O errors
//! (and failed gradient checks), 2 when the run hits a non-finite state.

use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::cmp::Formulation;
use crate::error::Error;
use crate::formulations::PenaltyScheduler;
use crate::gradients::{check_gradients, FunctionCheck};
use crate::optim::{ConstrainedOptimizer, DualKind, DualOptimizer, PrimalKind, PrimalOptimizer, Scheme};
use crate::problems::{BenchmarkProblem, GroupSetup, PROBLEM_NAMES};
use crate::session::Session;
use crate::trace::TraceWriter;

pub const PRIMAL_OPTIMIZERS: [&str; 3] = ["gd", "momentum", "adam"];
pub const DUAL_OPTIMIZERS: [&str; 2] = ["ga", "nupi"];

pub const CHECK_POINTS: usize = 10;
pub const CHECK_REL_TOL: f64 = 1e-5;
pub const CHECK_ABS_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "lagrangekit", version, about = "Lagrangian constrained optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an optimizer on a benchmark problem and write a CSV trace.
    Run(RunArgs),
    /// Compare analytic gradients of a benchmark against finite differences.
    CheckGrad(ProblemArgs),
    /// List problems, schemes, formulations and optimizers.
    List,
}

/// Problem selection. Matrices are written row by row: `"1,0;0,1"`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
struct ProblemArgs {
    /// projection_ball | equality_qp | norm_logreg | bilinear
    #[arg(long)]
    problem: Option<String>,
    /// Ball target vector, or the constraint matrix A for equality_qp.
    #[arg(long)]
    a: Option<Numbers>,
    /// Objective matrix Q (equality_qp).
    #[arg(long)]
    q: Option<Numbers>,
    /// Linear objective term b (equality_qp).
    #[arg(long)]
    b: Option<Numbers>,
    /// Constraint right-hand side c (equality_qp).
    #[arg(long)]
    c: Option<Numbers>,
    /// Norm bound (norm_logreg).
    #[arg(long)]
    threshold: Option<f64>,
    /// Dataset seed (norm_logreg) and gradient-check sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with the same field names; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
struct RunArgs {
    #[command(flatten)]
    #[serde(skip)]
    problem: ProblemArgs,
    /// simultaneous | alt-pd | alt-dp | extragradient
    #[arg(long)]
    scheme: Option<String>,
    /// alt-pd only: reuse the constraints measured before the primal step.
    #[arg(long)]
    reuse_violations: Option<Option<bool>>,
    /// lagrangian | augmented_lagrangian | quadratic_penalty (all groups)
    #[arg(long)]
    formulation: Option<String>,
    /// Initial penalty coefficient for penalized formulations.
    #[arg(long)]
    penalty: Option<f64>,
    /// Run the penalty scheduler every N steps.
    #[arg(long)]
    penalty_every: Option<u64>,
    #[arg(long)]
    penalty_growth: Option<f64>,
    /// Required ratio of violation decrease before the penalty is kept.
    #[arg(long)]
    penalty_ratio: Option<f64>,
    #[arg(long)]
    penalty_max: Option<f64>,
    /// Use indexed multipliers.
    #[arg(long)]
    indexed: Option<Option<bool>>,
    /// gd | momentum | adam
    #[arg(long)]
    primal_optimizer: Option<String>,
    #[arg(long)]
    lr_primal: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// ga | nupi
    #[arg(long)]
    dual_optimizer: Option<String>,
    #[arg(long)]
    lr_dual: Option<f64>,
    /// nuPI proportional gain.
    #[arg(long)]
    kp: Option<f64>,
    /// nuPI smoothing factor.
    #[arg(long)]
    nu: Option<f64>,
    /// Number of rolls to perform in this invocation.
    #[arg(long)]
    steps: Option<u64>,
    /// CSV trace path. Appended to when resuming and the file exists.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    checkpoint_in: Option<PathBuf>,
    #[arg(long)]
    checkpoint_out: Option<PathBuf>,
    /// Also write `checkpoint_out` whenever the step counter is a multiple of N.
    #[arg(long)]
    checkpoint_every: Option<u64>,
}

/// A number list (`3,4`) or matrix (`1,0;0,1`); in TOML also an array or
/// an array of arrays.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum Numbers {
    Text(String),
    Row(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl std::str::FromStr for Numbers {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Numbers::Text(s.to_owned()))
    }
}

impl Numbers {
    fn rows(&self, name: &str) -> Result<Vec<Vec<f64>>, CliError> {
        match self {
            Numbers::Row(r) => Ok(vec![r.clone()]),
            Numbers::Rows(r) => Ok(r.clone()),
            Numbers::Text(s) => s
                .split(';')
                .map(|row| {
                    row.split(',')
                        .map(|v| {
                            v.trim()
                                .parse::<f64>()
                                .map_err(|_| CliError::usage(format!("--{name}: `{v}` is not a number")))
                        })
                        .collect()
                })
                .collect(),
        }
    }

    fn vector(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let mut rows = self.rows(name)?;
        if rows.len() != 1 {
            return Err(CliError::usage(format!("--{name} must be a single list of numbers")));
        }
        Ok(rows.remove(0))
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn unknown(kind: &str, name: &str, valid: &[&str]) -> CliError {
    CliError::usage(format!("unknown {kind} `{name}`; valid values: {}", valid.join(", ")))
}

macro_rules! merge {
    ($flags:expr, $file:expr; $($field:ident),* $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field.take(); } )*
    };
}

const CONFIG_KEYS: [&str; 31] = [
    "problem", "a", "q", "b", "c", "threshold", "seed", "scheme", "reuse_violations", "formulation",
    "penalty", "penalty_every", "penalty_growth", "penalty_ratio", "penalty_max", "indexed",
    "primal_optimizer", "lr_primal", "momentum", "beta1", "beta2", "eps", "dual_optimizer", "lr_dual",
    "kp", "nu", "steps", "trace", "checkpoint_in", "checkpoint_out", "checkpoint_every",
];

/// Reads a TOML config. Every key must be a known field; the problem
/// and run halves are extracted from the same table.
fn read_config(path: &Path) -> Result<(ProblemArgs, RunArgs), CliError> {
    let invalid = |e: &dyn std::fmt::Display| CliError::usage(format!("invalid config {}: {e}", path.display()));
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| invalid(&e))?;
    if let Some(key) = table.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(invalid(&format!("unknown field `{key}`")));
    }
    let problem: ProblemArgs = table.clone().try_into().map_err(|e| invalid(&e))?;
    let run: RunArgs = table.try_into().map_err(|e| invalid(&e))?;
    Ok((problem, run))
}

fn merge_problem(flags: &mut ProblemArgs, mut file: ProblemArgs) {
    merge!(flags, file; problem, a, q, b, c, threshold, seed);
}

fn resolve_run(mut flags: RunArgs) -> Result<RunArgs, CliError> {
    if let Some(path) = flags.problem.config.clone() {
        let (problem, mut file) = read_config(&path)?;
        merge_problem(&mut flags.problem, problem);
        merge!(flags, file;
            scheme, reuse_violations, formulation, penalty, penalty_every, penalty_growth,
            penalty_ratio, penalty_max, indexed, primal_optimizer, lr_primal, momentum, beta1,
            beta2, eps, dual_optimizer, lr_dual, kp, nu, steps, trace, checkpoint_in,
            checkpoint_out, checkpoint_every);
    }
    Ok(flags)
}

fn resolve_problem(mut flags: ProblemArgs) -> Result<ProblemArgs, CliError> {
    if let Some(path) = flags.config.clone() {
        let (file, _) = read_config(&path)?;
        merge_problem(&mut flags, file);
    }
    Ok(flags)
}

/// Builds a benchmark from its name and parameters.
fn build_bench(args: &ProblemArgs) -> Result<BenchmarkProblem, CliError> {
    let name = args
        .problem
        .as_deref()
        .ok_or_else(|| CliError::usage(format!("--problem is required; valid values: {}", PROBLEM_NAMES.join(", "))))?;
    let bench = match name {
        "projection_ball" => {
            let a = match &args.a {
                Some(a) => a.vector("a")?,
                None => vec![3.0, 4.0],
            };
            BenchmarkProblem::projection_ball(&a)?
        }
        "equality_qp" => {
            let a = match &args.a {
                Some(a) => a.rows("a")?,
                None => vec![vec![1.0, 1.0]],
            };
            let n = a.first().map_or(2, Vec::len);
            let q = match &args.q {
                Some(q) => q.rows("q")?,
                None => (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            };
            let b = match &args.b {
                Some(b) => b.vector("b")?,
                None => vec![0.0; n],
            };
            let c = match (&args.c, &args.a) {
                (Some(c), _) => c.vector("c")?,
                (None, None) => vec![2.0],
                (None, Some(_)) => vec![0.0; a.len()],
            };
            BenchmarkProblem::equality_qp(&q, &b, &a, &c)?
        }
        "norm_logreg" => BenchmarkProblem::norm_logreg(args.seed.unwrap_or(0), args.threshold.unwrap_or(1.0))?,
        "bilinear" => BenchmarkProblem::bilinear()?,
        other => return Err(unknown("problem", other, &PROBLEM_NAMES)),
    };
    Ok(bench)
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::usage(format!("--{name} must be > 0, got {v}")))
    }
}

fn build_optimizer(args: &RunArgs) -> Result<ConstrainedOptimizer, CliError> {
    let scheme_name = args.scheme.as_deref().unwrap_or("simultaneous");
    let scheme = Scheme::parse(scheme_name)
        .ok_or_else(|| unknown("scheme", scheme_name, &Scheme::ALL.map(Scheme::as_str)))?;
    let lr_primal = positive("lr-primal", args.lr_primal.unwrap_or(0.01))?;
    let lr_dual = positive("lr-dual", args.lr_dual.unwrap_or(0.01))?;
    let primal_kind = match args.primal_optimizer.as_deref().unwrap_or("gd") {
        "gd" => PrimalKind::Gd,
        "momentum" => PrimalKind::Momentum {
            beta: args.momentum.unwrap_or(0.9),
        },
        "adam" => PrimalKind::AdamLike {
            beta1: args.beta1.unwrap_or(0.9),
            beta2: args.beta2.unwrap_or(0.999),
            eps: args.eps.unwrap_or(1e-8),
        },
        other => return Err(unknown("primal optimizer", other, &PRIMAL_OPTIMIZERS)),
    };
    let dual_kind = match args.dual_optimizer.as_deref().unwrap_or("ga") {
        "ga" => DualKind::GradientAscent,
        "nupi" => DualKind::NuPi {
            kp: args.kp.unwrap_or(0.0),
            nu: args.nu.unwrap_or(0.0),
        },
        other => return Err(unknown("dual optimizer", other, &DUAL_OPTIMIZERS)),
    };
    let primal = PrimalOptimizer::new(primal_kind, lr_primal)?;
    let dual = DualOptimizer::new(dual_kind, lr_dual)?;
    Ok(ConstrainedOptimizer::new(scheme, primal, dual).with_reused_violations(flag(args.reuse_violations)))
}

fn flag(v: Option<Option<bool>>) -> bool {
    match v {
        Some(Some(b)) => b,
        Some(None) => true,
        None => false,
    }
}

fn build_session(args: &RunArgs) -> Result<Session, CliError> {
    let bench = build_bench(&args.problem)?;
    let formulation_name = args.formulation.as_deref().unwrap_or("lagrangian");
    let formulation = Formulation::parse(formulation_name)
        .ok_or_else(|| unknown("formulation", formulation_name, &Formulation::ALL.map(Formulation::as_str)))?;
    let mut setup = GroupSetup::new(formulation).indexed(flag(args.indexed));
    if let Some(p) = args.penalty {
        setup = setup.with_penalty(positive("penalty", p)?);
    }
    if args.penalty_every.is_some() {
        let defaults = PenaltyScheduler::default();
        setup = setup.with_scheduler(PenaltyScheduler::new(
            args.penalty_growth.unwrap_or(defaults.growth_factor()),
            args.penalty_ratio.unwrap_or(defaults.required_decrease_ratio()),
            args.penalty_max.unwrap_or(defaults.max_value()),
        )?);
    }
    let problem = bench.constrained_problem(&setup)?;
    let optimizer = build_optimizer(args)?;
    let mut session = Session::new(bench, problem, optimizer);
    if let Some(n) = args.penalty_every {
        if !formulation.has_penalty() {
            return Err(CliError::usage("--penalty-every needs a penalized formulation"));
        }
        session = session.with_penalty_every(n)?;
    }
    Ok(session)
}

fn format_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    format!("[{}]", items.join(","))
}

fn cmd_run(args: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let args = resolve_run(args)?;
    let steps = args.steps.unwrap_or(100);
    if steps == 0 {
        return Err(CliError::usage("--steps must be >= 1"));
    }
    if args.checkpoint_every.is_some() && args.checkpoint_out.is_none() {
        return Err(CliError::usage("--checkpoint-every needs --checkpoint-out"));
    }
    if args.checkpoint_every == Some(0) {
        return Err(CliError::usage("--checkpoint-every must be >= 1"));
    }
    let mut session = build_session(&args)?;
    let resuming = args.checkpoint_in.is_some();
    if let Some(path) = &args.checkpoint_in {
        session.load(path)?;
    }

    let mut trace = match &args.trace {
        Some(path) => {
            let append = resuming && path.exists();
            let file = OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(path)?;
            Some(TraceWriter::new(BufWriter::new(file), append)?)
        }
        None => None,
    };

    let mut failure = None;
    for _ in 0..steps {
        let observed = session.roll().and_then(|()| session.observe());
        let obs = match observed {
            Ok(obs) => obs,
            Err(e) => {
                failure = Some(CliError::from(e));
                break;
            }
        };
        if let Some(t) = trace.as_mut() {
            t.write_row(&obs.row)?;
        }
        if let (Some(n), Some(path)) = (args.checkpoint_every, &args.checkpoint_out) {
            if session.step() % n == 0 {
                session.save(path)?;
            }
        }
    }
    if let Some(t) = trace.as_mut() {
        t.flush()?;
    }
    if let Some(e) = failure {
        writeln!(err, "step {}: {}", session.step() + 1, e.message())?;
        return Err(e);
    }
    if let Some(path) = &args.checkpoint_out {
        session.save(path)?;
    }

    let obs = session.observe()?;
    let mults: Vec<String> = session
        .problem()
        .multipliers()
        .iter()
        .map(|(id, v)| format!("{id}={}", format_vec(v)))
        .collect();
    writeln!(
        out,
        "step={} loss={:e} max_violation={:e} kkt_stationarity={:e} kkt_feasibility={:e} kkt_complementarity={:e} x={} multipliers={{{}}}",
        session.step(),
        obs.row.loss,
        obs.row.max_ineq_violation.max(obs.row.max_eq_violation),
        obs.kkt.stationarity,
        obs.kkt.feasibility,
        obs.kkt.complementarity,
        format_vec(session.problem().x()),
        mults.join(",")
    )?;
    Ok(())
}

/// Per-function worst case over `points` seeded points drawn uniformly
/// from `[-2, 2]^dim`.
pub fn check_benchmark_gradients(
    bench: &BenchmarkProblem,
    seed: u64,
    points: usize,
    rel_tol: f64,
    abs_tol: f64,
) -> crate::Result<Vec<FunctionCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let functions = bench.functions();
    let mut summary: Vec<FunctionCheck> = functions
        .iter()
        .map(|(name, _)| FunctionCheck {
            name: (*name).to_owned(),
            max_deviation: 0.0,
            worst: None,
            passed: true,
        })
        .collect();
    for _ in 0..points {
        let x: Vec<f64> = (0..bench.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let report = check_gradients(&functions, &x, rel_tol, abs_tol)?;
        for (acc, f) in summary.iter_mut().zip(report.functions) {
            acc.max_deviation = acc.max_deviation.max(f.max_deviation);
            if !f.passed && acc.passed {
                acc.passed = false;
                acc.worst = f.worst;
            }
        }
    }
    Ok(summary)
}

/// Prints the gradient check for `bench`; returns the process exit code.
pub fn report_gradient_check(bench: &BenchmarkProblem, seed: u64, out: &mut dyn Write) -> std::io::Result<i32> {
    let checks = match check_benchmark_gradients(bench, seed, CHECK_POINTS, CHECK_REL_TOL, CHECK_ABS_TOL) {
        Ok(c) => c,
        Err(e) => {
            writeln!(out, "gradient check failed: {e}")?;
            return Ok(1);
        }
    };
    let mut ok = true;
    for c in &checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        writeln!(out, "{}: {status} max_deviation={:e}", c.name, c.max_deviation)?;
        ok &= c.passed;
    }
    Ok(if ok { 0 } else { 1 })
}

fn cmd_check_grad(args: ProblemArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let args = resolve_problem(args)?;
    let bench = build_bench(&args)?;
    Ok(report_gradient_check(&bench, args.seed.unwrap_or(0), out)?)
}

fn cmd_list(out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "problems: {}", PROBLEM_NAMES.join(", "))?;
    writeln!(out, "schemes: {}", Scheme::ALL.map(Scheme::as_str).join(", "))?;
    writeln!(out, "formulations: {}", Formulation::ALL.map(Formulation::as_str).join(", "))?;
    writeln!(out, "primal optimizers: {}", PRIMAL_OPTIMIZERS.join(", "))?;
    writeln!(out, "dual optimizers: {}", DUAL_OPTIMIZERS.join(", "))?;
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, out, err).map(|()| 0),
        Command::CheckGrad(args) => cmd_check_grad(args, out),
        Command::List => cmd_list(out).map(|()| 0).map_err(CliError::from),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}
