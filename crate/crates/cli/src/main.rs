//! `proxcert`: run algorithms on built-in or file problems, write traces and
//! reports, print rate tables and run the acceptance matrix.
//!
//! Exit codes: 0 pass, 1 usage or configuration error, 2 verification failure.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use proxcert::harness::{
    cmd_rates, cmd_run, cmd_verify_all, parse_checks, parse_theta, seed_from_env, ExitStatus, Fault, RunConfig,
    StepSpec, VerifyOptions,
};
use proxcert::solver::Algorithm;
use proxcert::Tolerance;

#[derive(Parser)]
#[command(name = "proxcert", version, about = "Proximal gradient runs with convergence certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm, write the trace and report, check the bounds.
    Run(RunArgs),
    /// Gap-versus-bound table for one or more algorithms.
    Rates(RatesArgs),
    /// Run the acceptance matrix.
    VerifyAll(VerifyArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Built-in problem name or path to a problem JSON file.
    #[arg(long)]
    problem: String,
    /// Generator seed (defaults to PROXCERT_SEED, then the instance default).
    #[arg(long)]
    seed: Option<u64>,
    /// θ schedule: constant_one, fista, two_over_kplus2 or custom:1,....
    #[arg(long)]
    theta: Option<String>,
    /// Step rule, e.g. fixed:auto, backtrack:10/L:0.5:monotone, sqrt:0.1.
    #[arg(long)]
    step: Option<String>,
    #[arg(long = "iters", default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol_abs: f64,
    #[arg(long, default_value_t = 1e-7)]
    tol_rel: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "prox_grad")]
    algorithm: String,
    /// Comma-separated subset of thm1, thm2, prop1, rates, anchors.
    #[arg(long)]
    check: Option<String>,
    /// Trace CSV output path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Report JSON output path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated algorithms to sweep.
    #[arg(long, default_value = "prox_grad,accel_prox_grad")]
    algorithm: String,
    /// Table CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Print a JSON summary instead of one line per criterion.
    #[arg(long)]
    json: bool,
    /// Comma-separated criterion numbers to run.
    #[arg(long)]
    only: Option<String>,
    /// Directory for one JSON file per criterion.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Inject a fault to exercise the failure path.
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn default_step(algorithm: Algorithm) -> &'static str {
    if algorithm.is_subgradient() {
        "normalized:0.1"
    } else {
        "fixed:auto"
    }
}

fn base_config(p: &ProblemArgs, algorithm: Algorithm) -> Result<RunConfig> {
    let step: StepSpec = p.step.as_deref().unwrap_or(default_step(algorithm)).parse()?;
    let mut cfg = RunConfig::new(p.problem.clone(), algorithm, step, p.iterations);
    cfg.seed = p.seed;
    if let Some(t) = &p.theta {
        cfg.theta = Some(parse_theta(t)?);
    }
    cfg.tol = Tolerance::new(p.tol_abs, p.tol_rel);
    Ok(cfg)
}

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&a.problem, a.algorithm.parse()?)?;
    if let Some(c) = &a.check {
        cfg.checks = Some(parse_checks(c)?);
    }
    cfg.trace_out = a.trace.clone();
    cfg.report_out = a.report.clone();
    Ok(cfg)
}

fn rates_configs(a: &RatesArgs) -> Result<Vec<RunConfig>> {
    a.algorithm
        .split(',')
        .map(|s| base_config(&a.problem, s.trim().parse()?))
        .collect()
}

fn verify_options(a: &VerifyArgs) -> Result<VerifyOptions> {
    let mut opts = VerifyOptions::from_env()?;
    opts.out_dir = a.out_dir.clone();
    if let Some(list) = &a.only {
        let ids = list
            .split(',')
            .map(|s| s.trim().parse::<u8>().with_context(|| format!("bad criterion number `{s}`")))
            .collect::<Result<Vec<_>>>()?;
        opts.only = Some(ids);
    }
    opts.fault = match a.inject_fault.as_deref() {
        None => None,
        Some("corrupt-theta") => Some(Fault::CorruptTheta),
        Some(other) => bail!("unknown fault `{other}`"),
    };
    Ok(opts)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<ExitStatus> {
    Ok(match cli.command {
        Command::Run(a) => cmd_run(&run_config(&a)?, out),
        Command::Rates(a) => cmd_rates(&rates_configs(&a)?, a.out.as_deref(), out),
        Command::VerifyAll(a) => cmd_verify_all(&verify_options(&a)?, a.json, out),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    // Reject a malformed seed override before doing any work.
    if let Err(e) = seed_from_env() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli, &mut out) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
