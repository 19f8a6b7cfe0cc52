//! Single runs: execute a configuration, certify the trace, evaluate the
//! requested checks and write the trace CSV and report JSON.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificates::{
    anchor_check, certify, evaluate_checks, fit_tail_slope, BoundReport, CertContext, CertMode, Certificate, Check,
    CheckResult, Hypothesis, RateFit, RunMeta, TraceRow,
};
use crate::error::{Error, Result};
use crate::problems::{load_problem, Estimate, ProblemInstance};
use crate::schedules::validate_theta_pair;
use crate::solver::{run_algorithm1, run_algorithm2, Trace};

use super::config::{seed_from_env, RunConfig};
use super::trace_csv::{write_atomic, write_trace};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    ConfigError = 1,
    CheckFailure = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub label: String,
    pub dim: usize,
    pub lipschitz: Option<f64>,
    pub f_bar: Estimate,
    pub dist: Estimate,
    pub fstar: String,
}

impl InstanceSummary {
    fn of(inst: &ProblemInstance) -> Self {
        InstanceSummary {
            label: inst.label(),
            dim: inst.dim(),
            lipschitz: inst.lipschitz,
            f_bar: inst.f_bar,
            dist: inst.dist_x0,
            fstar: inst.fstar_strategy.to_string(),
        }
    }
}

/// The report JSON written next to a trace. It carries everything needed to
/// re-evaluate the checks from the trace CSV alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub instance: InstanceSummary,
    pub meta: RunMeta,
    pub context: CertContext,
    pub mode: CertMode,
    pub tags: Vec<Hypothesis>,
    pub checks: Vec<CheckResult>,
    /// Requested families whose conditions the finished run does not meet.
    pub unmet: Vec<String>,
    pub satisfied: bool,
    pub rate_fit: Option<RateFit>,
    pub early_optimal: bool,
}

impl RunReport {
    pub fn bound_report(&self) -> BoundReport {
        BoundReport {
            tags: self.tags.clone(),
            checks: self.checks.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One-line description of the first failure.
    pub fn failure_message(&self) -> Option<String> {
        if let Some(u) = self.unmet.first() {
            return Some(u.clone());
        }
        self.checks.iter().find(|c| !c.satisfied).map(|c| c.to_string())
    }
}

pub struct RunOutput {
    pub instance: ProblemInstance,
    pub trace: Trace,
    pub certificate: Certificate,
    pub report: RunReport,
}

impl RunOutput {
    pub fn rows(&self) -> &[TraceRow] {
        &self.certificate.rows
    }
}

/// Why the second theorem's conditions fail on `trace`, naming the first
/// offending step.
pub fn diagnose_thm2(trace: &Trace) -> Option<String> {
    let recs = &trace.records;
    for (i, r) in recs.iter().enumerate() {
        if !r.decrease_ok {
            return Some(format!("decrease condition fails at k = {}", r.k));
        }
        if let Some(next) = recs.get(i + 1) {
            if !validate_theta_pair(r.theta, next.theta) {
                return Some(format!(
                    "validate_theta_pair rejects (θ_{}, θ_{}) = ({}, {})",
                    r.k, next.k, r.theta, next.theta
                ));
            }
            if next.t > r.t {
                return Some(format!("step increases at k = {} ({} > {})", next.k, next.t, r.t));
            }
            if next.theta >= 1.0 {
                return Some(format!("θ_{} = 1 after the first step", next.k));
            }
        }
    }
    None
}

fn unmet_message(check: Check, err: Error, trace: &Trace) -> String {
    let detail = match check {
        Check::Thm2 => diagnose_thm2(trace),
        _ => None,
    };
    match detail {
        Some(d) => format!("{check}: {err}; {d}"),
        None => format!("{check}: {err}"),
    }
}

/// Evaluates `checks` over `rows`. Families whose conditions the run does not
/// meet are returned separately instead of aborting.
pub fn evaluate_families(
    rows: &[TraceRow],
    tags: &[Hypothesis],
    meta: &RunMeta,
    ctx: &CertContext,
    checks: &[Check],
) -> (Vec<CheckResult>, Vec<(Check, Error)>) {
    let mut results = Vec::new();
    let mut unmet = Vec::new();
    for &c in checks {
        match evaluate_checks(rows, tags, meta, ctx, &[c]) {
            Ok(r) => results.extend(r),
            Err(e) => unmet.push((c, e)),
        }
    }
    (results, unmet)
}

fn load_instance(config: &RunConfig) -> Result<ProblemInstance> {
    let seed = match config.seed {
        Some(s) => Some(s),
        None => seed_from_env()?,
    };
    load_problem(&config.problem, seed)
}

/// Runs the configured algorithm on a loaded instance.
pub fn run_trace(config: &RunConfig, inst: &ProblemInstance) -> Result<Trace> {
    config.validate()?;
    config.validate_for(inst)?;
    let obj = &inst.objective;
    if config.algorithm.is_subgradient() {
        let steps = config.step.subgrad_steps(config.iterations)?;
        let trace = run_algorithm2(obj, &inst.subgradient(), &inst.x0, &steps, config.iterations)?;
        Ok(trace.with_algorithm(config.algorithm))
    } else {
        let rule = config.step.step_rule(inst.lipschitz)?;
        run_algorithm1(obj, config.theta_kind(), &rule, &inst.x0, config.iterations)
    }
}

/// Certificate context for an instance: `f̄`, `dist` and, for nonsmooth `φ`,
/// its Lipschitz constant.
pub fn context_for(inst: &ProblemInstance, config: &RunConfig) -> CertContext {
    CertContext::new(inst.f_bar.value, inst.dist_x0.value)
        .with_lipschitz(if inst.smooth { None } else { inst.lipschitz })
        .with_tolerance(config.tol)
}

/// Executes `config` without writing files. Errors are configuration or
/// runtime errors; check outcomes are in the report.
pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let inst = load_instance(config)?;
    execute_on(config, inst)
}

/// [`execute`] on an already loaded instance.
pub fn execute_on(config: &RunConfig, inst: ProblemInstance) -> Result<RunOutput> {
    let trace = run_trace(config, &inst)?;
    let ctx = context_for(&inst, config);
    let requested = config.checks.is_some();
    let checks = config.resolved_checks();
    // Only the theorem families read `rhs_conj`; without them the column is
    // left NaN and the (possibly costly) conjugate is never evaluated.
    let cert = if checks.iter().any(|c| matches!(c, Check::Thm1 | Check::Thm2 | Check::Prop1)) {
        certify(&trace, &inst.objective, inst.psi_indicator, &ctx)?
    } else {
        let plain = inst.objective.clone().without_f_conjugate();
        certify(&trace, &plain, inst.psi_indicator, &ctx)?
    };
    let meta = config.meta();

    let (mut results, unmet) = evaluate_families(&cert.rows, &cert.tags, &meta, &ctx, &checks);
    if checks.contains(&Check::Anchors) && !trace.algorithm.is_subgradient() {
        results.push(anchor_check(&trace));
    }
    // Families picked by default are dropped quietly when the run does not
    // meet their conditions; requested ones count as failures.
    let unmet: Vec<String> = if requested {
        unmet.into_iter().map(|(c, e)| unmet_message(c, e, &trace)).collect()
    } else {
        Vec::new()
    };
    let satisfied = unmet.is_empty() && results.iter().all(|c| c.satisfied);
    let rate_fit = if trace.algorithm.is_subgradient() {
        None
    } else {
        fit_tail_slope(&cert.rows, ctx.f_bar)
    };
    let report = RunReport {
        config: config.clone(),
        instance: InstanceSummary::of(&inst),
        meta,
        context: ctx,
        mode: cert.mode,
        tags: cert.tags.clone(),
        checks: results,
        unmet,
        satisfied,
        rate_fit,
        early_optimal: trace.early_optimal,
    };
    Ok(RunOutput {
        instance: inst,
        trace,
        certificate: cert,
        report,
    })
}

/// Re-evaluates a report's checks from trace rows. The anchor identity needs
/// the full iterates and is carried over from the report unchanged.
pub fn recheck(rows: &[TraceRow], report: &RunReport) -> BoundReport {
    let checks: Vec<Check> = report.config.resolved_checks();
    let (mut results, _) = evaluate_families(rows, &report.tags, &report.meta, &report.context, &checks);
    results.extend(report.checks.iter().filter(|c| c.name.starts_with("anchors.")).cloned());
    BoundReport {
        tags: report.tags.clone(),
        checks: results,
    }
}

pub fn write_outputs(out: &RunOutput, trace_path: Option<&Path>, report_path: Option<&Path>) -> Result<()> {
    if let Some(p) = trace_path {
        write_trace(p, out.rows())?;
    }
    if let Some(p) = report_path {
        write_atomic(p, out.report.to_json()?.as_bytes())?;
    }
    Ok(())
}

/// Runs, writes outputs, prints a summary to `log` and returns the exit status.
pub fn cmd_run(config: &RunConfig, log: &mut dyn Write) -> ExitStatus {
    let out = match execute(config) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            return ExitStatus::ConfigError;
        }
    };
    if let Err(e) = write_outputs(&out, config.trace_out.as_deref(), config.report_out.as_deref()) {
        let _ = writeln!(log, "error: {e}");
        return ExitStatus::ConfigError;
    }
    let r = &out.report;
    let _ = writeln!(
        log,
        "{} on {}: {} iterations, f = {:.12e}, f̄ = {:.12e}",
        config.algorithm,
        r.instance.label,
        out.trace.len(),
        out.rows().last().map_or(f64::NAN, |row| row.f_x),
        r.context.f_bar
    );
    let tags: Vec<String> = r.tags.iter().map(|t| t.to_string()).collect();
    let _ = writeln!(log, "hypotheses: {}", if tags.is_empty() { "none".into() } else { tags.join(", ") });
    for c in &r.checks {
        let _ = writeln!(log, "  {c}");
    }
    for u in &r.unmet {
        let _ = writeln!(log, "  unmet: {u}");
    }
    if let Some(fit) = &r.rate_fit {
        let _ = writeln!(log, "tail slope {:.3} over k = {}..{}", fit.slope, fit.k_from, fit.k_to);
    }
    if r.satisfied {
        ExitStatus::Pass
    } else {
        let _ = writeln!(log, "FAILED: {}", r.failure_message().unwrap_or_default());
        ExitStatus::CheckFailure
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trace_csv::read_trace;
    use crate::schedules::{next_theta_fista, ThetaKind};
    use crate::solver::Algorithm;

    fn cfg(problem: &str, alg: Algorithm, step: &str, k: usize) -> RunConfig {
        RunConfig::new(problem, alg, step.parse().unwrap(), k)
    }

    #[test]
    fn accelerated_lasso_passes_requested_checks() {
        let c = cfg("lasso-2", Algorithm::AccelProxGrad, "fixed:auto", 200).with_checks(vec![Check::Thm1, Check::Rates]);
        let out = execute(&c).unwrap();
        assert!(out.report.satisfied, "{:?}", out.report.failure_message());
        assert!(out.report.checks.iter().any(|c| c.name == "rates.accel"));
    }

    #[test]
    fn csv_and_json_round_trip_reproduce_the_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg("box-qp-2", Algorithm::AccelProxGrad, "backtrack:10/L:0.5:monotone", 120);
        c.trace_out = Some(dir.path().join("t.csv"));
        c.report_out = Some(dir.path().join("r.json"));
        let mut log = Vec::new();
        assert_eq!(cmd_run(&c, &mut log), ExitStatus::Pass, "{}", String::from_utf8_lossy(&log));

        let rows = read_trace(c.trace_out.as_ref().unwrap()).unwrap();
        let report = RunReport::from_json(&std::fs::read_to_string(c.report_out.as_ref().unwrap()).unwrap()).unwrap();
        let again = recheck(&rows, &report);
        let orig = report.bound_report();
        assert_eq!(again.checks.len(), orig.checks.len());
        for (a, b) in again.checks.iter().zip(&orig.checks) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.worst_k, b.worst_k);
            assert_eq!(a.satisfied, b.satisfied);
            assert_eq!(a.worst_slack.map(f64::to_bits), b.worst_slack.map(f64::to_bits), "{}", a.name);
        }
    }

    #[test]
    fn invalid_configs_exit_one() {
        let mut log = Vec::new();
        assert_eq!(cmd_run(&cfg("ls-2", Algorithm::ProxGrad, "fixed:auto", 0), &mut log), ExitStatus::ConfigError);
        let c = cfg("ls-2", Algorithm::AccelProxGrad, "backtrack:1:0.5", 10).with_checks(vec![Check::Thm2]);
        assert_eq!(cmd_run(&c, &mut log), ExitStatus::ConfigError);
        assert!(String::from_utf8_lossy(&log).contains("hypothesis violated"));
        let c = cfg("no-such-problem", Algorithm::ProxGrad, "fixed:auto", 10);
        assert_eq!(cmd_run(&c, &mut log), ExitStatus::ConfigError);
        let c = cfg("l1reg-2", Algorithm::ProxGrad, "fixed:auto", 10);
        assert_eq!(cmd_run(&c, &mut log), ExitStatus::ConfigError);
        let c = cfg("ls-2", Algorithm::ProjSubgrad, "sqrt:0.1", 10);
        assert_eq!(cmd_run(&c, &mut log), ExitStatus::ConfigError);
    }

    #[test]
    fn corrupted_theta_fails_naming_the_pair_check() {
        let k = 60;
        let mut theta = vec![1.0];
        for _ in 0..k {
            let next = next_theta_fista(*theta.last().unwrap());
            theta.push(next);
        }
        theta[30] /= 4.0;
        let c = cfg("lasso-2", Algorithm::AccelProxGrad, "fixed:auto", k)
            .with_theta(ThetaKind::Custom(theta))
            .with_checks(vec![Check::Thm2]);
        let mut log = Vec::new();
        assert_eq!(cmd_run(&c, &mut log), ExitStatus::CheckFailure);
        let text = String::from_utf8_lossy(&log);
        assert!(text.contains("validate_theta_pair"), "{text}");
    }

    #[test]
    fn subgradient_run_checks_prop1_and_rates() {
        let c = cfg("l1reg-2", Algorithm::ProjSubgrad, "normalized:0.5", 300);
        let out = execute(&c).unwrap();
        assert!(out.report.satisfied, "{:?}", out.report.failure_message());
        assert!(out.report.checks.iter().any(|c| c.name == "prop1.lhs_le_conj"));
        assert!(out.report.checks.iter().any(|c| c.name == "rates.subgrad_normalized"));
        assert!(out.report.rate_fit.is_none());
    }
}
