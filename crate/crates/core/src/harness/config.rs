//! Run configuration and the command-line spellings of schedules and step
//! rules.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::certificates::{Check, RunMeta, BOUND_TOL};
use crate::error::{Error, Result};
use crate::problems::ProblemInstance;
use crate::schedules::{StepRule, ThetaKind};
use crate::solver::{Algorithm, SubgradSteps};
use crate::vecspace::Tolerance;

/// Environment variable overriding the seed of generated instances.
pub const SEED_ENV: &str = "PROXCERT_SEED";

/// Reads [`SEED_ENV`]; unset or empty means no override.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) if s.trim().is_empty() => Ok(None),
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prox_grad" => Ok(Algorithm::ProxGrad),
            "accel_prox_grad" => Ok(Algorithm::AccelProxGrad),
            "prox_subgrad" => Ok(Algorithm::ProxSubgrad),
            "proj_subgrad" => Ok(Algorithm::ProjSubgrad),
            _ => Err(Error::invalid(format!(
                "unknown algorithm `{s}` (expected prox_grad, accel_prox_grad, prox_subgrad or proj_subgrad)"
            ))),
        }
    }
}

/// `constant_one`, `fista`, `two_over_kplus2` or `custom:1,0.5,...`.
pub fn parse_theta(s: &str) -> Result<ThetaKind> {
    match s {
        "constant_one" | "one" => Ok(ThetaKind::ConstantOne),
        "fista" => Ok(ThetaKind::FistaRecurrence),
        "two_over_kplus2" => Ok(ThetaKind::TwoOverKPlus2),
        _ => match s.strip_prefix("custom:") {
            Some(list) => list
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad θ value `{v}`"))))
                .collect::<Result<Vec<_>>>()
                .map(ThetaKind::Custom),
            None => Err(Error::invalid(format!(
                "unknown θ schedule `{s}` (expected constant_one, fista, two_over_kplus2 or custom:...)"
            ))),
        },
    }
}

/// A step length, either absolute or a multiple of `1/L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepLength {
    Value(f64),
    OverL(f64),
}

impl StepLength {
    pub fn resolve(self, lipschitz: Option<f64>) -> Result<f64> {
        match self {
            StepLength::Value(t) => Ok(t),
            StepLength::OverL(c) => lipschitz
                .map(|l| c / l)
                .ok_or_else(|| Error::invalid("step given relative to L but the instance has no Lipschitz constant")),
        }
    }
}

impl FromStr for StepLength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(StepLength::OverL(1.0));
        }
        let (num, over_l) = match s.strip_suffix("/L") {
            Some(n) => (n, true),
            None => (s, false),
        };
        let v: f64 = num
            .parse()
            .map_err(|_| Error::invalid(format!("bad step length `{s}` (expected a number, `auto` or `c/L`)")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("step length must be positive, got `{s}`")));
        }
        Ok(if over_l { StepLength::OverL(v) } else { StepLength::Value(v) })
    }
}

impl fmt::Display for StepLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepLength::Value(t) => write!(f, "{t}"),
            StepLength::OverL(c) if *c == 1.0 => f.write_str("auto"),
            StepLength::OverL(c) => write!(f, "{c}/L"),
        }
    }
}

/// Step rule as written on the command line.
///
/// Proximal gradient: `fixed:<len>`, `backtrack:<len>:<shrink>[:monotone]`.
/// Subgradient: `const:<t>`, `sqrt:<c>` for `t_i = c/√(i+1)`, and
/// `normalized:<c>` for step lengths `α_i = c/√(i+1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum StepSpec {
    Fixed(StepLength),
    Backtrack {
        t_init: StepLength,
        shrink: f64,
        monotone: bool,
    },
    Constant(f64),
    InverseSqrt(f64),
    NormalizedInverseSqrt(f64),
}

impl StepSpec {
    pub fn is_subgradient(&self) -> bool {
        matches!(
            self,
            StepSpec::Constant(_) | StepSpec::InverseSqrt(_) | StepSpec::NormalizedInverseSqrt(_)
        )
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, StepSpec::Fixed(_) | StepSpec::Constant(_))
    }

    pub fn is_non_increasing(&self) -> bool {
        !matches!(self, StepSpec::Backtrack { monotone: false, .. })
    }

    /// Step rule for a proximal gradient run.
    pub fn step_rule(&self, lipschitz: Option<f64>) -> Result<StepRule> {
        match *self {
            StepSpec::Fixed(len) => StepRule::fixed(len.resolve(lipschitz)?),
            StepSpec::Backtrack {
                t_init,
                shrink,
                monotone,
            } => StepRule::backtracking(t_init.resolve(lipschitz)?, shrink, monotone),
            _ => Err(Error::invalid(format!("`{self}` is a subgradient step rule"))),
        }
    }

    /// Step sequence of length `n` for a subgradient run.
    pub fn subgrad_steps(&self, n: usize) -> Result<SubgradSteps> {
        let sqrt = |c: f64| (0..n).map(|i| c / ((i + 1) as f64).sqrt()).collect();
        match *self {
            StepSpec::Constant(t) => Ok(SubgradSteps::constant(t, n)),
            StepSpec::InverseSqrt(c) => Ok(SubgradSteps::inverse_sqrt(c, n)),
            StepSpec::NormalizedInverseSqrt(c) => Ok(SubgradSteps::Normalized(sqrt(c))),
            _ => Err(Error::invalid(format!("`{self}` is a proximal gradient step rule"))),
        }
    }
}

fn positive(name: &str, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(Error::invalid(format!("{name} must be a positive number, got `{s}`"))),
    }
}

impl FromStr for StepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["fixed", len] => Ok(StepSpec::Fixed(len.parse()?)),
            ["backtrack", len, shrink, rest @ ..] => {
                let monotone = match rest {
                    [] => false,
                    ["monotone"] => true,
                    _ => return Err(Error::invalid(format!("bad backtracking rule `{s}`"))),
                };
                let shrink = positive("shrink factor", shrink)?;
                if shrink >= 1.0 {
                    return Err(Error::invalid(format!("shrink factor must be below 1, got {shrink}")));
                }
                Ok(StepSpec::Backtrack {
                    t_init: len.parse()?,
                    shrink,
                    monotone,
                })
            }
            ["const", t] => Ok(StepSpec::Constant(positive("step", t)?)),
            ["sqrt", c] => Ok(StepSpec::InverseSqrt(positive("step scale", c)?)),
            ["normalized", c] => Ok(StepSpec::NormalizedInverseSqrt(positive("step scale", c)?)),
            _ => Err(Error::invalid(format!(
                "unknown step rule `{s}` (expected fixed:, backtrack:, const:, sqrt: or normalized:)"
            ))),
        }
    }
}

impl fmt::Display for StepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSpec::Fixed(len) => write!(f, "fixed:{len}"),
            StepSpec::Backtrack {
                t_init,
                shrink,
                monotone,
            } => write!(f, "backtrack:{t_init}:{shrink}{}", if *monotone { ":monotone" } else { "" }),
            StepSpec::Constant(t) => write!(f, "const:{t}"),
            StepSpec::InverseSqrt(c) => write!(f, "sqrt:{c}"),
            StepSpec::NormalizedInverseSqrt(c) => write!(f, "normalized:{c}"),
        }
    }
}

impl From<StepSpec> for String {
    fn from(s: StepSpec) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for StepSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Comma-separated check families, e.g. `thm1,rates`.
pub fn parse_checks(s: &str) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let c: Check = part.parse()?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("empty check list"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Built-in name or path to a problem JSON file.
    pub problem: String,
    pub seed: Option<u64>,
    pub algorithm: Algorithm,
    /// `None` picks `constant_one` for non-accelerated runs and `fista`
    /// otherwise.
    pub theta: Option<ThetaKind>,
    pub step: StepSpec,
    pub iterations: usize,
    pub trace_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    /// `None` runs every family whose requirements the configuration meets.
    pub checks: Option<Vec<Check>>,
    pub tol: Tolerance,
}

impl RunConfig {
    pub fn new(problem: impl Into<String>, algorithm: Algorithm, step: StepSpec, iterations: usize) -> Self {
        RunConfig {
            problem: problem.into(),
            seed: None,
            algorithm,
            theta: None,
            step,
            iterations,
            trace_out: None,
            report_out: None,
            checks: None,
            tol: BOUND_TOL,
        }
    }

    pub fn with_theta(mut self, theta: ThetaKind) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_checks(mut self, checks: Vec<Check>) -> Self {
        self.checks = Some(checks);
        self
    }

    pub fn theta_kind(&self) -> ThetaKind {
        self.theta.clone().unwrap_or(match self.algorithm {
            Algorithm::AccelProxGrad => ThetaKind::FistaRecurrence,
            _ => ThetaKind::ConstantOne,
        })
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta {
            algorithm: self.algorithm,
            theta: self.theta_kind(),
        }
    }

    /// Checks to run: the requested ones, or every family the configuration
    /// supports.
    pub fn resolved_checks(&self) -> Vec<Check> {
        match &self.checks {
            Some(c) => c.clone(),
            None => Check::ALL
                .into_iter()
                .filter(|c| c.requirement(&self.meta(), self.step.is_non_increasing(), self.step.is_fixed()).is_ok())
                .collect(),
        }
    }

    /// Everything that can be checked before the instance is loaded.
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iteration count must be at least 1"));
        }
        if !(self.tol.abs >= 0.0 && self.tol.rel >= 0.0) {
            return Err(Error::invalid("tolerances must be nonnegative"));
        }
        let theta = self.theta_kind();
        let sub = self.algorithm.is_subgradient();
        match self.algorithm {
            Algorithm::ProxGrad if theta != ThetaKind::ConstantOne => {
                return Err(Error::invalid(format!("prox_grad uses θ ≡ 1, got `{theta}`")));
            }
            Algorithm::AccelProxGrad if theta == ThetaKind::ConstantOne => {
                return Err(Error::invalid("accel_prox_grad needs a schedule with θ_k < 1"));
            }
            _ if sub && theta != ThetaKind::ConstantOne => {
                return Err(Error::invalid(format!("{} takes no θ schedule", self.algorithm)));
            }
            _ => {}
        }
        if sub != self.step.is_subgradient() {
            return Err(Error::invalid(format!(
                "step rule `{}` does not apply to {}",
                self.step, self.algorithm
            )));
        }
        if let ThetaKind::Custom(list) = &theta {
            if list.len() <= self.iterations {
                return Err(Error::invalid(format!(
                    "custom θ schedule needs {} entries for {} iterations, got {}",
                    self.iterations + 1,
                    self.iterations,
                    list.len()
                )));
            }
        }
        let meta = self.meta();
        for check in self.checks.iter().flatten() {
            check.requirement(&meta, self.step.is_non_increasing(), self.step.is_fixed())?;
        }
        Ok(())
    }

    /// Checks that need the instance: smoothness, indicator `ψ`, and `L` for
    /// relative step lengths.
    pub fn validate_for(&self, inst: &ProblemInstance) -> Result<()> {
        if !self.algorithm.is_subgradient() && !inst.smooth {
            return Err(Error::invalid(format!(
                "{} needs a smooth φ; `{}` is nonsmooth",
                self.algorithm,
                inst.name()
            )));
        }
        if self.algorithm == Algorithm::ProjSubgrad && !inst.psi_indicator {
            return Err(Error::invalid(format!(
                "proj_subgrad needs ψ to be an indicator; `{}` is not constrained",
                inst.name()
            )));
        }
        if !self.algorithm.is_subgradient() {
            self.step.step_rule(inst.lipschitz)?;
        }
        Ok(())
    }
}
