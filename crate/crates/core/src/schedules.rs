//! Momentum schedules `θ_k` and step-size rules `t_k`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecspace::{ProxOracle, SmoothOracle, Vector};

/// Residual tolerance for `θ_{k+1}² ≥ θ_k²(1 − θ_{k+1})`.
pub const THETA_PAIR_TOL: f64 = 1e-12;

/// Relative slack of the decrease-condition test.
pub const DECREASE_TOL: f64 = 1e-12;

/// Positive root of `θ² + θ_k²θ − θ_k² = 0`.
///
/// Written as `2θ_k / (√(θ_k² + 4) + θ_k)` to avoid cancellation for small `θ_k`.
pub fn next_theta_fista(theta: f64) -> f64 {
    debug_assert!(theta > 0.0 && theta <= 1.0);
    2.0 * theta / ((theta * theta + 4.0).sqrt() + theta)
}

/// `2 / (k + 2)`
pub fn theta_two_over(k: usize) -> f64 {
    2.0 / (k as f64 + 2.0)
}

/// Accelerated-schedule condition `θ_{k+1}² ≥ θ_k²(1 − θ_{k+1})` with a
/// `1e−12` allowance.
pub fn validate_theta_pair(theta: f64, theta_next: f64) -> bool {
    theta_next * theta_next >= theta * theta * (1.0 - theta_next) - THETA_PAIR_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaKind {
    ConstantOne,
    FistaRecurrence,
    TwoOverKPlus2,
    Custom(Vec<f64>),
}

impl fmt::Display for ThetaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaKind::ConstantOne => f.write_str("constant_one"),
            ThetaKind::FistaRecurrence => f.write_str("fista"),
            ThetaKind::TwoOverKPlus2 => f.write_str("two_over_kplus2"),
            ThetaKind::Custom(v) => write!(f, "custom({})", v.len()),
        }
    }
}

/// Stateful `θ_0, θ_1, …` generator. `θ_0 = 1` always.
#[derive(Clone, Debug)]
pub struct ThetaSchedule {
    kind: ThetaKind,
    k: usize,
    current: f64,
}

impl ThetaSchedule {
    pub fn new(kind: ThetaKind) -> Result<Self> {
        if let ThetaKind::Custom(list) = &kind {
            match list.first() {
                Some(&first) if first == 1.0 => {}
                _ => return Err(Error::invalid("custom θ schedule must start with θ_0 = 1")),
            }
            if let Some((i, th)) = list.iter().enumerate().find(|(_, &th)| !(th > 0.0 && th <= 1.0)) {
                return Err(Error::invalid(format!("custom θ_{i} = {th} is outside (0, 1]")));
            }
        }
        Ok(ThetaSchedule {
            kind,
            k: 0,
            current: 1.0,
        })
    }

    pub fn kind(&self) -> &ThetaKind {
        &self.kind
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    /// Moves to `θ_{k+1}` and returns it.
    pub fn advance(&mut self) -> Result<f64> {
        let next = match &self.kind {
            ThetaKind::ConstantOne => 1.0,
            ThetaKind::FistaRecurrence => next_theta_fista(self.current),
            ThetaKind::TwoOverKPlus2 => theta_two_over(self.k + 1),
            ThetaKind::Custom(list) => *list.get(self.k + 1).ok_or_else(|| {
                Error::invalid(format!("custom θ schedule exhausted after {} entries", list.len()))
            })?,
        };
        self.k += 1;
        self.current = next;
        Ok(next)
    }

    /// `θ_0, …, θ_{n−1}`
    pub fn take(kind: ThetaKind, n: usize) -> Result<Vec<f64>> {
        let mut s = ThetaSchedule::new(kind)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 {
                s.advance()?;
            }
            out.push(s.current());
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    Fixed {
        t: f64,
    },
    Backtracking {
        t_init: f64,
        shrink: f64,
        monotone: bool,
        max_shrinks: usize,
    },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Backtracking {
            t_init: 1.0,
            shrink: 0.5,
            monotone: true,
            max_shrinks: 100,
        }
    }
}

impl StepRule {
    pub fn fixed(t: f64) -> Result<Self> {
        let rule = StepRule::Fixed { t };
        rule.validate()?;
        Ok(rule)
    }

    pub fn backtracking(t_init: f64, shrink: f64, monotone: bool) -> Result<Self> {
        let rule = StepRule::Backtracking {
            t_init,
            shrink,
            monotone,
            max_shrinks: 100,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepRule::Fixed { t } if !(t > 0.0 && t.is_finite()) => {
                Err(Error::invalid(format!("step size must be positive, got {t}")))
            }
            StepRule::Backtracking { t_init, shrink, .. }
                if !(t_init > 0.0 && t_init.is_finite() && shrink > 0.0 && shrink < 1.0) =>
            {
                Err(Error::invalid(format!(
                    "backtracking needs t_init > 0 and shrink in (0, 1), got {t_init}, {shrink}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Steps never increase along a run.
    pub fn is_non_increasing(&self) -> bool {
        match self {
            StepRule::Fixed { .. } => true,
            StepRule::Backtracking { monotone, .. } => *monotone,
        }
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepRule::Fixed { t } => write!(f, "fixed:{t}"),
            StepRule::Backtracking {
                t_init,
                shrink,
                monotone,
                ..
            } => write!(
                f,
                "backtrack:{t_init}:{shrink}{}",
                if *monotone { ":monotone" } else { "" }
            ),
        }
    }
}

/// `rhs − lhs` of the decrease condition at the prox point `x_next`:
/// `φ(y) + ⟨∇φ(y), x⁺ − y⟩ + ‖x⁺ − y‖²/(2t) − φ(x⁺)`. The `ψ(x⁺)` terms cancel.
pub fn decrease_margin(phi: &dyn SmoothOracle, y: &Vector, grad_y: &Vector, x_next: &Vector, t: f64) -> (f64, f64) {
    let d = x_next - y;
    let model = phi.value(y) + grad_y.dot(&d) + d.norm_sq() / (2.0 * t);
    (model - phi.value(x_next), model)
}

fn margin_ok(margin: f64, model: f64) -> bool {
    margin >= -DECREASE_TOL * (1.0 + model.abs())
}

/// Decrease condition: `f(x⁺)` lies below the quadratic model's minimum.
/// Since `x⁺` minimizes the model, evaluating the model at `x⁺` suffices.
pub fn decrease_holds(
    phi: &dyn SmoothOracle,
    psi: &dyn ProxOracle,
    y: &Vector,
    x_next: &Vector,
    t: f64,
) -> bool {
    if !psi.value(x_next).is_finite() {
        return false;
    }
    let (margin, model) = decrease_margin(phi, y, &phi.gradient(y), x_next, t);
    margin_ok(margin, model)
}

#[derive(Clone, Debug)]
pub struct BacktrackOutcome {
    pub t: f64,
    pub x_next: Vector,
    pub shrinks: usize,
}

/// Shrinks `t` from its start value until the decrease condition accepts
/// `Prox_t(y − t∇φ(y))`. Without a previous step (`k = 0`) or in
/// non-monotone mode the search starts from `t_init`; monotone mode starts
/// from `t_prev`.
pub fn backtrack(
    phi: &dyn SmoothOracle,
    psi: &dyn ProxOracle,
    y: &Vector,
    rule: &StepRule,
    t_prev: Option<f64>,
) -> Result<BacktrackOutcome> {
    let grad = phi.gradient(y);
    backtrack_with_gradient(phi, psi, y, &grad, rule, t_prev, 0)
}

pub(crate) fn backtrack_with_gradient(
    phi: &dyn SmoothOracle,
    psi: &dyn ProxOracle,
    y: &Vector,
    grad: &Vector,
    rule: &StepRule,
    t_prev: Option<f64>,
    k: usize,
) -> Result<BacktrackOutcome> {
    let StepRule::Backtracking {
        t_init,
        shrink,
        monotone,
        max_shrinks,
    } = *rule
    else {
        return Err(Error::invalid("backtrack called with a fixed step rule"));
    };
    let mut t = match (monotone, t_prev) {
        (true, Some(tp)) => tp,
        _ => t_init,
    };
    for shrinks in 0..=max_shrinks {
        let x_next = psi.prox(t, &y.axpy(-t, grad));
        let (margin, model) = decrease_margin(phi, y, grad, &x_next, t);
        if margin_ok(margin, model) && psi.value(&x_next).is_finite() {
            return Ok(BacktrackOutcome { t, x_next, shrinks });
        }
        if shrinks < max_shrinks {
            t *= shrink;
        }
    }
    Err(Error::BacktrackingFailed {
        k,
        shrinks: max_shrinks,
        t,
    })
}
