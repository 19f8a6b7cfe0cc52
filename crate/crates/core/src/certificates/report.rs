//! Per-iterate certificate rows and the checks evaluated over them.
//!
//! Row `k` carries the data of iteration `k` (`t_k`, `θ_k`, `f(y_k)`, the
//! norms of `g_k` and its split) together with the bound evaluated right
//! after that iteration: `x_{k+1}` and index `k + 1` of the proximal gradient
//! certificates, or index `k` of the subgradient certificate, whose sums run
//! over `i ≤ k`. Every check reads only the rows and a [`CertContext`], so a
//! trace reloaded from CSV reproduces the report exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedules::{validate_theta_pair, ThetaKind};
use crate::solver::{anchor_residuals, Algorithm, Trace};
use crate::vecspace::{CompositeObjective, ConjugateKind, Tolerance, Vector};

use super::bounds::{
    bound_thm2_final, rate_accel, rate_prox_grad, rhs_distance_at_optimum, rhs_prop1, rhs_thm1, rhs_thm2,
    subgrad_rates,
};
use super::state::{CertStateProp1, CertStateThm1, CertStateThm2, LhsMode, PARTIAL_SUM_TOL, RHO_TOL};

/// `lhs ≤ rhs + max(1e−9, 1e−7·|rhs|)`
pub const BOUND_TOL: Tolerance = Tolerance::new(1e-9, 1e-7);

/// Largest tolerated anchor-identity residual per component.
pub const ANCHOR_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub t_k: f64,
    pub theta_k: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub norm_g: f64,
    pub norm_gphi: f64,
    pub norm_gpsi: f64,
    pub lhs: f64,
    pub rhs_conj: f64,
    pub rhs_dist: f64,
    #[serde(rename = "S_k")]
    pub s_k: f64,
    #[serde(rename = "R_k")]
    pub r_k: f64,
}

/// Conditions a run meets, detected from its trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `θ ≡ 1` and the decrease condition at every step.
    Thm1CaseA,
    /// Decrease condition and `S_k = (1 − θ_k) S_{k+1}` at every step.
    Thm1CaseB,
    /// Decrease condition, valid `θ` pairs and non-increasing steps.
    Thm2,
    /// Any proximal subgradient run.
    Prop1,
    /// Proximal subgradient run with `ψ` an indicator.
    ProjectedSubgrad,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::Thm1CaseA => "thm1_case_a",
            Hypothesis::Thm1CaseB => "thm1_case_b",
            Hypothesis::Thm2 => "thm2",
            Hypothesis::Prop1 => "prop1",
            Hypothesis::ProjectedSubgrad => "projected_subgrad",
        })
    }
}

/// Which certificate the row columns `lhs`, `rhs_conj` and `rhs_dist` hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMode {
    Thm1CaseA,
    Thm1CaseB,
    Thm2,
    Prop1,
    /// No theorem applies; `lhs = f(x_{k+1})` and both right-hand sides are NaN.
    Uncertified,
}

/// Run facts needed to interpret rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub algorithm: Algorithm,
    pub theta: ThetaKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertContext {
    pub f_bar: f64,
    pub dist: f64,
    pub lipschitz: Option<f64>,
    pub tol: Tolerance,
}

impl CertContext {
    pub fn new(f_bar: f64, dist: f64) -> Self {
        CertContext {
            f_bar,
            dist,
            lipschitz: None,
            tol: BOUND_TOL,
        }
    }

    pub fn with_lipschitz(mut self, l: Option<f64>) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub meta: RunMeta,
    pub tags: Vec<Hypothesis>,
    pub mode: CertMode,
    pub conjugate: Option<ConjugateKind>,
    pub rows: Vec<TraceRow>,
}

/// Detects which theorem hypotheses hold along `trace`.
pub fn detect_hypotheses(trace: &Trace, psi_is_indicator: bool) -> Vec<Hypothesis> {
    let recs = &trace.records;
    if trace.algorithm.is_subgradient() {
        let mut tags = vec![Hypothesis::Prop1];
        if psi_is_indicator {
            tags.push(Hypothesis::ProjectedSubgrad);
        }
        return tags;
    }
    let mut tags = Vec::new();
    let decrease = recs.iter().all(|r| r.decrease_ok);
    if !decrease || recs.first().is_none_or(|r| r.theta != 1.0) {
        return tags;
    }
    if recs.iter().all(|r| r.theta == 1.0) {
        tags.push(Hypothesis::Thm1CaseA);
    }
    let mut s = 0.0;
    let mut case_b = true;
    for r in recs {
        let s_next = s + r.t / r.theta;
        if (s - (1.0 - r.theta) * s_next).abs() > PARTIAL_SUM_TOL * s_next {
            case_b = false;
            break;
        }
        s = s_next;
    }
    if case_b {
        tags.push(Hypothesis::Thm1CaseB);
    }
    let thetas_ok = recs.iter().skip(1).all(|r| r.theta < 1.0)
        && recs.windows(2).all(|w| validate_theta_pair(w[0].theta, w[1].theta));
    let steps_ok = recs.windows(2).all(|w| w[1].t <= w[0].t);
    if thetas_ok && steps_ok {
        tags.push(Hypothesis::Thm2);
    }
    tags
}

/// Runs the certificate recursions over `trace` and produces one row per
/// iteration. The right-hand side `rhs_conj` is NaN when `obj` carries no
/// conjugate of `f`.
pub fn certify(trace: &Trace, obj: &CompositeObjective, psi_is_indicator: bool, ctx: &CertContext) -> Result<Certificate> {
    let tags = detect_hypotheses(trace, psi_is_indicator);
    let has = |h| tags.contains(&h);
    let mode = if trace.algorithm.is_subgradient() {
        CertMode::Prop1
    } else if has(Hypothesis::Thm1CaseA) {
        CertMode::Thm1CaseA
    } else if has(Hypothesis::Thm1CaseB) {
        CertMode::Thm1CaseB
    } else if has(Hypothesis::Thm2) {
        CertMode::Thm2
    } else {
        CertMode::Uncertified
    };
    let fstar = obj.f_conjugate();
    let dim = obj.dim();
    let x0 = &trace.x0;
    let d = ctx.dist;

    let mut thm1 = match mode {
        CertMode::Thm1CaseA => Some(CertStateThm1::new(dim, LhsMode::CaseA)),
        CertMode::Thm1CaseB => Some(CertStateThm1::new(dim, LhsMode::CaseB)),
        _ => None,
    };
    let mut thm2 = has(Hypothesis::Thm2).then(|| CertStateThm2::new(dim));
    let mut prop1 = (mode == CertMode::Prop1).then(|| CertStateProp1::new(dim));
    let mut s = 0.0;

    let mut rows = Vec::with_capacity(trace.len());
    for rec in &trace.records {
        s += if mode == CertMode::Prop1 { rec.t } else { rec.t / rec.theta };
        let gphi_norm = rec.g_phi.norm();
        if let Some(st) = thm1.as_mut() {
            st.update(rec.t, rec.theta, &rec.g, rec.f_x_next)?;
        }
        if let Some(st) = thm2.as_mut() {
            st.update(rec.t, rec.theta, &rec.g)?;
        }
        if let Some(st) = prop1.as_mut() {
            st.update(rec.t, &rec.g, gphi_norm, rec.phi_y, rec.psi_next)?;
        }
        let (lhs, rhs_conj, rhs_dist) = match mode {
            CertMode::Thm1CaseA | CertMode::Thm1CaseB => {
                let st = thm1.as_ref().expect("state for theorem 1");
                (
                    st.lhs(),
                    fstar.map_or(f64::NAN, |c| rhs_thm1(st, c, x0)),
                    rhs_distance_at_optimum(st.s(), d, ctx.f_bar),
                )
            }
            CertMode::Thm2 => {
                let st = thm2.as_ref().expect("state for theorem 2");
                (
                    rec.f_x_next,
                    fstar.map_or(f64::NAN, |c| ctx.f_bar + rhs_thm2(st, c, ctx.f_bar, x0)),
                    ctx.f_bar + bound_thm2_final(rec.theta, rec.t, d),
                )
            }
            CertMode::Prop1 => {
                let st = prop1.as_ref().expect("state for the subgradient bound");
                (
                    st.lhs(),
                    fstar.map_or(f64::NAN, |c| rhs_prop1(st, c, x0)),
                    rhs_distance_at_optimum(st.t_sum(), d, ctx.f_bar),
                )
            }
            CertMode::Uncertified => (rec.f_x_next, f64::NAN, f64::NAN),
        };
        rows.push(TraceRow {
            k: rec.k,
            t_k: rec.t,
            theta_k: rec.theta,
            f_x: rec.f_x_next,
            f_y: rec.f_y,
            norm_g: rec.g.norm(),
            norm_gphi: gphi_norm,
            norm_gpsi: rec.g_psi.norm(),
            lhs,
            rhs_conj,
            rhs_dist,
            s_k: s,
            r_k: thm2.as_ref().map_or(f64::NAN, |st| st.r()),
        });
    }
    Ok(Certificate {
        meta: RunMeta {
            algorithm: trace.algorithm,
            theta: trace.theta_kind.clone(),
        },
        tags,
        mode,
        conjugate: fstar.map(|c| c.kind()),
        rows,
    })
}

/// Requested check families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Thm1,
    Thm2,
    Prop1,
    Rates,
    Anchors,
}

impl Check {
    pub const ALL: [Check; 5] = [Check::Thm1, Check::Thm2, Check::Prop1, Check::Rates, Check::Anchors];

    /// Hypotheses under which this family is meaningful for a run, or an
    /// explanation of what is missing.
    pub fn requirement(self, meta: &RunMeta, step_non_increasing: bool, fixed_step: bool) -> Result<()> {
        let sub = meta.algorithm.is_subgradient();
        let accel = !matches!(meta.theta, ThetaKind::ConstantOne);
        let fail = |m: &str| Err(Error::Hypothesis(m.to_string()));
        match self {
            Check::Thm1 if sub => fail("thm1 applies to proximal gradient runs"),
            Check::Thm1 if accel && !(meta.theta == ThetaKind::FistaRecurrence && fixed_step) => {
                fail("thm1 with momentum needs the FISTA schedule and a fixed step")
            }
            Check::Thm2 if sub => fail("thm2 applies to proximal gradient runs"),
            Check::Thm2 if !accel => fail("thm2 needs θ_k < 1 for k ≥ 1"),
            Check::Thm2 if !step_non_increasing => fail("thm2 needs non-increasing steps (fixed or monotone backtracking)"),
            Check::Prop1 if !sub => fail("prop1 applies to subgradient runs"),
            Check::Anchors if sub => fail("anchors apply to proximal gradient runs"),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::Thm1 => "thm1",
            Check::Thm2 => "thm2",
            Check::Prop1 => "prop1",
            Check::Rates => "rates",
            Check::Anchors => "anchors",
        })
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown check `{s}` (expected thm1, thm2, prop1, rates or anchors)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Outcome of one inequality checked at every row. `slack = rhs − lhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Smallest `rhs − lhs`; `None` when every comparison was vacuous.
    pub worst_slack: Option<f64>,
    pub worst_k: Option<usize>,
    pub satisfied: bool,
    /// Comparisons skipped because the right-hand side was `+∞`.
    pub vacuous: usize,
    pub first_violation: Option<Violation>,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.first_violation {
            Some(v) => write!(
                f,
                "{}: violated at k = {} (lhs = {:.6e}, rhs = {:.6e}, slack = {:.3e})",
                self.name, v.k, v.lhs, v.rhs, v.slack
            ),
            None => match self.worst_slack {
                Some(s) => write!(f, "{}: ok (worst slack {:.3e} at k = {})", self.name, s, self.worst_k.unwrap_or(0)),
                None => write!(f, "{}: ok (vacuous)", self.name),
            },
        }
    }
}

/// Collects `lhs ≤ rhs` comparisons into a [`CheckResult`].
#[derive(Clone, Debug)]
pub struct CheckAccumulator {
    result: CheckResult,
    tol: Tolerance,
}

impl CheckAccumulator {
    pub fn new(name: impl Into<String>, tol: Tolerance) -> Self {
        CheckAccumulator {
            result: CheckResult {
                name: name.into(),
                worst_slack: None,
                worst_k: None,
                satisfied: true,
                vacuous: 0,
                first_violation: None,
            },
            tol,
        }
    }

    pub fn push(&mut self, k: usize, lhs: f64, rhs: f64) {
        if rhs == f64::INFINITY {
            self.result.vacuous += 1;
            return;
        }
        let slack = rhs - lhs;
        let ok = self.tol.le(lhs, rhs);
        let r = &mut self.result;
        // NaN ranks as the worst possible slack.
        let rank = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
        if r.worst_slack.is_none_or(|w| rank(slack) < rank(w)) {
            r.worst_slack = Some(slack);
            r.worst_k = Some(k);
        }
        if !ok {
            r.satisfied = false;
            if r.first_violation.is_none() {
                r.first_violation = Some(Violation { k, lhs, rhs, slack });
            }
        }
    }

    pub fn finish(self) -> CheckResult {
        self.result
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub tags: Vec<Hypothesis>,
    pub checks: Vec<CheckResult>,
}

impl BoundReport {
    pub fn satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.satisfied)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn require(tags: &[Hypothesis], any_of: &[Hypothesis], what: &str) -> Result<()> {
    if any_of.iter().any(|h| tags.contains(h)) {
        Ok(())
    } else {
        Err(Error::Hypothesis(format!("the run does not satisfy the conditions of {what}")))
    }
}

fn column_check(
    name: &str,
    rows: &[TraceRow],
    tol: Tolerance,
    mut pair: impl FnMut(usize, &TraceRow) -> (f64, f64),
) -> Option<CheckResult> {
    let mut acc = CheckAccumulator::new(name, tol);
    let mut any = false;
    for (i, row) in rows.iter().enumerate() {
        let (lhs, rhs) = pair(i, row);
        if rhs.is_nan() {
            continue;
        }
        any = true;
        acc.push(row.k, lhs, rhs);
    }
    any.then(|| acc.finish())
}

/// Running `1/min_{i≤k} t_i`.
fn effective_lipschitz(rows: &[TraceRow]) -> Vec<f64> {
    let mut t_min = f64::INFINITY;
    rows.iter()
        .map(|r| {
            t_min = t_min.min(r.t_k);
            1.0 / t_min
        })
        .collect()
}

/// Evaluates the requested families over `rows`. Anchor checks need the
/// full iterates and are produced by [`anchor_check`] instead.
pub fn evaluate_checks(
    rows: &[TraceRow],
    tags: &[Hypothesis],
    meta: &RunMeta,
    ctx: &CertContext,
    checks: &[Check],
) -> Result<Vec<CheckResult>> {
    use Hypothesis::*;
    let tol = ctx.tol;
    let (fb, d) = (ctx.f_bar, ctx.dist);
    let mut out = Vec::new();
    let mut push = |r: Option<CheckResult>| out.extend(r);

    for &check in checks {
        match check {
            Check::Thm1 => {
                require(tags, &[Thm1CaseA, Thm1CaseB], "the first theorem")?;
                push(column_check("thm1.lhs_le_conj", rows, tol, |_, r| (r.lhs, r.rhs_conj)));
                push(column_check("thm1.conj_le_dist", rows, tol, |_, r| (r.rhs_conj, r.rhs_dist)));
                push(column_check("thm1.lhs_le_dist", rows, tol, |_, r| (r.lhs, r.rhs_dist)));
                push(column_check("thm1.gap_le_dist", rows, tol, |_, r| {
                    (r.f_x - fb, d * d / (2.0 * r.s_k))
                }));
            }
            Check::Thm2 => {
                require(tags, &[Thm2], "the second theorem")?;
                let rho_tol = Tolerance::new(0.0, RHO_TOL);
                push(column_check("thm2.r_nondecreasing", rows, rho_tol, |i, r| {
                    if i == 0 {
                        (1.0, r.r_k)
                    } else {
                        (rows[i - 1].r_k, r.r_k)
                    }
                }));
                push(column_check("thm2.lhs_le_conj", rows, tol, |_, r| (r.f_x, r.rhs_conj)));
                push(column_check("thm2.gap_bound", rows, tol, |_, r| {
                    (r.f_x - fb, bound_thm2_final(r.theta_k, r.t_k, d))
                }));
            }
            Check::Prop1 => {
                require(tags, &[Prop1], "the subgradient proposition")?;
                push(column_check("prop1.lhs_le_conj", rows, tol, |_, r| (r.lhs, r.rhs_conj)));
                push(column_check("prop1.conj_le_dist", rows, tol, |_, r| (r.rhs_conj, r.rhs_dist)));
                push(column_check("prop1.lhs_le_dist", rows, tol, |_, r| (r.lhs, r.rhs_dist)));
            }
            Check::Rates if meta.algorithm.is_subgradient() => {
                require(tags, &[ProjectedSubgrad], "the projected subgradient rates")?;
                let iters: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.t_k, r.norm_gphi, r.f_y)).collect();
                let sr = subgrad_rates(&iters, fb, ctx.lipschitz, d);
                push(column_check("rates.subgrad_weighted", rows, tol, |i, _| {
                    (sr[i].weighted_gap, sr[i].rhs_weighted)
                }));
                push(column_check("rates.subgrad_lipschitz", rows, tol, |i, _| {
                    (sr[i].min_gap, sr[i].rhs_lipschitz.unwrap_or(f64::NAN))
                }));
                push(column_check("rates.subgrad_normalized", rows, tol, |i, _| {
                    (sr[i].min_gap, sr[i].rhs_normalized.unwrap_or(f64::NAN))
                }));
            }
            Check::Rates => {
                let l_eff = effective_lipschitz(rows);
                if tags.contains(&Thm1CaseA) {
                    push(column_check("rates.prox_grad", rows, tol, |i, r| {
                        (r.f_x - fb, rate_prox_grad(l_eff[i], d, r.k + 1))
                    }));
                } else if matches!(meta.theta, ThetaKind::FistaRecurrence | ThetaKind::TwoOverKPlus2)
                    && (tags.contains(&Thm1CaseB) || tags.contains(&Thm2))
                {
                    push(column_check("rates.accel", rows, tol, |i, r| {
                        (r.f_x - fb, rate_accel(l_eff[i], d, r.k + 1))
                    }));
                } else if tags.contains(&Thm2) {
                    push(column_check("rates.thm2_final", rows, tol, |_, r| {
                        (r.f_x - fb, bound_thm2_final(r.theta_k, r.t_k, d))
                    }));
                } else {
                    return Err(Error::Hypothesis("no rate statement applies to this run".into()));
                }
            }
            Check::Anchors => {}
        }
    }
    Ok(out)
}

/// The anchor identity at every `k`, read from the full iterates.
pub fn anchor_check(trace: &Trace) -> CheckResult {
    let mut acc = CheckAccumulator::new("anchors.identity", Tolerance::new(0.0, 0.0));
    for (i, r) in anchor_residuals(trace).into_iter().enumerate() {
        acc.push(i, r, ANCHOR_TOL);
    }
    acc.finish()
}

/// The certificate chain against arbitrary comparison points:
/// `rhs_conj ≤ f(x) + ‖x − x_0‖²/(2S_k)` (falling back to `lhs` when no
/// conjugate is available) for every row and every `(x, f(x))`.
pub fn distance_chain_check(rows: &[TraceRow], x0: &Vector, points: &[(Vector, f64)], tol: Tolerance) -> CheckResult {
    let mut acc = CheckAccumulator::new("chain.random_points", tol);
    for row in rows {
        let lhs = if row.rhs_conj.is_nan() { row.lhs } else { row.rhs_conj };
        for (x, fx) in points {
            acc.push(row.k, lhs, fx + (x - x0).norm_sq() / (2.0 * row.s_k));
        }
    }
    acc.finish()
}

/// Least-squares fit of `ln(f(x_k) − f̄)` against `ln k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    pub k_from: usize,
    pub k_to: usize,
}

/// Gaps at or below this (relative to `max(1, |f̄|)`) are rounding noise
/// and are left out of the fit.
pub const FIT_GAP_FLOOR: f64 = 1e-12;

/// Fits the tail half of a proximal gradient run, using the iterate index
/// `k + 1` of each row.
pub fn fit_tail_slope(rows: &[TraceRow], f_bar: f64) -> Option<RateFit> {
    let n = rows.len();
    if n < 4 {
        return None;
    }
    let floor = FIT_GAP_FLOOR * f_bar.abs().max(1.0);
    let pts: Vec<(f64, f64)> = rows[n / 2..]
        .iter()
        .filter(|r| r.f_x - f_bar > floor)
        .map(|r| (((r.k + 1) as f64).ln(), (r.f_x - f_bar).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (mx / m, my / m);
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let slope = sxy / sxx;
    Some(RateFit {
        slope,
        intercept: my - slope * mx,
        points: pts.len(),
        k_from: rows[n / 2].k + 1,
        k_to: rows[n - 1].k + 1,
    })
}
