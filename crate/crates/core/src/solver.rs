//! The proximal gradient template (with momentum) and the proximal
//! subgradient method, both recording every iterate.
//!
//! The composite step direction is recovered algebraically:
//! `g_k = (y_k − x_{k+1}) / t_k`, `g^φ_k = ∇φ(y_k)` and `g^ψ_k = g_k − g^φ_k`.
//! Prox optimality makes `g^ψ_k` a subgradient of `ψ` at `x_{k+1}`, so no
//! subgradient oracle for `ψ` is needed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedules::{backtrack_with_gradient, decrease_margin, StepRule, ThetaKind, ThetaSchedule, DECREASE_TOL};
use crate::vecspace::{CompositeObjective, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ProxGrad,
    AccelProxGrad,
    ProxSubgrad,
    ProjSubgrad,
}

impl Algorithm {
    pub fn is_subgradient(self) -> bool {
        matches!(self, Algorithm::ProxSubgrad | Algorithm::ProjSubgrad)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::ProxGrad => "prox_grad",
            Algorithm::AccelProxGrad => "accel_prox_grad",
            Algorithm::ProxSubgrad => "prox_subgrad",
            Algorithm::ProjSubgrad => "proj_subgrad",
        })
    }
}

/// One prox step: `x_next` and the split `g = g_phi + g_psi`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepParts {
    pub x_next: Vector,
    pub g: Vector,
    pub g_phi: Vector,
    pub g_psi: Vector,
}

/// State and outputs of iteration `k`. For subgradient runs `y = x` and
/// `theta = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub t: f64,
    pub theta: f64,
    pub x: Vector,
    pub y: Vector,
    pub x_next: Vector,
    pub g: Vector,
    pub g_phi: Vector,
    pub g_psi: Vector,
    /// `φ(y_k)`
    pub phi_y: f64,
    /// `ψ(x_{k+1})`
    pub psi_next: f64,
    /// `f(x_{k+1})`
    pub f_x_next: f64,
    /// `f(y_k)`, `+∞` when momentum leaves the domain of `ψ`.
    pub f_y: f64,
    /// Model minus `φ(x_{k+1})` in the decrease condition; `None` for subgradient runs.
    pub decrease_margin: Option<f64>,
    pub decrease_ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub theta_kind: ThetaKind,
    pub step_tag: String,
    pub x0: Vector,
    pub records: Vec<IterateRecord>,
    /// `y_K` and `θ_K` after the last record.
    pub y_final: Vector,
    pub theta_final: f64,
    /// Normalized subgradient run hit `g^φ = 0`.
    pub early_optimal: bool,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    /// `x_k` for `k = 0..=K`.
    pub fn x(&self, k: usize) -> &Vector {
        if k == 0 {
            &self.x0
        } else {
            &self.records[k - 1].x_next
        }
    }

    /// `(y_k, θ_k)` for `k = 0..=K`.
    pub fn y_theta(&self, k: usize) -> (&Vector, f64) {
        if k < self.records.len() {
            (&self.records[k].y, self.records[k].theta)
        } else {
            (&self.y_final, self.theta_final)
        }
    }
}

fn split(y: &Vector, x_next: Vector, g_phi: Vector, t: f64) -> StepParts {
    let g = (y - &x_next).scaled(1.0 / t);
    let g_psi = &g - &g_phi;
    StepParts {
        x_next,
        g,
        g_phi,
        g_psi,
    }
}

/// `x_{k+1} = Prox_t(y − t∇φ(y))` with its gradient split.
pub fn prox_grad_step(obj: &CompositeObjective, y: &Vector, t: f64) -> StepParts {
    let g_phi = obj.phi().gradient(y);
    let x_next = obj.psi().prox(t, &y.axpy(-t, &g_phi));
    split(y, x_next, g_phi, t)
}

/// `y_{k+1} = x_{k+1} + (θ_{k+1}(1 − θ_k)/θ_k)(x_{k+1} − x_k)`
pub fn momentum_update(x_next: &Vector, x: &Vector, theta: f64, theta_next: f64) -> Vector {
    let beta = theta_next * (1.0 - theta) / theta;
    if beta == 0.0 {
        return x_next.clone();
    }
    x_next.axpy(beta, &(x_next - x))
}

/// The proximal gradient template: `K` iterations from `x_0` with `y_0 = x_0`
/// and `θ_0 = 1`. Non-accelerated when `theta` is `ConstantOne`.
pub fn run_algorithm1(
    obj: &CompositeObjective,
    theta: ThetaKind,
    steps: &StepRule,
    x0: &Vector,
    iterations: usize,
) -> Result<Trace> {
    if iterations == 0 {
        return Err(Error::invalid("iteration count must be at least 1"));
    }
    x0.check_dim(obj.dim())?;
    steps.validate()?;
    let algorithm = if theta == ThetaKind::ConstantOne {
        Algorithm::ProxGrad
    } else {
        Algorithm::AccelProxGrad
    };
    let mut schedule = ThetaSchedule::new(theta.clone())?;
    let (phi, psi) = (obj.phi(), obj.psi());

    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut t_prev = None;
    let mut records = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let th = schedule.current();
        let g_phi = phi.gradient(&y);
        let (t, x_next) = match steps {
            StepRule::Fixed { t } => (*t, psi.prox(*t, &y.axpy(-*t, &g_phi))),
            rule => {
                let out = backtrack_with_gradient(phi, psi, &y, &g_phi, rule, t_prev, k)?;
                (out.t, out.x_next)
            }
        };
        let (margin, model) = decrease_margin(phi, &y, &g_phi, &x_next, t);
        let phi_y = phi.value(&y);
        let psi_next = psi.value(&x_next).to_f64();
        let f_x_next = phi.value(&x_next) + psi_next;
        let f_y = phi_y + psi.value(&y).to_f64();
        let parts = split(&y, x_next, g_phi, t);

        let th_next = schedule.advance()?;
        let y_next = momentum_update(&parts.x_next, &x, th, th_next);
        records.push(IterateRecord {
            k,
            t,
            theta: th,
            x: x.clone(),
            y: y.clone(),
            x_next: parts.x_next.clone(),
            g: parts.g,
            g_phi: parts.g_phi,
            g_psi: parts.g_psi,
            phi_y,
            psi_next,
            f_x_next,
            f_y,
            decrease_margin: Some(margin),
            decrease_ok: margin >= -DECREASE_TOL * (1.0 + model.abs()) && psi_next.is_finite(),
        });
        x = parts.x_next;
        y = y_next;
        t_prev = Some(t);
    }
    Ok(Trace {
        algorithm,
        theta_kind: theta,
        step_tag: steps.to_string(),
        x0: x0.clone(),
        records,
        y_final: y,
        theta_final: schedule.current(),
        early_optimal: false,
    })
}

/// `x_{k+1} = Prox_t(x_k − t·g^φ_k)` for a supplied subgradient `g^φ_k`.
pub fn prox_subgrad_step(obj: &CompositeObjective, g_phi: Vector, x: &Vector, t: f64) -> StepParts {
    let x_next = obj.psi().prox(t, &x.axpy(-t, &g_phi));
    split(x, x_next, g_phi, t)
}

/// Step sizes for the subgradient method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum SubgradSteps {
    /// `t_k` directly.
    Steps(Vec<f64>),
    /// Step lengths `α_k`, with `t_k = α_k / ‖g^φ_k‖`.
    Normalized(Vec<f64>),
}

impl SubgradSteps {
    /// `t_k = c / √(k + 1)`
    pub fn inverse_sqrt(c: f64, n: usize) -> Self {
        SubgradSteps::Steps((0..n).map(|k| c / ((k + 1) as f64).sqrt()).collect())
    }

    pub fn constant(t: f64, n: usize) -> Self {
        SubgradSteps::Steps(vec![t; n])
    }

    fn values(&self) -> &[f64] {
        match self {
            SubgradSteps::Steps(v) | SubgradSteps::Normalized(v) => v,
        }
    }
}

/// The proximal subgradient method. With `ψ` an indicator this is the
/// projected subgradient method. In normalized mode a zero subgradient means
/// `x_k` is optimal and the run stops early.
pub fn run_algorithm2(
    obj: &CompositeObjective,
    subgrad: &dyn Fn(&Vector) -> Vector,
    x0: &Vector,
    steps: &SubgradSteps,
    iterations: usize,
) -> Result<Trace> {
    if iterations == 0 {
        return Err(Error::invalid("iteration count must be at least 1"));
    }
    x0.check_dim(obj.dim())?;
    let values = steps.values();
    if values.len() < iterations {
        return Err(Error::invalid(format!(
            "{} step values supplied for {iterations} iterations",
            values.len()
        )));
    }
    if let Some((k, v)) = values[..iterations]
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::invalid(format!("step {k} is not positive: {v}")));
    }
    let (phi, psi) = (obj.phi(), obj.psi());
    let mut x = x0.clone();
    let mut records = Vec::with_capacity(iterations);
    let mut early_optimal = false;
    for (k, &v) in values.iter().enumerate().take(iterations) {
        let g_phi = subgrad(&x);
        let t = match steps {
            SubgradSteps::Steps(_) => v,
            SubgradSteps::Normalized(_) => {
                let gn = g_phi.norm();
                if gn == 0.0 {
                    early_optimal = true;
                    break;
                }
                v / gn
            }
        };
        let phi_y = phi.value(&x);
        let f_y = phi_y + psi.value(&x).to_f64();
        let parts = prox_subgrad_step(obj, g_phi, &x, t);
        let psi_next = psi.value(&parts.x_next).to_f64();
        let f_x_next = phi.value(&parts.x_next) + psi_next;
        records.push(IterateRecord {
            k,
            t,
            theta: 1.0,
            x: x.clone(),
            y: x.clone(),
            x_next: parts.x_next.clone(),
            g: parts.g,
            g_phi: parts.g_phi,
            g_psi: parts.g_psi,
            phi_y,
            psi_next,
            f_x_next,
            f_y,
            decrease_margin: None,
            decrease_ok: false,
        });
        x = parts.x_next;
    }
    let step_tag = match steps {
        SubgradSteps::Steps(_) => "steps",
        SubgradSteps::Normalized(_) => "normalized",
    };
    Ok(Trace {
        algorithm: Algorithm::ProxSubgrad,
        theta_kind: ThetaKind::ConstantOne,
        step_tag: step_tag.to_string(),
        x0: x0.clone(),
        records,
        y_final: x,
        theta_final: 1.0,
        early_optimal,
    })
}

/// Per-`k` largest component of
/// `(y_k − (1 − θ_k)x_k)/θ_k − (x_0 − Σ_{i<k} (t_i/θ_i) g_i)`, for `k = 1..=K`.
pub fn anchor_residuals(trace: &Trace) -> Vec<f64> {
    let mut weighted = Vector::zeros(trace.x0.dim());
    let mut out = Vec::with_capacity(trace.len());
    for k in 1..=trace.len() {
        let rec = &trace.records[k - 1];
        weighted = weighted.axpy(rec.t / rec.theta, &rec.g);
        let (y, th) = trace.y_theta(k);
        let lhs = y.axpy(-(1.0 - th), trace.x(k)).scaled(1.0 / th);
        let rhs = &trace.x0 - &weighted;
        out.push((&lhs - &rhs).norm_inf());
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::prox::ProxSpec;
    use crate::vecspace::{SmoothFn, SmoothOracle};

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    fn half_sq(l: f64) -> Arc<dyn SmoothOracle> {
        Arc::new(SmoothFn::new(move |x| 0.5 * l * x.norm_sq(), move |x| x.scaled(l)).with_lipschitz(l))
    }

    fn zero_phi() -> Arc<dyn SmoothOracle> {
        Arc::new(SmoothFn::new(|_| 0.0, |x| Vector::zeros(x.dim())))
    }

    fn abs_phi() -> Arc<dyn SmoothOracle> {
        Arc::new(SmoothFn::new(|x| x.norm_l1(), |x| x.map(|c| if c > 0.0 { 1.0 } else if c < 0.0 { -1.0 } else { 0.0 })))
    }

    fn unit_box(n: usize) -> Arc<ProxSpec> {
        Arc::new(ProxSpec::box_set(&Vector::zeros(n), &Vector::from_element(n, 1.0)).unwrap())
    }

    #[test]
    fn prox_grad_step_examples() {
        let obj = CompositeObjective::new(1, half_sq(1.0), Arc::new(ProxSpec::Zero)).unwrap();
        let s = prox_grad_step(&obj, &v(&[1.0]), 1.0);
        assert_eq!(s.x_next, v(&[0.0]));
        assert_eq!(s.g, v(&[1.0]));
        assert_eq!(s.g_phi, v(&[1.0]));
        assert_eq!(s.g_psi, v(&[0.0]));

        let obj = CompositeObjective::new(1, zero_phi(), unit_box(1)).unwrap();
        let s = prox_grad_step(&obj, &v(&[2.0]), 1.0);
        assert_eq!(s.x_next, v(&[1.0]));
        assert_eq!(s.g, v(&[1.0]));
        assert_eq!(s.g_psi, v(&[1.0]));

        let obj = CompositeObjective::new(2, zero_phi(), Arc::new(ProxSpec::Zero)).unwrap();
        let s = prox_grad_step(&obj, &v(&[0.3, -2.0]), 17.0);
        assert_eq!(s.x_next, v(&[0.3, -2.0]));
        assert_eq!(s.g, v(&[0.0, 0.0]));
    }

    #[test]
    fn momentum_examples() {
        assert_eq!(momentum_update(&v(&[3.0]), &v(&[1.0]), 1.0, 0.3), v(&[3.0]));
        let y = momentum_update(&v(&[1.0]), &v(&[0.0]), 0.5, 0.4);
        assert!((y[0] - 1.4).abs() < 1e-15);
        assert_eq!(momentum_update(&v(&[2.0]), &v(&[2.0]), 0.5, 0.4), v(&[2.0]));
    }

    #[test]
    fn constant_theta_exact_minimization() {
        let obj = CompositeObjective::new(1, half_sq(1.0), Arc::new(ProxSpec::Zero)).unwrap();
        let trace = run_algorithm1(&obj, ThetaKind::ConstantOne, &StepRule::fixed(1.0).unwrap(), &v(&[1.0]), 5).unwrap();
        assert_eq!(trace.algorithm, Algorithm::ProxGrad);
        for k in 1..=5 {
            assert_eq!(trace.x(k), &v(&[0.0]));
        }
    }

    #[test]
    fn single_iteration_is_one_prox_step() {
        let obj = CompositeObjective::new(2, half_sq(2.0), Arc::new(ProxSpec::l1(0.3).unwrap())).unwrap();
        let x0 = v(&[1.0, -0.2]);
        let trace = run_algorithm1(&obj, ThetaKind::FistaRecurrence, &StepRule::fixed(0.4).unwrap(), &x0, 1).unwrap();
        assert_eq!(trace.len(), 1);
        let rec = &trace.records[0];
        assert_eq!(rec.y, x0);
        assert_eq!(rec.theta, 1.0);
        assert_eq!(rec.x_next, prox_grad_step(&obj, &x0, 0.4).x_next);
    }

    #[test]
    fn record_invariants_hold() {
        let obj = CompositeObjective::new(2, half_sq(3.0), unit_box(2)).unwrap();
        let trace = run_algorithm1(
            &obj,
            ThetaKind::FistaRecurrence,
            &StepRule::backtracking(1.0, 0.5, true).unwrap(),
            &v(&[0.9, 0.1]),
            50,
        )
        .unwrap();
        for r in &trace.records {
            assert_eq!(&r.g_phi + &r.g_psi, r.g);
            assert!((&r.y.axpy(-r.t, &r.g) - &r.x_next).norm_inf() <= 1e-12);
            assert!(r.decrease_ok);
            assert!(r.f_x_next <= r.f_y + 1e-12);
        }
        assert!(anchor_residuals(&trace).iter().all(|&r| r <= 1e-8));
    }

    #[test]
    fn rejects_zero_iterations() {
        let obj = CompositeObjective::new(1, half_sq(1.0), Arc::new(ProxSpec::Zero)).unwrap();
        assert!(run_algorithm1(&obj, ThetaKind::ConstantOne, &StepRule::fixed(1.0).unwrap(), &v(&[1.0]), 0).is_err());
    }

    #[test]
    fn subgrad_step_examples() {
        let obj = CompositeObjective::new(1, abs_phi(), Arc::new(ProxSpec::Zero)).unwrap();
        let s = prox_subgrad_step(&obj, v(&[1.0]), &v(&[2.0]), 1.0);
        assert_eq!(s.x_next, v(&[1.0]));

        let obj = CompositeObjective::new(1, abs_phi(), unit_box(1)).unwrap();
        let s = prox_subgrad_step(&obj, v(&[1.0]), &v(&[0.5]), 1.0);
        assert_eq!(s.x_next, v(&[0.0]));
        assert_eq!(s.g, v(&[0.5]));
        assert_eq!(s.g_psi, v(&[-0.5]));

        let obj = CompositeObjective::new(1, abs_phi(), Arc::new(ProxSpec::Zero)).unwrap();
        let s = prox_subgrad_step(&obj, v(&[0.0]), &v(&[0.7]), 3.0);
        assert_eq!(s.x_next, v(&[0.7]));
    }

    #[test]
    fn projected_step_is_projection() {
        let set = ProxSpec::box_set(&v(&[-1.0, 0.0]), &v(&[1.0, 0.5])).unwrap();
        let obj = CompositeObjective::new(2, abs_phi(), Arc::new(set.clone())).unwrap();
        let sub = |x: &Vector| obj.phi().gradient(x);
        let trace = run_algorithm2(&obj, &sub, &v(&[0.9, 0.4]), &SubgradSteps::inverse_sqrt(0.5, 20), 20).unwrap();
        for r in &trace.records {
            let expect = crate::prox::project_box(&v(&[-1.0, 0.0]), &v(&[1.0, 0.5]), &r.x.axpy(-r.t, &r.g_phi));
            assert_eq!(r.x_next, expect);
        }
    }

    #[test]
    fn constant_step_oscillates_in_band() {
        let obj = CompositeObjective::new(1, abs_phi(), Arc::new(ProxSpec::Zero)).unwrap();
        let sub = |x: &Vector| obj.phi().gradient(x);
        let trace = run_algorithm2(&obj, &sub, &v(&[0.35]), &SubgradSteps::constant(0.1, 40), 40).unwrap();
        // 0.35 → 0.25 → 0.15 → 0.05 → −0.05 → 0.05 → …
        let entry = (1..=40).find(|&k| trace.x(k)[0].abs() <= 0.1 + 1e-12).unwrap();
        assert_eq!(entry, 3);
        for k in entry..=40 {
            assert!(trace.x(k)[0].abs() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn normalized_mode_stops_at_optimum() {
        let obj = CompositeObjective::new(1, abs_phi(), Arc::new(ProxSpec::Zero)).unwrap();
        let sub = |x: &Vector| obj.phi().gradient(x);
        let trace = run_algorithm2(&obj, &sub, &v(&[0.0]), &SubgradSteps::Normalized(vec![1.0; 5]), 5).unwrap();
        assert!(trace.is_empty());
        assert!(trace.early_optimal);
    }

    #[test]
    fn normalized_mode_step_lengths() {
        let obj = CompositeObjective::new(2, abs_phi(), Arc::new(ProxSpec::Zero)).unwrap();
        let sub = |x: &Vector| obj.phi().gradient(x);
        let alphas: Vec<f64> = (0..10).map(|i| 0.1 / ((i + 1) as f64).sqrt()).collect();
        let trace = run_algorithm2(&obj, &sub, &v(&[3.0, -2.0]), &SubgradSteps::Normalized(alphas.clone()), 10).unwrap();
        for (r, a) in trace.records.iter().zip(&alphas) {
            assert!((r.t * r.g_phi.norm() - a).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_positive_steps() {
        let obj = CompositeObjective::new(1, abs_phi(), Arc::new(ProxSpec::Zero)).unwrap();
        let sub = |x: &Vector| obj.phi().gradient(x);
        assert!(run_algorithm2(&obj, &sub, &v(&[1.0]), &SubgradSteps::Steps(vec![0.1, 0.0]), 2).is_err());
        assert!(run_algorithm2(&obj, &sub, &v(&[1.0]), &SubgradSteps::Steps(vec![0.1]), 2).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let obj = CompositeObjective::new(2, half_sq(2.5), Arc::new(ProxSpec::l1(0.2).unwrap())).unwrap();
        let run = || {
            run_algorithm1(&obj, ThetaKind::TwoOverKPlus2, &StepRule::backtracking(4.0, 0.5, true).unwrap(), &v(&[1.0, -3.0]), 100)
                .unwrap()
        };
        assert_eq!(run(), run());
    }
}
