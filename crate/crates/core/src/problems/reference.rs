//! Long reference runs for optimal values, and the grid prox used to test
//! the analytic prox operators.

use crate::certificates::{rate_accel, steep_level};
use crate::conjugate::GridSpec;
use crate::error::{Error, Result};
use crate::schedules::next_theta_fista;
use crate::solver::{momentum_update, prox_grad_step, prox_subgrad_step};
use crate::vecspace::{CompositeObjective, ExtReal, Vector};

use super::{Estimate, ProblemInstance, ProblemKind};

/// Iteration budget for reference runs; runs stop earlier once the accuracy
/// estimate drops below [`REFERENCE_TARGET`].
pub const DEFAULT_REFERENCE_BUDGET: usize = 1_000_000;

pub const REFERENCE_TARGET: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceResult {
    pub x_best: Vector,
    pub f_bar: Estimate,
    pub iterations: usize,
    /// `‖x_K − x_{K/2}‖`, a drift estimate of how far `x_best` may still be
    /// from the optimal set.
    pub drift: f64,
}

impl ReferenceResult {
    pub fn dist_estimate(&self, x0: &Vector) -> Estimate {
        Estimate {
            value: (x0 - &self.x_best).norm(),
            accuracy: self.drift,
        }
    }
}

/// Best objective value over a long run: FISTA with `t = 1/L` for smooth
/// `φ`, normalized projected subgradient steps `α_i = 1/√(i+1)` otherwise.
///
/// The accuracy reported uses `‖x_0 − x_best‖` in place of the unknown
/// distance to the optimal set.
pub fn reference_optimum(
    obj: &CompositeObjective,
    x0: &Vector,
    lipschitz: Option<f64>,
    smooth: bool,
    budget: usize,
) -> Result<ReferenceResult> {
    if budget < 10 {
        return Err(Error::invalid(format!("reference budget must be at least 10, got {budget}")));
    }
    x0.check_dim(obj.dim())?;
    let l = lipschitz.ok_or_else(|| Error::invalid("reference runs need a Lipschitz constant"))?;
    if smooth {
        fista_reference(obj, x0, l, budget)
    } else {
        subgrad_reference(obj, x0, l, budget)
    }
}

fn fista_reference(obj: &CompositeObjective, x0: &Vector, l: f64, budget: usize) -> Result<ReferenceResult> {
    let t = 1.0 / l;
    let (mut x, mut y, mut theta) = (x0.clone(), x0.clone(), 1.0);
    let mut best = (x0.clone(), obj.eval_f(x0).to_f64());
    let mut half = x0.clone();
    let mut k = 0;
    while k < budget {
        let step = prox_grad_step(obj, &y, t);
        let theta_next = next_theta_fista(theta);
        y = momentum_update(&step.x_next, &x, theta, theta_next);
        x = step.x_next;
        theta = theta_next;
        k += 1;
        let f = obj.eval_f(&x).to_f64();
        if f < best.1 {
            best = (x.clone(), f);
        }
        if k == budget / 2 {
            half = x.clone();
        }
        if k % 1000 == 0 && rate_accel(l, (x0 - &best.0).norm(), k) <= REFERENCE_TARGET {
            half = x.clone();
            break;
        }
    }
    let drift = (&x - &half).norm();
    Ok(ReferenceResult {
        f_bar: Estimate {
            value: best.1,
            accuracy: rate_accel(l, (x0 - &best.0).norm(), k),
        },
        x_best: best.0,
        iterations: k,
        drift,
    })
}

fn subgrad_reference(obj: &CompositeObjective, x0: &Vector, l: f64, budget: usize) -> Result<ReferenceResult> {
    let mut x = x0.clone();
    let mut best = (x0.clone(), obj.eval_f(x0).to_f64());
    let mut half = x0.clone();
    let mut alphas = Vec::with_capacity(budget);
    let mut k = 0;
    while k < budget {
        let g = obj.phi().gradient(&x);
        let gn = g.norm();
        if gn == 0.0 {
            // x minimizes φ over the feasible set.
            let f = obj.eval_f(&x).to_f64();
            return Ok(ReferenceResult {
                f_bar: Estimate::exact(f),
                x_best: x,
                iterations: k,
                drift: 0.0,
            });
        }
        let alpha = 1.0 / ((k + 1) as f64).sqrt();
        alphas.push(alpha);
        x = prox_subgrad_step(obj, g, &x, alpha / gn).x_next;
        k += 1;
        let f = obj.eval_f(&x).to_f64();
        if f < best.1 {
            best = (x.clone(), f);
        }
        if k == budget / 2 {
            half = x.clone();
        }
    }
    let level = steep_level(&alphas, (x0 - &best.0).norm())?;
    Ok(ReferenceResult {
        f_bar: Estimate {
            value: best.1,
            accuracy: l * level,
        },
        x_best: best.0,
        iterations: k,
        drift: (&x - &half).norm(),
    })
}

impl ProblemInstance {
    /// Optimal value from a reference run of `budget` iterations; exact for
    /// full-rank least squares.
    pub fn reference(&self, budget: usize) -> Result<Estimate> {
        if budget < 10 {
            return Err(Error::invalid(format!("reference budget must be at least 10, got {budget}")));
        }
        if self.spec.kind == ProblemKind::LeastSquares && self.objective.f_conjugate().is_some() {
            return Ok(self.f_bar);
        }
        Ok(reference_optimum(&self.objective, &self.x0, self.lipschitz, self.smooth, budget)?.f_bar)
    }
}

/// Grid argmin of `ψ(y) + ‖x − y‖²/(2t)` (dimension ≤ 2).
pub fn brute_force_prox(psi: &dyn Fn(&Vector) -> ExtReal, t: f64, x: &Vector, grid: &GridSpec) -> Result<Vector> {
    x.check_dim(grid.dim())?;
    if !(t > 0.0) {
        return Err(Error::invalid(format!("prox parameter must be positive, got {t}")));
    }
    let mut best: Option<(Vector, f64)> = None;
    for y in grid.points() {
        if let ExtReal::Finite(v) = psi(&y) {
            let val = v + (x - &y).norm_sq() / (2.0 * t);
            if best.as_ref().is_none_or(|(_, b)| val < *b) {
                best = Some((y, val));
            }
        }
    }
    best.map(|(y, _)| y).ok_or(Error::EmptyGridDomain)
}
