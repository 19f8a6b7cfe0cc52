//! Closed-form proximal operators and projections for the `ψ` side of the
//! composite objective.

use serde::{Deserialize, Serialize};

use crate::conjugate::{conjugate_l1, support_box};
use crate::error::{Error, Result};
use crate::vecspace::{ConjugateKind, ConjugateOracle, ExtReal, ProxOracle, Vector};

/// Soft-thresholding, the prox of `λ‖·‖₁` with step `t`.
///
/// Components with `|xᵢ| ≤ tλ` map to exactly zero.
pub fn prox_l1(lambda: f64, t: f64, x: &Vector) -> Vector {
    let thresh = t * lambda;
    x.map(|c| {
        if c.abs() <= thresh {
            0.0
        } else {
            c.signum() * (c.abs() - thresh)
        }
    })
}

/// Prox of `(λ/2)‖·‖²`: `x / (1 + tλ)`.
pub fn prox_sq_l2(lambda: f64, t: f64, x: &Vector) -> Vector {
    x.scaled(1.0 / (1.0 + t * lambda))
}

pub fn project_box(lo: &Vector, hi: &Vector, x: &Vector) -> Vector {
    Vector::from_fn(x.dim(), |i| x[i].max(lo[i]).min(hi[i]))
}

pub fn project_l2_ball(radius: f64, center: &Vector, x: &Vector) -> Vector {
    let offset = x - center;
    let d = offset.norm();
    if d <= radius {
        x.clone()
    } else {
        center.axpy(radius / d, &offset)
    }
}

/// The `ψ` catalogue. Indicators (`Box`, `L2Ball`) make Algorithm-2 runs
/// projected subgradient methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxSpec {
    Zero,
    L1 { lambda: f64 },
    SqL2 { lambda: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    L2Ball { radius: f64, center: Vec<f64> },
}

impl ProxSpec {
    pub fn l1(lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        Ok(ProxSpec::L1 { lambda })
    }

    pub fn sq_l2(lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        Ok(ProxSpec::SqL2 { lambda })
    }

    pub fn box_set(lo: &Vector, hi: &Vector) -> Result<Self> {
        hi.check_dim(lo.dim())?;
        if let Some(i) = (0..lo.dim()).find(|&i| lo[i] > hi[i]) {
            return Err(Error::invalid(format!(
                "box bounds cross at index {i}: {} > {}",
                lo[i], hi[i]
            )));
        }
        Ok(ProxSpec::Box {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        })
    }

    pub fn l2_ball(radius: f64, center: &Vector) -> Result<Self> {
        positive("radius", radius)?;
        Ok(ProxSpec::L2Ball {
            radius,
            center: center.to_vec(),
        })
    }

    /// Re-runs the constructor checks, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            ProxSpec::Zero => Ok(()),
            ProxSpec::L1 { lambda } | ProxSpec::SqL2 { lambda } => positive("lambda", *lambda),
            ProxSpec::Box { lo, hi } => {
                ProxSpec::box_set(&Vector::from_slice(lo)?, &Vector::from_slice(hi)?).map(|_| ())
            }
            ProxSpec::L2Ball { radius, center } => {
                Vector::from_slice(center)?;
                positive("radius", *radius)
            }
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, ProxSpec::Box { .. } | ProxSpec::L2Ball { .. })
    }

    /// Analytic conjugate `ψ*`.
    pub fn conjugate(&self) -> ProxSpecConjugate {
        ProxSpecConjugate(self.clone())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

fn as_vector(c: &[f64]) -> Vector {
    Vector::from_fn(c.len(), |i| c[i])
}

impl ProxOracle for ProxSpec {
    fn value(&self, x: &Vector) -> ExtReal {
        match self {
            ProxSpec::Zero => ExtReal::ZERO,
            ProxSpec::L1 { lambda } => ExtReal::Finite(lambda * x.norm_l1()),
            ProxSpec::SqL2 { lambda } => ExtReal::Finite(0.5 * lambda * x.norm_sq()),
            ProxSpec::Box { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(c, (l, h))| l <= c && c <= h);
                if inside {
                    ExtReal::ZERO
                } else {
                    ExtReal::PosInf
                }
            }
            ProxSpec::L2Ball { radius, center } => {
                let d = (x - &as_vector(center)).norm();
                // Projections land on the sphere up to rounding.
                if d <= radius * (1.0 + 1e-12) {
                    ExtReal::ZERO
                } else {
                    ExtReal::PosInf
                }
            }
        }
    }

    fn prox(&self, t: f64, x: &Vector) -> Vector {
        match self {
            ProxSpec::Zero => x.clone(),
            ProxSpec::L1 { lambda } => prox_l1(*lambda, t, x),
            ProxSpec::SqL2 { lambda } => prox_sq_l2(*lambda, t, x),
            ProxSpec::Box { lo, hi } => project_box(&as_vector(lo), &as_vector(hi), x),
            ProxSpec::L2Ball { radius, center } => project_l2_ball(*radius, &as_vector(center), x),
        }
    }
}

/// `ψ*` for a [`ProxSpec`].
#[derive(Clone, Debug)]
pub struct ProxSpecConjugate(ProxSpec);

impl ConjugateOracle for ProxSpecConjugate {
    fn conj_value(&self, z: &Vector) -> ExtReal {
        match &self.0 {
            // Conjugate of 0 is the indicator of {0}.
            ProxSpec::Zero => {
                if z.iter().all(|&c| c == 0.0) {
                    ExtReal::ZERO
                } else {
                    ExtReal::PosInf
                }
            }
            ProxSpec::L1 { lambda } => conjugate_l1(*lambda, z),
            ProxSpec::SqL2 { lambda } => ExtReal::Finite(z.norm_sq() / (2.0 * lambda)),
            ProxSpec::Box { lo, hi } => {
                ExtReal::Finite(support_box(&as_vector(lo), &as_vector(hi), z))
            }
            ProxSpec::L2Ball { radius, center } => {
                ExtReal::Finite(z.dot(&as_vector(center)) + radius * z.norm())
            }
        }
    }

    fn kind(&self) -> ConjugateKind {
        ConjugateKind::Analytic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    /// 1D grid argmin of `h(y) + (x − y)²/(2t)` on `[lo, hi]`.
    fn grid_argmin_1d(h: impl Fn(f64) -> f64, t: f64, x: f64, lo: f64, hi: f64, n: usize) -> f64 {
        let step = (hi - lo) / (n - 1) as f64;
        (0..n)
            .map(|i| lo + i as f64 * step)
            .map(|y| (y, h(y) + (x - y).powi(2) / (2.0 * t)))
            .fold((f64::NAN, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
            .0
    }

    #[test]
    fn soft_threshold_examples() {
        // Grid oracle for the first example, frozen as 2.
        let brute = grid_argmin_1d(|y| y.abs(), 1.0, 3.0, -5.0, 5.0, 100_001);
        assert!((brute - 2.0).abs() < 1e-4);
        assert_eq!(prox_l1(1.0, 1.0, &v(&[3.0])), v(&[2.0]));
        assert_eq!(prox_l1(1.0, 1.0, &v(&[0.0])), v(&[0.0]));

        let b0 = grid_argmin_1d(|y| 2.0 * y.abs(), 0.5, -3.0, -5.0, 5.0, 100_001);
        let b1 = grid_argmin_1d(|y| 2.0 * y.abs(), 0.5, 0.5, -5.0, 5.0, 100_001);
        assert!((b0 + 2.0).abs() < 1e-4 && b1.abs() < 1e-4);
        assert_eq!(prox_l1(2.0, 0.5, &v(&[-3.0, 0.5])), v(&[-2.0, 0.0]));
    }

    #[test]
    fn soft_threshold_tie_maps_to_zero() {
        assert_eq!(prox_l1(1.0, 0.5, &v(&[0.5, -0.5])), v(&[0.0, 0.0]));
    }

    #[test]
    fn box_projection_examples() {
        assert_eq!(project_box(&v(&[0.0]), &v(&[1.0]), &v(&[1.5])), v(&[1.0]));
        assert_eq!(
            project_box(&v(&[0.0, 0.0]), &v(&[1.0, 1.0]), &v(&[0.3, 0.7])),
            v(&[0.3, 0.7])
        );
        assert_eq!(project_box(&v(&[-1.0]), &v(&[1.0]), &v(&[-9.0])), v(&[-1.0]));
        // Degenerate box is a constant map.
        assert_eq!(project_box(&v(&[2.0]), &v(&[2.0]), &v(&[-9.0])), v(&[2.0]));
    }

    #[test]
    fn ball_projection_examples() {
        let p = project_l2_ball(1.0, &v(&[0.0, 0.0]), &v(&[3.0, 4.0]));
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert_eq!(project_l2_ball(2.0, &v(&[0.0]), &v(&[1.0])), v(&[1.0]));

        // Brute force: nearest point on a fine polar grid of the disk around (1, 0).
        let target = (3.0, 0.0);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for ri in 0..=200 {
            let r = ri as f64 / 200.0;
            for ai in 0..720 {
                let a = ai as f64 * std::f64::consts::PI / 360.0;
                let (px, py) = (1.0 + r * a.cos(), r * a.sin());
                let d = (px - target.0).powi(2) + (py - target.1).powi(2);
                if d < best.0 {
                    best = (d, px, py);
                }
            }
        }
        assert!((best.1 - 2.0).abs() < 1e-9 && best.2.abs() < 1e-9);
        assert_eq!(project_l2_ball(1.0, &v(&[1.0, 0.0]), &v(&[3.0, 0.0])), v(&[2.0, 0.0]));
    }

    #[test]
    fn sq_l2_examples() {
        // Stationarity of ½y² + (2 − y)²/2 gives y = 1.
        let brute = grid_argmin_1d(|y| 0.5 * y * y, 1.0, 2.0, -5.0, 5.0, 100_001);
        assert!((brute - 1.0).abs() < 1e-4);
        assert_eq!(prox_sq_l2(1.0, 1.0, &v(&[2.0])), v(&[1.0]));

        let p = prox_sq_l2(1.0, 1e-9, &v(&[2.0]));
        assert!((p[0] - 2.0).abs() < 1e-8);

        let b0 = grid_argmin_1d(|y| 1.5 * y * y, 1.0, 4.0, -10.0, 10.0, 200_001);
        let b1 = grid_argmin_1d(|y| 1.5 * y * y, 1.0, -8.0, -10.0, 10.0, 200_001);
        assert!((b0 - 1.0).abs() < 1e-4 && (b1 + 2.0).abs() < 1e-4);
        assert_eq!(prox_sq_l2(3.0, 1.0, &v(&[4.0, -8.0])), v(&[1.0, -2.0]));
    }

    #[test]
    fn zero_prox_is_identity() {
        let x = v(&[1.25, -3.5, 0.0]);
        assert_eq!(ProxSpec::Zero.prox(0.3, &x), x);
        assert_eq!(ProxSpec::Zero.prox(7.0, &x), x);
    }

    #[test]
    fn constructors_validate() {
        assert!(ProxSpec::l1(0.0).is_err());
        assert!(ProxSpec::sq_l2(-1.0).is_err());
        assert!(ProxSpec::l2_ball(0.0, &v(&[0.0])).is_err());
        assert!(ProxSpec::box_set(&v(&[1.0]), &v(&[0.0])).is_err());
        assert!(ProxSpec::box_set(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
        assert!(ProxSpec::box_set(&v(&[1.0]), &v(&[1.0])).is_ok());
    }

    #[test]
    fn indicator_values() {
        let b = ProxSpec::box_set(&v(&[0.0]), &v(&[1.0])).unwrap();
        assert_eq!(b.value(&v(&[0.5])), ExtReal::ZERO);
        assert_eq!(b.value(&v(&[1.5])), ExtReal::PosInf);
        let ball = ProxSpec::l2_ball(1.0, &v(&[0.0, 0.0])).unwrap();
        let p = ball.prox(1.0, &v(&[30.0, 40.0]));
        assert_eq!(ball.value(&p), ExtReal::ZERO);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ProxSpec::box_set(&v(&[0.0, -1.0]), &v(&[1.0, 1.0])).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"box\""));
        let back: ProxSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
