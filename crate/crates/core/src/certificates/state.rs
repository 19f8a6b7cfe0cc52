//! Running dual sequences `z_k` for the two proximal gradient theorems and
//! for the proximal subgradient proposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecspace::Vector;

/// Relative tolerance for the partial-sum identity `S_k = (1 − θ_k) S_{k+1}`.
pub const PARTIAL_SUM_TOL: f64 = 1e-9;

/// Largest tolerated shortfall of `ρ_k` below one.
pub const RHO_TOL: f64 = 1e-12;

/// Which left-hand side the first theorem certifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LhsMode {
    /// `θ ≡ 1`: the `t`-weighted average of `f(x_1), …, f(x_k)`.
    CaseA,
    /// Partial-sum identity holds: `f(x_k)`.
    CaseB,
}

/// `z_k = Σ_{i<k} (t_i/θ_i) g_i / S_k` with `S_k = Σ_{i<k} t_i/θ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CertStateThm1 {
    k: usize,
    s: f64,
    weighted_g: Vector,
    z: Vector,
    gamma: f64,
    mode: LhsMode,
    coeffs: Vec<f64>,
    t_sum: f64,
    tf_sum: f64,
    lhs: f64,
}

impl CertStateThm1 {
    pub fn new(dim: usize, mode: LhsMode) -> Self {
        CertStateThm1 {
            k: 0,
            s: 0.0,
            weighted_g: Vector::zeros(dim),
            z: Vector::zeros(dim),
            gamma: 1.0,
            mode,
            coeffs: Vec::new(),
            t_sum: 0.0,
            tf_sum: 0.0,
            lhs: f64::NAN,
        }
    }

    /// Absorbs iteration `k`: step `t_k`, `θ_k`, `g_k` and `f(x_{k+1})`.
    pub fn update(&mut self, t: f64, theta: f64, g: &Vector, f_next: f64) -> Result<()> {
        g.check_dim(self.weighted_g.dim())?;
        if !(t > 0.0) || !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid(format!("need t > 0 and θ in (0, 1], got t = {t}, θ = {theta}")));
        }
        let c = t / theta;
        let s_next = self.s + c;
        match self.mode {
            LhsMode::CaseA if theta != 1.0 => {
                return Err(Error::Hypothesis(format!(
                    "case (a) needs θ_k = 1, got θ_{} = {theta}",
                    self.k
                )));
            }
            LhsMode::CaseB => {
                let gap = (self.s - (1.0 - theta) * s_next).abs();
                if gap > PARTIAL_SUM_TOL * s_next {
                    return Err(Error::Hypothesis(format!(
                        "case (b) needs S_k = (1 − θ_k) S_(k+1); off by {gap:e} at k = {}",
                        self.k
                    )));
                }
            }
            _ => {}
        }
        self.gamma = c / s_next;
        self.s = s_next;
        self.weighted_g = self.weighted_g.axpy(c, g);
        self.z = self.weighted_g.scaled(1.0 / s_next);
        self.coeffs.push(c);
        self.t_sum += t;
        self.tf_sum += t * f_next;
        self.lhs = match self.mode {
            LhsMode::CaseA => self.tf_sum / self.t_sum,
            LhsMode::CaseB => f_next,
        };
        self.k += 1;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> LhsMode {
        self.mode
    }

    /// `S_k`
    pub fn s(&self) -> f64 {
        self.s
    }

    /// `μ_k = 1/S_k`
    pub fn mu(&self) -> f64 {
        1.0 / self.s
    }

    /// Mixing weight of the latest update, `γ = (t_k/θ_k)/S_{k+1}`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn z(&self) -> &Vector {
        &self.z
    }

    pub fn weighted_g(&self) -> &Vector {
        &self.weighted_g
    }

    pub fn lhs(&self) -> f64 {
        self.lhs
    }

    /// Convex-combination weights of `g_0, …, g_{k−1}` in `z_k`.
    pub fn weights(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c / self.s).collect()
    }
}

/// `z_k = (θ_{k−1}²/t_{k−1}) Σ_{i<k} (t_i/θ_i) g_i`, maintained by the
/// recursions `z_{k+1} = ρ_k(1 − θ_k) z_k + θ_k g_k`,
/// `μ_{k+1} = ρ_k(1 − θ_k) μ_k`, `R_{k+1} = ρ_k R_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CertStateThm2 {
    k: usize,
    z: Vector,
    mu: f64,
    r: f64,
    rho: f64,
    t_prev: f64,
    theta_prev: f64,
}

impl CertStateThm2 {
    pub fn new(dim: usize) -> Self {
        CertStateThm2 {
            k: 0,
            z: Vector::zeros(dim),
            mu: f64::NAN,
            r: 1.0,
            rho: 1.0,
            t_prev: f64::NAN,
            theta_prev: f64::NAN,
        }
    }

    /// `ρ_k = (t_{k−1}/t_k) · θ_k² / (θ_{k−1}² (1 − θ_k))`
    pub fn rho_of(t_prev: f64, t: f64, theta_prev: f64, theta: f64) -> f64 {
        (t_prev / t) * theta * theta / (theta_prev * theta_prev * (1.0 - theta))
    }

    /// Absorbs iteration `k`: step `t_k`, `θ_k` and `g_k`.
    pub fn update(&mut self, t: f64, theta: f64, g: &Vector) -> Result<()> {
        g.check_dim(self.z.dim())?;
        if !(t > 0.0) || !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid(format!("need t > 0 and θ in (0, 1], got t = {t}, θ = {theta}")));
        }
        if self.k == 0 {
            if theta != 1.0 {
                return Err(Error::Hypothesis(format!("θ_0 must be 1, got {theta}")));
            }
            self.z = g.clone();
            self.mu = 1.0 / t;
        } else {
            if theta == 1.0 {
                return Err(Error::Hypothesis(format!(
                    "ρ_{} is undefined when θ_{} = 1",
                    self.k, self.k
                )));
            }
            let rho = Self::rho_of(self.t_prev, t, self.theta_prev, theta);
            if !(rho >= 1.0 - RHO_TOL) {
                return Err(Error::Hypothesis(format!(
                    "ρ_{} = {rho} < 1: the θ or t sequence violates the theorem's conditions",
                    self.k
                )));
            }
            let shrink = rho * (1.0 - theta);
            self.z = self.z.scaled(shrink).axpy(theta, g);
            self.mu *= shrink;
            self.r *= rho;
            self.rho = rho;
        }
        self.t_prev = t;
        self.theta_prev = theta;
        self.k += 1;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn z(&self) -> &Vector {
        &self.z
    }

    /// `μ_k = θ_{k−1}²/t_{k−1}`
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Latest ratio `R_k/R_{k−1}` (1 before the second update).
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    pub fn theta_prev(&self) -> f64 {
        self.theta_prev
    }
}

/// `z_k = Σ_{i≤k} t_i g_i / Σ_{i≤k} t_i` and the left-hand side of the
/// subgradient bound.
#[derive(Clone, Debug, PartialEq)]
pub struct CertStateProp1 {
    k: usize,
    t_sum: f64,
    weighted_g: Vector,
    z: Vector,
    numerator: f64,
}

impl CertStateProp1 {
    pub fn new(dim: usize) -> Self {
        CertStateProp1 {
            k: 0,
            t_sum: 0.0,
            weighted_g: Vector::zeros(dim),
            z: Vector::zeros(dim),
            numerator: 0.0,
        }
    }

    /// Absorbs iteration `k`: `t_k`, `g_k`, `‖g^φ_k‖`, `φ(x_k)` and `ψ(x_{k+1})`.
    pub fn update(&mut self, t: f64, g: &Vector, norm_gphi: f64, phi_x: f64, psi_next: f64) -> Result<()> {
        g.check_dim(self.z.dim())?;
        if !(t > 0.0) {
            return Err(Error::invalid(format!("step must be positive, got {t}")));
        }
        self.t_sum += t;
        self.weighted_g = self.weighted_g.axpy(t, g);
        self.z = self.weighted_g.scaled(1.0 / self.t_sum);
        self.numerator += t * (phi_x + psi_next) - 0.5 * t * t * norm_gphi * norm_gphi;
        self.k += 1;
        Ok(())
    }

    /// Number of absorbed iterations (the bound's index plus one).
    pub fn count(&self) -> usize {
        self.k
    }

    pub fn t_sum(&self) -> f64 {
        self.t_sum
    }

    pub fn z(&self) -> &Vector {
        &self.z
    }

    pub fn lhs(&self) -> f64 {
        self.numerator / self.t_sum
    }
}
