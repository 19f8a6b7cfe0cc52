//! Right-hand sides of the certificate inequalities and the closed-form
//! rate bounds they imply.

use crate::error::{Error, Result};
use crate::vecspace::{ConjugateOracle, ExtReal, Vector};

use super::state::{CertStateThm1, CertStateThm2, CertStateProp1};

/// `−f*(z) + ⟨z, x_0⟩ − (w/2)‖z‖²`. An infinite conjugate value yields
/// `+∞`, which callers treat as a vacuous bound.
pub fn rhs_conjugate_form(fstar: &dyn ConjugateOracle, z: &Vector, weight: f64, x0: &Vector) -> f64 {
    match fstar.conj_value(z) {
        ExtReal::PosInf => f64::INFINITY,
        ExtReal::Finite(c) => -c + z.dot(x0) - 0.5 * weight * z.norm_sq(),
    }
}

/// `−f*(z_k) + ⟨z_k, x_0⟩ − (S_k/2)‖z_k‖²`
pub fn rhs_thm1(state: &CertStateThm1, fstar: &dyn ConjugateOracle, x0: &Vector) -> f64 {
    rhs_conjugate_form(fstar, state.z(), state.s(), x0)
}

/// Upper bound on `f(x_k) − f̄`:
/// `−R_k(f*(z_k/R_k) + f̄) + ⟨z_k, x_0⟩ − ‖z_k‖²/(2μ_k)`.
pub fn rhs_thm2(state: &CertStateThm2, fstar: &dyn ConjugateOracle, f_bar: f64, x0: &Vector) -> f64 {
    let r = state.r();
    let z = state.z();
    match fstar.conj_value(&z.scaled(1.0 / r)) {
        ExtReal::PosInf => f64::INFINITY,
        ExtReal::Finite(c) => -r * (c + f_bar) + z.dot(x0) - 0.5 * z.norm_sq() / state.mu(),
    }
}

/// `−f*(z_k) + ⟨z_k, x_0⟩ − (Σt_i/2)‖z_k‖²` for the subgradient method.
pub fn rhs_prop1(state: &CertStateProp1, fstar: &dyn ConjugateOracle, x0: &Vector) -> f64 {
    rhs_conjugate_form(fstar, state.z(), state.t_sum(), x0)
}

/// `f_ref + ‖x_ref − x_0‖²/(2S)`
pub fn rhs_distance(s: f64, x_ref: &Vector, f_ref: f64, x0: &Vector) -> Result<f64> {
    x_ref.check_dim(x0.dim())?;
    if !(s > 0.0) {
        return Err(Error::invalid(format!("weight sum must be positive, got {s}")));
    }
    Ok(f_ref + (x_ref - x0).norm_sq() / (2.0 * s))
}

/// `f_ref + dist²/(2S)`: the distance bound evaluated at a nearest optimum.
pub fn rhs_distance_at_optimum(s: f64, dist: f64, f_ref: f64) -> f64 {
    f_ref + dist * dist / (2.0 * s)
}

/// `L·dist²/(2k)`
pub fn rate_prox_grad(l: f64, dist: f64, k: usize) -> f64 {
    l * dist * dist / (2.0 * k as f64)
}

/// `2L·dist²/(k+1)²`
pub fn rate_accel(l: f64, dist: f64, k: usize) -> f64 {
    let kp = (k + 1) as f64;
    2.0 * l * dist * dist / (kp * kp)
}

/// `θ_{k−1}²·dist²/(2t_{k−1})`
pub fn bound_thm2_final(theta_prev: f64, t_prev: f64, dist: f64) -> f64 {
    theta_prev * theta_prev * dist * dist / (2.0 * t_prev)
}

/// Rate bounds of the projected subgradient method after iteration `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgradRateRow {
    pub k: usize,
    /// `min_{i≤k} (φ(x_i) − φ̄)`
    pub min_gap: f64,
    /// `Σ_{i≤k} t_i (φ(x_i) − φ̄)`
    pub weighted_gap: f64,
    /// `(Σ t_i²‖g^φ_i‖² + dist²)/2`
    pub rhs_weighted: f64,
    /// `(Σ t_i² L² + dist²)/(2Σ t_i)`, when a Lipschitz bound is known.
    pub rhs_lipschitz: Option<f64>,
    /// `L(Σ α_i² + dist²)/(2Σ α_i)` with `α_i = t_i‖g^φ_i‖`; `None` without
    /// a Lipschitz bound or once some `g^φ_i = 0`.
    pub rhs_normalized: Option<f64>,
    /// Some `g^φ_i` vanished: `x_i` is optimal.
    pub early_optimal: bool,
}

/// Evaluates the subgradient rate bounds for every prefix of a run given
/// per-iteration `(t_i, ‖g^φ_i‖, φ(x_i))`.
pub fn subgrad_rates(
    iterations: &[(f64, f64, f64)],
    phi_bar: f64,
    lipschitz: Option<f64>,
    dist: f64,
) -> Vec<SubgradRateRow> {
    let d2 = dist * dist;
    let (mut st, mut st2g2, mut st2, mut sa, mut sa2, mut wgap) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut min_gap = f64::INFINITY;
    let mut early = false;
    let mut out = Vec::with_capacity(iterations.len());
    for (k, &(t, gn, phi)) in iterations.iter().enumerate() {
        let gap = phi - phi_bar;
        min_gap = min_gap.min(gap);
        wgap += t * gap;
        st += t;
        st2 += t * t;
        st2g2 += t * t * gn * gn;
        let a = t * gn;
        sa += a;
        sa2 += a * a;
        early |= gn == 0.0;
        out.push(SubgradRateRow {
            k,
            min_gap,
            weighted_gap: wgap,
            rhs_weighted: 0.5 * (st2g2 + d2),
            rhs_lipschitz: lipschitz.map(|l| (st2 * l * l + d2) / (2.0 * st)),
            rhs_normalized: match lipschitz {
                Some(l) if !early => Some(l * (sa2 + d2) / (2.0 * sa)),
                _ => None,
            },
            early_optimal: early,
        });
    }
    out
}

/// `(Σ α_i² + dist²)/(2Σ α_i)`
pub fn steep_level(alphas: &[f64], dist: f64) -> Result<f64> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::invalid("step lengths must be positive and finite"));
    }
    let s: f64 = alphas.iter().sum();
    let s2: f64 = alphas.iter().map(|a| a * a).sum();
    Ok((s2 + dist * dist) / (2.0 * s))
}

const MONOTONE_SAMPLES: usize = 1000;
const SCAN_POINTS: usize = 1_000_000;

/// `sup{t ∈ [0, T_max] : t/𝓛(t) ≤ B}` with `B = (Σα_i² + dist²)/(2Σα_i)`.
///
/// Bisection is used when `t/𝓛(t)` is nondecreasing on 1000 samples of
/// `(0, T_max]`, otherwise a scan at resolution `T_max/10⁶`. Reaching
/// `T_max` is an error: the true supremum may be larger.
pub fn steep_bound(steepness: &dyn Fn(f64) -> f64, alphas: &[f64], dist: f64, t_max: f64) -> Result<f64> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid(format!("T_max must be positive and finite, got {t_max}")));
    }
    let b = steep_level(alphas, dist)?;
    let ratio = |t: f64| t / steepness(t);
    let fits = |t: f64| ratio(t) <= b;

    let samples: Vec<f64> = (1..=MONOTONE_SAMPLES)
        .map(|j| ratio(t_max * j as f64 / MONOTONE_SAMPLES as f64))
        .collect();
    if samples.iter().any(|r| r.is_nan()) {
        return Err(Error::invalid("steepness function must be positive on (0, T_max]"));
    }
    let monotone = samples.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));

    if monotone {
        if fits(t_max) {
            return Err(Error::SteepBoundCap { t_max });
        }
        let (mut lo, mut hi) = (0.0f64, t_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(lo);
    }
    let best = (1..=SCAN_POINTS)
        .map(|j| t_max * j as f64 / SCAN_POINTS as f64)
        .filter(|&t| fits(t))
        .fold(0.0, f64::max);
    if best >= t_max {
        return Err(Error::SteepBoundCap { t_max });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecspace::{ConjugateFn, ConjugateKind};

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    fn half_sq_conj() -> ConjugateFn {
        ConjugateFn::new(ConjugateKind::Analytic, |z: &Vector| ExtReal::Finite(0.5 * z.norm_sq()))
    }

    #[test]
    fn rhs_thm1_hand_example() {
        // φ = ½x², x_0 = 1, one step t = 1: z_1 = 1, S_1 = 1 → RHS = 0.
        let mut s = CertStateThm1::new(1, super::super::state::LhsMode::CaseA);
        s.update(1.0, 1.0, &v(&[1.0]), 0.0).unwrap();
        assert_eq!(rhs_thm1(&s, &half_sq_conj(), &v(&[1.0])), 0.0);
    }

    #[test]
    fn rhs_at_zero_is_min_value() {
        let fstar = ConjugateFn::new(ConjugateKind::Analytic, |z: &Vector| ExtReal::Finite(0.5 * z.norm_sq() - 2.0));
        assert_eq!(rhs_conjugate_form(&fstar, &v(&[0.0]), 5.0, &v(&[3.0])), 2.0);
    }

    #[test]
    fn infinite_conjugate_is_vacuous() {
        let fstar = ConjugateFn::new(ConjugateKind::Analytic, |_: &Vector| ExtReal::PosInf);
        assert_eq!(rhs_conjugate_form(&fstar, &v(&[1.0]), 1.0, &v(&[0.0])), f64::INFINITY);
    }

    #[test]
    fn distance_examples() {
        let x0 = v(&[1.0, 2.0]);
        assert_eq!(rhs_distance(3.0, &x0, 7.0, &x0).unwrap(), 7.0);
        assert!((rhs_distance(1e12, &v(&[0.0, 0.0]), 7.0, &x0).unwrap() - 7.0).abs() < 1e-11);
        assert!(rhs_distance(0.0, &x0, 7.0, &x0).is_err());
        // S_k = k/L reproduces L·dist²/(2k).
        let (l, k) = (4.0, 10);
        let lhs = rhs_distance(k as f64 / l, &v(&[0.0, 0.0]), 0.0, &v(&[3.0, 4.0])).unwrap();
        assert!((lhs - rate_prox_grad(l, 5.0, k)).abs() < 1e-14);
    }

    #[test]
    fn rate_formulas() {
        assert_eq!(rate_prox_grad(1.0, 1.0, 1), 0.5);
        assert_eq!(rate_prox_grad(2.0, 0.0, 9), 0.0);
        assert_eq!(rate_prox_grad(1.0, 2.0, 8), 0.25);
        assert_eq!(rate_accel(1.0, 1.0, 1), 0.5);
        assert_eq!(rate_accel(1.0, 1.0, 3), 0.125);
        assert_eq!(rate_accel(3.0, 0.0, 3), 0.0);
        assert_eq!(bound_thm2_final(1.0, 1.0, 1.0), 0.5);
    }

    #[test]
    fn thm2_final_bound_against_accel_rate() {
        let l = 2.0;
        let th2 = crate::schedules::next_theta_fista(crate::schedules::next_theta_fista(1.0));
        let b = bound_thm2_final(th2, 1.0 / l, 1.5);
        assert!(b <= l * th2 * th2 * 1.5 * 1.5 / 2.0 + 1e-15);
        assert!(b <= rate_accel(l, 1.5, 3) + 1e-15);
    }

    #[test]
    fn subgrad_rates_zero_subgradients() {
        let rows = subgrad_rates(&[(0.1, 0.0, 1.0); 5], 1.0, Some(1.0), 0.0);
        for r in &rows {
            assert_eq!(r.min_gap, 0.0);
            assert!(r.early_optimal);
            assert_eq!(r.rhs_normalized, None);
            assert!(r.min_gap <= r.rhs_lipschitz.unwrap());
        }
    }

    #[test]
    fn subgrad_rates_constant_horizon_step() {
        // t_i = dist/(L√(k+1)) over a horizon of k+1 steps gives L·dist/√(k+1).
        let (l, d, n) = (2.0, 3.0, 100);
        let t = d / (l * (n as f64).sqrt());
        let rows = subgrad_rates(&vec![(t, l, 5.0); n], 4.0, Some(l), d);
        let last = rows.last().unwrap();
        assert!((last.rhs_lipschitz.unwrap() - l * d / (n as f64).sqrt()).abs() < 1e-12);
        assert!((last.rhs_normalized.unwrap() - l * d / (n as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn steep_constant_recovers_normalized_bound() {
        let alphas: Vec<f64> = (0..50).map(|i| 1.0 / ((i + 1) as f64).sqrt()).collect();
        let (l, d) = (3.0, 1.7);
        let got = steep_bound(&|_| l, &alphas, d, 1e6).unwrap();
        let want = l * steep_level(&alphas, d).unwrap();
        assert!((got - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn steep_sqrt_closed_form() {
        let alphas = [0.5, 0.25, 0.125];
        let b = steep_level(&alphas, 2.0).unwrap();
        let got = steep_bound(&|t: f64| t.sqrt(), &alphas, 2.0, 1e4).unwrap();
        assert!((got - b * b).abs() <= 1e-12 * b * b);
    }

    #[test]
    fn steep_unit_ratio() {
        // t/𝓛(t) ≡ 1: empty set when B < 1, the whole range when B ≥ 1.
        assert_eq!(steep_bound(&|t| t, &[0.5], 0.5, 10.0).unwrap(), 0.0);
        assert!(matches!(steep_bound(&|t| t, &[1.0], 2.0, 10.0), Err(Error::SteepBoundCap { .. })));
    }

    #[test]
    fn steep_non_monotone_falls_back_to_scan() {
        // t/𝓛(t) = 1 + sin²(t) is non-monotone on [0, 8]; the last crossing
        // of 1.5 below T_max = 8 is at 9π/4.
        let l = |t: f64| t / (1.0 + t.sin().powi(2));
        let b = 1.5;
        // Pick α so that the level equals b: (α² + d²)/(2α) with α = 1, d² = 2.
        let got = steep_bound(&l, &[1.0], 2f64.sqrt(), 8.0).unwrap();
        let mut want = 0.0;
        for j in 1..=1_000_000 {
            let t = 8.0 * j as f64 / 1e6;
            if 1.0 + t.sin().powi(2) <= b {
                want = t;
            }
        }
        assert_eq!(got, want);
        assert!((got - 9.0 * std::f64::consts::FRAC_PI_4).abs() < 1e-5);
    }

    #[test]
    fn steep_rejects_bad_input() {
        assert!(steep_bound(&|_| 1.0, &[], 1.0, 1.0).is_err());
        assert!(steep_bound(&|_| 1.0, &[0.0], 1.0, 1.0).is_err());
        assert!(steep_bound(&|_| 1.0, &[1.0], 1.0, 0.0).is_err());
    }
}
