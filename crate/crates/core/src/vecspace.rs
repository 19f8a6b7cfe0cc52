//! Dense vectors, extended reals, first-order oracles and the composite
//! objective `f = φ + ψ`.
//!
//! Oracles are immutable trait objects shared through `Arc`, so one objective
//! can back any number of concurrent solver runs.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Rⁿ` with finite components.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(DVector<f64>);

impl Vector {
    /// Builds a vector, rejecting NaN and infinite components.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Vector(DVector::from_vec(components)))
    }

    pub fn from_slice(components: &[f64]) -> Result<Self> {
        Self::new(components.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(DVector::zeros(dim))
    }

    pub fn from_element(dim: usize, value: f64) -> Self {
        Vector(DVector::from_element(dim, value))
    }

    /// Wraps an already computed vector. Finiteness is the caller's problem.
    pub(crate) fn from_dvector(v: DVector<f64>) -> Self {
        Vector(v)
    }

    pub(crate) fn from_fn(dim: usize, mut f: impl FnMut(usize) -> f64) -> Self {
        Vector(DVector::from_fn(dim, |i, _| f(i)))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Unchecked inner product; dimensions are validated upstream.
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.dot(&other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.amax()
    }

    pub fn norm_l1(&self) -> f64 {
        self.0.lp_norm(1)
    }

    pub fn scaled(&self, a: f64) -> Vector {
        Vector(&self.0 * a)
    }

    /// `self + a·x`
    pub fn axpy(&self, a: f64, x: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), x.dim());
        let mut out = self.0.clone();
        out.axpy(a, &x.0, 1.0);
        Vector(out)
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Vector {
        Vector(self.0.map(f))
    }

    pub fn zip_map(&self, other: &Vector, mut f: impl FnMut(f64, f64) -> f64) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.zip_map(&other.0, |a, b| f(a, b)))
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            })
        }
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add<&Vector> for &Vector {
    type Output = Vector;

    fn add(self, rhs: &Vector) -> Vector {
        Vector(&self.0 + &rhs.0)
    }
}

impl Sub<&Vector> for &Vector {
    type Output = Vector;

    fn sub(self, rhs: &Vector) -> Vector {
        Vector(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &Vector {
    type Output = Vector;

    fn mul(self, rhs: f64) -> Vector {
        Vector(&self.0 * rhs)
    }
}

impl Neg for &Vector {
    type Output = Vector;

    fn neg(self) -> Vector {
        Vector(-&self.0)
    }
}

/// `⟨a, b⟩`, erroring on mismatched dimensions.
pub fn inner(a: &Vector, b: &Vector) -> Result<f64> {
    b.check_dim(a.dim())?;
    Ok(a.dot(b))
}

pub fn norm_sq(a: &Vector) -> f64 {
    a.norm_sq()
}

/// Value of a closed proper convex function: a real number or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Lowers to `f64`, mapping `+∞` to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn scale(self, a: f64) -> ExtReal {
        debug_assert!(a > 0.0);
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(a * v),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        debug_assert!(!v.is_nan() && v != f64::NEG_INFINITY);
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: f64) -> ExtReal {
        self + ExtReal::Finite(rhs)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "+inf"),
        }
    }
}

/// Differentiable convex `φ` (or, for subgradient methods, a convex `φ` with a
/// subgradient selection returned by `gradient`).
pub trait SmoothOracle: Send + Sync {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Lipschitz constant of the gradient, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// Closed convex `ψ` with a computable proximal map
/// `prox(t, x) = argmin_y ψ(y) + ‖x − y‖²/(2t)`.
pub trait ProxOracle: Send + Sync {
    fn value(&self, x: &Vector) -> ExtReal;
    fn prox(&self, t: f64, x: &Vector) -> Vector;
}

/// How a conjugate value is obtained. Non-analytic kinds never overestimate
/// the true conjugate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConjugateKind {
    Analytic,
    NumericGrid,
    DualSolve,
}

impl fmt::Display for ConjugateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConjugateKind::Analytic => "analytic",
            ConjugateKind::NumericGrid => "numeric-grid",
            ConjugateKind::DualSolve => "dual-solve",
        })
    }
}

/// `h*(z) = sup_x ⟨z, x⟩ − h(x)`
pub trait ConjugateOracle: Send + Sync {
    fn conj_value(&self, z: &Vector) -> ExtReal;
    fn kind(&self) -> ConjugateKind;
}

type ValueFn = dyn Fn(&Vector) -> f64 + Send + Sync;
type GradFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type ExtValueFn = dyn Fn(&Vector) -> ExtReal + Send + Sync;
type ProxFnInner = dyn Fn(f64, &Vector) -> Vector + Send + Sync;

/// Closure-backed [`SmoothOracle`].
pub struct SmoothFn {
    value: Box<ValueFn>,
    gradient: Box<GradFn>,
    lipschitz: Option<f64>,
}

impl SmoothFn {
    pub fn new(
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        SmoothFn {
            value: Box::new(value),
            gradient: Box::new(gradient),
            lipschitz: None,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }
}

impl SmoothOracle for SmoothFn {
    fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// Closure-backed [`ProxOracle`].
pub struct ProxFn {
    value: Box<ExtValueFn>,
    prox: Box<ProxFnInner>,
}

impl ProxFn {
    pub fn new(
        value: impl Fn(&Vector) -> ExtReal + Send + Sync + 'static,
        prox: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        ProxFn {
            value: Box::new(value),
            prox: Box::new(prox),
        }
    }
}

impl ProxOracle for ProxFn {
    fn value(&self, x: &Vector) -> ExtReal {
        (self.value)(x)
    }

    fn prox(&self, t: f64, x: &Vector) -> Vector {
        (self.prox)(t, x)
    }
}

/// Closure-backed [`ConjugateOracle`].
pub struct ConjugateFn {
    conj: Box<ExtValueFn>,
    kind: ConjugateKind,
}

impl ConjugateFn {
    pub fn new(
        kind: ConjugateKind,
        conj: impl Fn(&Vector) -> ExtReal + Send + Sync + 'static,
    ) -> Self {
        ConjugateFn {
            conj: Box::new(conj),
            kind,
        }
    }
}

impl ConjugateOracle for ConjugateFn {
    fn conj_value(&self, z: &Vector) -> ExtReal {
        (self.conj)(z)
    }

    fn kind(&self) -> ConjugateKind {
        self.kind
    }
}

/// `f = φ + ψ` over `Rⁿ` with optional conjugate oracles for `φ`, `ψ` and `f`.
#[derive(Clone)]
pub struct CompositeObjective {
    dim: usize,
    phi: Arc<dyn SmoothOracle>,
    psi: Arc<dyn ProxOracle>,
    phi_conj: Option<Arc<dyn ConjugateOracle>>,
    psi_conj: Option<Arc<dyn ConjugateOracle>>,
    f_conj: Option<Arc<dyn ConjugateOracle>>,
}

impl fmt::Debug for CompositeObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeObjective")
            .field("dim", &self.dim)
            .field("phi_conj", &self.phi_conj.as_ref().map(|c| c.kind()))
            .field("psi_conj", &self.psi_conj.as_ref().map(|c| c.kind()))
            .field("f_conj", &self.f_conj.as_ref().map(|c| c.kind()))
            .finish()
    }
}

impl CompositeObjective {
    /// Dimensions are probed once here (gradient and prox at the origin) so
    /// the solver loops can skip per-call checks.
    pub fn new(
        dim: usize,
        phi: Arc<dyn SmoothOracle>,
        psi: Arc<dyn ProxOracle>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let origin = Vector::zeros(dim);
        phi.gradient(&origin).check_dim(dim)?;
        psi.prox(1.0, &origin).check_dim(dim)?;
        if let Some(l) = phi.lipschitz() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("Lipschitz constant {l} must be positive")));
            }
        }
        Ok(CompositeObjective {
            dim,
            phi,
            psi,
            phi_conj: None,
            psi_conj: None,
            f_conj: None,
        })
    }

    pub fn with_phi_conjugate(mut self, c: Arc<dyn ConjugateOracle>) -> Self {
        self.phi_conj = Some(c);
        self
    }

    pub fn with_psi_conjugate(mut self, c: Arc<dyn ConjugateOracle>) -> Self {
        self.psi_conj = Some(c);
        self
    }

    pub fn with_f_conjugate(mut self, c: Arc<dyn ConjugateOracle>) -> Self {
        self.f_conj = Some(c);
        self
    }

    /// Drops the conjugate of `f`, e.g. when certificates are not needed.
    pub fn without_f_conjugate(mut self) -> Self {
        self.f_conj = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phi(&self) -> &dyn SmoothOracle {
        self.phi.as_ref()
    }

    pub fn psi(&self) -> &dyn ProxOracle {
        self.psi.as_ref()
    }

    pub fn phi_conjugate(&self) -> Option<&dyn ConjugateOracle> {
        self.phi_conj.as_deref()
    }

    pub fn psi_conjugate(&self) -> Option<&dyn ConjugateOracle> {
        self.psi_conj.as_deref()
    }

    pub fn f_conjugate(&self) -> Option<&dyn ConjugateOracle> {
        self.f_conj.as_deref()
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.phi.lipschitz()
    }

    /// `φ(x) + ψ(x)`
    pub fn eval_f(&self, x: &Vector) -> ExtReal {
        self.psi.value(x) + self.phi.value(x)
    }
}

pub fn eval_f(obj: &CompositeObjective, x: &Vector) -> ExtReal {
    obj.eval_f(x)
}

/// Slack `max(abs, rel·|scale|)` used by every self-check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-9, rel: 1e-9 }
    }
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    /// Slack granted to an inequality whose reference side is `scale`.
    pub fn slack(&self, scale: f64) -> f64 {
        self.abs.max(self.rel * scale.abs())
    }

    /// `lhs ≤ rhs` up to the tolerance; `rhs = +∞` always passes.
    pub fn le(&self, lhs: f64, rhs: f64) -> bool {
        rhs == f64::INFINITY || lhs <= rhs + self.slack(rhs)
    }
}

/// Largest violation of `value(y) ≥ value(x) + ⟨g, y − x⟩` over `probes`
/// (non-positive when the inequality holds). Probes where `value` is infinite
/// never violate.
pub fn subgradient_violation(
    value: impl Fn(&Vector) -> ExtReal,
    x: &Vector,
    g: &Vector,
    probes: &[Vector],
) -> f64 {
    let fx = value(x).to_f64();
    probes
        .iter()
        .filter_map(|y| value(y).finite().map(|fy| fx + g.dot(&(y - x)) - fy))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Checks prox optimality: `(x − x⁺)/t` is a subgradient of `ψ` at `x⁺`.
pub fn check_prox_optimality(
    psi: &dyn ProxOracle,
    t: f64,
    x: &Vector,
    probes: &[Vector],
    tol: Tolerance,
) -> Result<()> {
    let xp = psi.prox(t, x);
    let fxp = psi.value(&xp);
    if !fxp.is_finite() {
        return Err(Error::CheckFailed(format!("prox({t}, {x}) left the domain of ψ")));
    }
    let g = (x - &xp).scaled(1.0 / t);
    let worst = subgradient_violation(|y| psi.value(y), &xp, &g, probes);
    if worst > tol.slack(fxp.to_f64()) {
        return Err(Error::CheckFailed(format!(
            "prox optimality violated by {worst:e} at t = {t}, x = {x}"
        )));
    }
    Ok(())
}

/// `‖prox(t,a) − prox(t,b)‖ ≤ ‖a − b‖`
pub fn check_nonexpansive(psi: &dyn ProxOracle, t: f64, a: &Vector, b: &Vector, tol: f64) -> Result<()> {
    let lhs = (&psi.prox(t, a) - &psi.prox(t, b)).norm();
    let rhs = (a - b).norm();
    if lhs > rhs + tol {
        return Err(Error::CheckFailed(format!(
            "prox expands distance: {lhs:e} > {rhs:e}"
        )));
    }
    Ok(())
}

/// Fenchel–Young gap `h*(z) + h(x) − ⟨z, x⟩`; non-negative for a true
/// conjugate pair and zero when `z ∈ ∂h(x)`. Infinite when either side is.
pub fn fenchel_young_gap(h_x: ExtReal, h_star_z: ExtReal, z: &Vector, x: &Vector) -> f64 {
    (h_x + h_star_z).to_f64() - z.dot(x)
}

/// Sampled check of `‖∇φ(a) − ∇φ(b)‖ ≤ L‖a − b‖`.
pub fn check_lipschitz(phi: &dyn SmoothOracle, l: f64, pairs: &[(Vector, Vector)]) -> Result<()> {
    for (a, b) in pairs {
        let lhs = (&phi.gradient(a) - &phi.gradient(b)).norm();
        let rhs = l * (a - b).norm();
        if lhs > rhs * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::CheckFailed(format!(
                "gradient difference {lhs:e} exceeds L‖a−b‖ = {rhs:e}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    #[test]
    fn inner_examples() {
        assert_eq!(inner(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
        assert_eq!(inner(&v(&[0.0, 0.0]), &v(&[5.0, -7.0])).unwrap(), 0.0);
        assert_eq!(inner(&v(&[1.0, -1.0]), &v(&[1.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn inner_rejects_mismatched_dimensions() {
        let err = inner(&v(&[1.0, 2.0]), &v(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 1 }));
    }

    #[test]
    fn norm_sq_examples() {
        assert_eq!(norm_sq(&v(&[3.0, 4.0])), 25.0);
        assert_eq!(norm_sq(&v(&[0.0])), 0.0);
        assert_eq!(norm_sq(&v(&[1.0, 1.0, 1.0, 1.0])), 4.0);
    }

    #[test]
    fn vector_rejects_non_finite() {
        assert!(matches!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn ext_real_arithmetic() {
        let a = ExtReal::Finite(1.5);
        assert_eq!(a + ExtReal::Finite(2.0), ExtReal::Finite(3.5));
        assert_eq!(a + ExtReal::PosInf, ExtReal::PosInf);
        assert_eq!(ExtReal::PosInf + 1.0, ExtReal::PosInf);
        assert!(a < ExtReal::PosInf);
        assert_eq!(ExtReal::from(f64::INFINITY), ExtReal::PosInf);
        assert_eq!(ExtReal::PosInf.to_f64(), f64::INFINITY);
    }

    fn half_sq() -> Arc<dyn SmoothOracle> {
        Arc::new(SmoothFn::new(|x| 0.5 * x.norm_sq(), |x| x.clone()).with_lipschitz(1.0))
    }

    #[test]
    fn eval_f_examples() {
        let zero: Arc<dyn ProxOracle> = Arc::new(ProxFn::new(|_| ExtReal::ZERO, |_, x| x.clone()));
        let obj = CompositeObjective::new(1, half_sq(), zero).unwrap();
        assert_eq!(obj.eval_f(&v(&[2.0])), ExtReal::Finite(2.0));

        let zero_phi: Arc<dyn SmoothOracle> =
            Arc::new(SmoothFn::new(|_| 0.0, |x| Vector::zeros(x.dim())));
        let unit_box: Arc<dyn ProxOracle> = Arc::new(ProxFn::new(
            |x| {
                if x.iter().all(|c| (0.0..=1.0).contains(c)) {
                    ExtReal::ZERO
                } else {
                    ExtReal::PosInf
                }
            },
            |_, x| x.map(|c| c.clamp(0.0, 1.0)),
        ));
        let obj = CompositeObjective::new(1, zero_phi, unit_box).unwrap();
        assert_eq!(obj.eval_f(&v(&[2.0])), ExtReal::PosInf);

        let l1: Arc<dyn ProxOracle> = Arc::new(ProxFn::new(
            |x| ExtReal::Finite(x.norm_l1()),
            |t, x| x.map(|c| c.signum() * (c.abs() - t).max(0.0)),
        ));
        let obj = CompositeObjective::new(2, half_sq(), l1).unwrap();
        assert_eq!(obj.eval_f(&v(&[1.0, -1.0])), ExtReal::Finite(3.0));
    }

    #[test]
    fn construction_validates_dimensions() {
        let wrong: Arc<dyn SmoothOracle> = Arc::new(SmoothFn::new(|_| 0.0, |_| Vector::zeros(3)));
        let zero: Arc<dyn ProxOracle> = Arc::new(ProxFn::new(|_| ExtReal::ZERO, |_, x| x.clone()));
        assert!(matches!(
            CompositeObjective::new(2, wrong, zero),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn tolerance_treats_infinity_as_vacuous() {
        let tol = Tolerance::default();
        assert!(tol.le(1e300, f64::INFINITY));
        assert!(tol.le(1.0 + 1e-10, 1.0));
        assert!(!tol.le(1.0 + 1e-6, 1.0));
    }
}
