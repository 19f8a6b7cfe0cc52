//! Desk-scale benchmark instances with certified optima, Lipschitz
//! constants and conjugate oracles.

mod builtin;
mod reference;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::conjugate::{BoxQpConjugate, GridConjugate, GridSpec, LassoConjugate, PolyhedralL1BoxConjugate, QuadraticConjugate};
use crate::error::{Error, Result};
use crate::prox::ProxSpec;
use crate::qp::solve_box_qp;
use crate::vecspace::{CompositeObjective, ConjugateKind, ConjugateOracle, SmoothOracle, Vector};

pub use builtin::{builtin, builtin_with_seed, default_seed, BUILTIN_NAMES};
pub use reference::{brute_force_prox, reference_optimum, ReferenceResult, DEFAULT_REFERENCE_BUDGET};

/// Safety factor applied to eigenvalue-based Lipschitz constants.
pub const LIPSCHITZ_SAFETY: f64 = 1.0 + 1e-10;

/// `½‖Ax − b‖²`
#[derive(Clone, Debug)]
pub struct LeastSquaresFn {
    a: DMatrix<f64>,
    b: DVector<f64>,
    l: f64,
}

impl SmoothOracle for LeastSquaresFn {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * (&self.a * x.as_dvector() - &self.b).norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let r = &self.a * x.as_dvector() - &self.b;
        Vector::from_dvector(self.a.tr_mul(&r))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.l)
    }
}

/// `½xᵀQx + cᵀx`
#[derive(Clone, Debug)]
pub struct QuadraticFn {
    q: DMatrix<f64>,
    c: DVector<f64>,
    l: f64,
}

impl SmoothOracle for QuadraticFn {
    fn value(&self, x: &Vector) -> f64 {
        let x = x.as_dvector();
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_dvector(&self.q * x.as_dvector() + &self.c)
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.l)
    }
}

/// `‖Ax − b‖₁` with the subgradient selection `Aᵀ sign(Ax − b)`, `sign(0) = 0`.
#[derive(Clone, Debug)]
pub struct L1ResidualFn {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl SmoothOracle for L1ResidualFn {
    fn value(&self, x: &Vector) -> f64 {
        (&self.a * x.as_dvector() - &self.b).lp_norm(1)
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let s = (&self.a * x.as_dvector() - &self.b).map(|r| {
            if r > 0.0 {
                1.0
            } else if r < 0.0 {
                -1.0
            } else {
                0.0
            }
        });
        Vector::from_dvector(self.a.tr_mul(&s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LeastSquares,
    Lasso,
    BoxQp,
    L1Regression,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::LeastSquares => "least_squares",
            ProblemKind::Lasso => "lasso",
            ProblemKind::BoxQp => "box_qp",
            ProblemKind::L1Regression => "l1_regression",
        })
    }
}

/// How `f*` is evaluated for an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FstarStrategy {
    Analytic,
    DualSolve,
    NumericGrid,
    Unavailable,
}

impl From<ConjugateKind> for FstarStrategy {
    fn from(k: ConjugateKind) -> Self {
        match k {
            ConjugateKind::Analytic => FstarStrategy::Analytic,
            ConjugateKind::DualSolve => FstarStrategy::DualSolve,
            ConjugateKind::NumericGrid => FstarStrategy::NumericGrid,
        }
    }
}

impl fmt::Display for FstarStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FstarStrategy::Analytic => "analytic",
            FstarStrategy::DualSolve => "dual-solve",
            FstarStrategy::NumericGrid => "numeric-grid",
            FstarStrategy::Unavailable => "unavailable",
        })
    }
}

/// Dense matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixData {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixData {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.rows * self.cols != self.data.len() || self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid(format!(
                "matrix data has {} entries for a {}x{} matrix",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// Serializable problem description: the JSON problem-file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: ProblemKind,
    /// `A` for residual problems, `Q` for box QPs.
    pub matrix: MatrixData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub x0: Vec<f64>,
    /// Use a tabulated grid conjugate with this many points per axis
    /// (dimension ≤ 2 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

fn field<'a, T>(v: &'a Option<T>, name: &str, kind: ProblemKind) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::invalid(format!("{kind} problem needs `{name}`")))
}

fn vector(v: &[f64]) -> Result<Vector> {
    Vector::from_slice(v)
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemInstance> {
        let m = self.matrix.to_matrix()?;
        let x0 = vector(&self.x0)?;
        let kind = self.kind;
        let mut inst = match kind {
            ProblemKind::LeastSquares => make_least_squares(&m, &vector(field(&self.b, "b", kind)?)?, &x0)?,
            ProblemKind::Lasso => make_lasso(
                &m,
                &vector(field(&self.b, "b", kind)?)?,
                *field(&self.lambda, "lambda", kind)?,
                &x0,
            )?,
            ProblemKind::BoxQp => {
                let c = vector(field(&self.c, "c", kind)?)?;
                let lo = vector(field(&self.lo, "lo", kind)?)?;
                let hi = vector(field(&self.hi, "hi", kind)?)?;
                match self.grid_points {
                    Some(p) => make_box_qp_with_grid(&m, &c, &lo, &hi, &x0, p)?,
                    None => make_box_qp(&m, &c, &lo, &hi, &x0)?,
                }
            }
            ProblemKind::L1Regression => make_l1_regression(
                &m,
                &vector(field(&self.b, "b", kind)?)?,
                &vector(field(&self.lo, "lo", kind)?)?,
                &vector(field(&self.hi, "hi", kind)?)?,
                &x0,
            )?,
        };
        inst.spec.name = self.name.clone();
        inst.spec.seed = self.seed;
        Ok(inst)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// A value together with a bound on its error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub accuracy: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, accuracy: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub spec: ProblemSpec,
    pub objective: CompositeObjective,
    pub x0: Vector,
    /// Gradient Lipschitz constant for smooth `φ`; Lipschitz constant of `φ`
    /// itself for nonsmooth instances.
    pub lipschitz: Option<f64>,
    pub smooth: bool,
    pub psi_indicator: bool,
    pub f_bar: Estimate,
    pub dist_x0: Estimate,
    pub x_bar: Option<Vector>,
    pub fstar_strategy: FstarStrategy,
}

impl ProblemInstance {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// Name with the generator seed, when there is one.
    pub fn label(&self) -> String {
        match self.spec.seed {
            Some(s) => format!("{}@seed={s}", self.spec.name),
            None => self.spec.name.clone(),
        }
    }

    fn named(mut self, name: &str, seed: Option<u64>) -> Self {
        self.spec.name = name.to_string();
        self.spec.seed = seed;
        self
    }

    /// `f` at `x`, `+∞` outside the domain of `ψ`.
    pub fn f(&self, x: &Vector) -> f64 {
        self.objective.eval_f(x).to_f64()
    }

    /// A subgradient oracle for `φ` (the gradient when `φ` is smooth).
    pub fn subgradient(&self) -> impl Fn(&Vector) -> Vector + '_ {
        move |x| self.objective.phi().gradient(x)
    }
}

fn largest_eigenvalue(sym: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(sym.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    (max, min)
}

fn spec_for(kind: ProblemKind, matrix: &DMatrix<f64>, x0: &Vector) -> ProblemSpec {
    ProblemSpec {
        name: kind.to_string().replace('_', "-"),
        kind,
        matrix: MatrixData::from_matrix(matrix),
        b: None,
        c: None,
        lambda: None,
        lo: None,
        hi: None,
        seed: None,
        x0: x0.to_vec(),
        grid_points: None,
    }
}

fn check_rows(a: &DMatrix<f64>, b: &Vector, x0: &Vector) -> Result<()> {
    b.check_dim(a.nrows())?;
    x0.check_dim(a.ncols())
}

/// `‖p − x‖`-style bound for a feasible point of a box QP:
/// `f(x) − f̄ ≤ ‖x − p‖(‖∇φ(x)‖ + diam)` with `p` the projected gradient step.
fn box_accuracy(grad: &DVector<f64>, kkt: f64, lo: &Vector, hi: &Vector) -> f64 {
    let n = grad.len() as f64;
    let diam = (hi - lo).norm();
    n.sqrt() * kkt * (grad.norm() + diam)
}

/// `½‖Ax − b‖²` with `ψ = 0`.
pub fn make_least_squares(a: &DMatrix<f64>, b: &Vector, x0: &Vector) -> Result<ProblemInstance> {
    check_rows(a, b, x0)?;
    let gram = a.tr_mul(a);
    let (lmax, lmin) = largest_eigenvalue(&gram);
    let l = (lmax * LIPSCHITZ_SAFETY).max(f64::MIN_POSITIVE);
    let phi = Arc::new(LeastSquaresFn {
        a: a.clone(),
        b: b.as_dvector().clone(),
        l,
    });
    let mut objective = CompositeObjective::new(a.ncols(), phi.clone(), Arc::new(ProxSpec::Zero))?;
    let atb = Vector::from_dvector(a.tr_mul(b.as_dvector()));
    let full_rank = lmin > 1e-12 * lmax.max(1e-300);
    let mut spec = spec_for(ProblemKind::LeastSquares, a, x0);
    spec.b = Some(b.to_vec());

    let (x_bar, f_bar, dist, strategy) = match (full_rank, gram.clone().cholesky()) {
        (true, Some(chol)) => {
            let mut x = chol.solve(atb.as_dvector());
            // One step of iterative refinement on the normal equations.
            let r = atb.as_dvector() - &gram * &x;
            x += chol.solve(&r);
            let xv = Vector::from_dvector(x);
            let gn = phi.gradient(&xv).norm();
            let f = phi.value(&xv);
            let conj = QuadraticConjugate::new(&gram, &atb, 0.5 * b.norm_sq())?;
            objective = objective.with_f_conjugate(Arc::new(conj));
            let dist = (x0 - &xv).norm();
            (
                Some(xv),
                Estimate {
                    value: f,
                    accuracy: 0.5 * gn * gn / lmin,
                },
                Estimate {
                    value: dist,
                    accuracy: gn / lmin,
                },
                FstarStrategy::Analytic,
            )
        }
        _ => {
            let r = reference_optimum(&objective, x0, Some(l), true, DEFAULT_REFERENCE_BUDGET)?;
            (Some(r.x_best.clone()), r.f_bar, r.dist_estimate(x0), FstarStrategy::Unavailable)
        }
    };
    Ok(ProblemInstance {
        spec,
        objective,
        x0: x0.clone(),
        lipschitz: Some(l),
        smooth: true,
        psi_indicator: false,
        f_bar,
        dist_x0: dist,
        x_bar,
        fstar_strategy: strategy,
    })
}

/// `½‖Ax − b‖² + λ‖x‖₁`
pub fn make_lasso(a: &DMatrix<f64>, b: &Vector, lambda: f64, x0: &Vector) -> Result<ProblemInstance> {
    check_rows(a, b, x0)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("λ must be positive, got {lambda}")));
    }
    let gram = a.tr_mul(a);
    let (lmax, lmin) = largest_eigenvalue(&gram);
    let l = (lmax * LIPSCHITZ_SAFETY).max(f64::MIN_POSITIVE);
    let phi = Arc::new(LeastSquaresFn {
        a: a.clone(),
        b: b.as_dvector().clone(),
        l,
    });
    let mut objective = CompositeObjective::new(a.ncols(), phi, Arc::new(ProxSpec::l1(lambda)?))?;
    let mut spec = spec_for(ProblemKind::Lasso, a, x0);
    spec.b = Some(b.to_vec());
    spec.lambda = Some(lambda);

    let full_rank = lmin > 1e-12 * lmax.max(1e-300);
    let conj = if full_rank { LassoConjugate::new(a, b.as_dvector(), lambda).ok() } else { None };
    let (x_bar, f_bar, dist, strategy) = match conj {
        Some(conj) => {
            // At z = 0 the bracket is (−P(x̂), −D(û)) for the recovered primal
            // and dual points, i.e. minus a duality-gap interval around f̄.
            let (lower, upper) = conj.bracket(&Vector::zeros(a.ncols()));
            let x_hat = conj_primal_point(&conj, a.ncols());
            let gap = (upper - lower).max(0.0);
            let dist = (x0 - &x_hat).norm();
            objective = objective.with_f_conjugate(Arc::new(conj));
            (
                Some(x_hat),
                Estimate {
                    value: -lower,
                    accuracy: gap,
                },
                Estimate {
                    value: dist,
                    accuracy: (2.0 * gap / lmin).sqrt(),
                },
                FstarStrategy::DualSolve,
            )
        }
        None => {
            let r = reference_optimum(&objective, x0, Some(l), true, DEFAULT_REFERENCE_BUDGET)?;
            (Some(r.x_best.clone()), r.f_bar, r.dist_estimate(x0), FstarStrategy::Unavailable)
        }
    };
    Ok(ProblemInstance {
        spec,
        objective,
        x0: x0.clone(),
        lipschitz: Some(l),
        smooth: true,
        psi_indicator: false,
        f_bar,
        dist_x0: dist,
        x_bar,
        fstar_strategy: strategy,
    })
}

fn conj_primal_point(conj: &LassoConjugate, n: usize) -> Vector {
    conj.primal_point(&Vector::zeros(n))
}

fn box_qp_parts(
    q: &DMatrix<f64>,
    c: &Vector,
    lo: &Vector,
    hi: &Vector,
    x0: &Vector,
) -> Result<(ProblemSpec, CompositeObjective, f64, Vector, Estimate, Estimate)> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::invalid("Q must be square"));
    }
    c.check_dim(n)?;
    x0.check_dim(n)?;
    if (q - q.transpose()).amax() > 1e-12 * q.amax() {
        return Err(Error::invalid("Q must be symmetric"));
    }
    q.clone().cholesky().ok_or(Error::SingularMatrix)?;
    let set = ProxSpec::box_set(lo, hi)?;
    let (lmax, _) = largest_eigenvalue(q);
    let l = lmax * LIPSCHITZ_SAFETY;
    let phi = Arc::new(QuadraticFn {
        q: q.clone(),
        c: c.as_dvector().clone(),
        l,
    });
    let objective = CompositeObjective::new(n, phi.clone(), Arc::new(set))?;
    let sol = solve_box_qp(q, c.as_dvector(), lo.as_dvector(), hi.as_dvector(), None)?;
    let x_bar = Vector::from_dvector(sol.w.clone());
    let f = phi.value(&x_bar);
    let grad = q * &sol.w + c.as_dvector();
    let acc = box_accuracy(&grad, sol.kkt_residual, lo, hi);
    let (_, mu) = largest_eigenvalue(q);
    let dist = (x0 - &x_bar).norm();
    let mut spec = spec_for(ProblemKind::BoxQp, q, x0);
    spec.c = Some(c.to_vec());
    spec.lo = Some(lo.to_vec());
    spec.hi = Some(hi.to_vec());
    Ok((
        spec,
        objective,
        l,
        x_bar,
        Estimate { value: f, accuracy: acc },
        Estimate {
            value: dist,
            accuracy: (2.0 * acc / mu).sqrt(),
        },
    ))
}

/// `½xᵀQx + cᵀx` over the box `[lo, hi]`, with a dual-solve conjugate.
pub fn make_box_qp(q: &DMatrix<f64>, c: &Vector, lo: &Vector, hi: &Vector, x0: &Vector) -> Result<ProblemInstance> {
    let (spec, objective, l, x_bar, f_bar, dist) = box_qp_parts(q, c, lo, hi, x0)?;
    let objective = objective.with_f_conjugate(Arc::new(BoxQpConjugate::new(q, c, lo, hi)?));
    Ok(ProblemInstance {
        spec,
        objective,
        x0: x0.clone(),
        lipschitz: Some(l),
        smooth: true,
        psi_indicator: true,
        f_bar,
        dist_x0: dist,
        x_bar: Some(x_bar),
        fstar_strategy: FstarStrategy::DualSolve,
    })
}

/// As [`make_box_qp`] but with `f*` tabulated on a grid over the box
/// (dimension ≤ 2).
pub fn make_box_qp_with_grid(
    q: &DMatrix<f64>,
    c: &Vector,
    lo: &Vector,
    hi: &Vector,
    x0: &Vector,
    points_per_axis: usize,
) -> Result<ProblemInstance> {
    let (mut spec, objective, l, x_bar, f_bar, dist) = box_qp_parts(q, c, lo, hi, x0)?;
    let grid = GridSpec::new(lo.clone(), hi.clone(), points_per_axis)?;
    let obj_ref = objective.clone();
    let conj = GridConjugate::new(move |x| obj_ref.eval_f(x), &grid)?;
    spec.grid_points = Some(points_per_axis);
    Ok(ProblemInstance {
        spec,
        objective: objective.with_f_conjugate(Arc::new(conj)),
        x0: x0.clone(),
        lipschitz: Some(l),
        smooth: true,
        psi_indicator: true,
        f_bar,
        dist_x0: dist,
        x_bar: Some(x_bar),
        fstar_strategy: FstarStrategy::NumericGrid,
    })
}

/// `‖Ax − b‖₁` over the box `[lo, hi]`, for the subgradient methods.
pub fn make_l1_regression(a: &DMatrix<f64>, b: &Vector, lo: &Vector, hi: &Vector, x0: &Vector) -> Result<ProblemInstance> {
    check_rows(a, b, x0)?;
    let n = a.ncols();
    let set = ProxSpec::box_set(lo, hi)?;
    let phi = Arc::new(L1ResidualFn {
        a: a.clone(),
        b: b.as_dvector().clone(),
    });
    let l: f64 = (0..a.nrows()).map(|j| a.row(j).norm()).sum();
    let mut objective = CompositeObjective::new(n, phi, Arc::new(set))?;
    let mut spec = spec_for(ProblemKind::L1Regression, a, x0);
    spec.b = Some(b.to_vec());
    spec.lo = Some(lo.to_vec());
    spec.hi = Some(hi.to_vec());

    let (x_bar, f_bar, dist, strategy) = if n <= 2 {
        let conj = PolyhedralL1BoxConjugate::new(a, b.as_dvector(), lo, hi)?;
        let (x, f) = conj.minimum();
        let dist = (x0 - &x).norm();
        objective = objective.with_f_conjugate(Arc::new(conj));
        (
            Some(x),
            Estimate {
                value: f,
                accuracy: 1e-14 * (1.0 + f.abs()),
            },
            // ‖x_0 − x̄‖ bounds the distance to the optimal set from above.
            Estimate::exact(dist),
            FstarStrategy::DualSolve,
        )
    } else {
        let r = reference_optimum(&objective, x0, Some(l), false, DEFAULT_REFERENCE_BUDGET)?;
        (Some(r.x_best.clone()), r.f_bar, r.dist_estimate(x0), FstarStrategy::Unavailable)
    };
    Ok(ProblemInstance {
        spec,
        objective,
        x0: x0.clone(),
        lipschitz: Some(l),
        smooth: false,
        psi_indicator: true,
        f_bar,
        dist_x0: dist,
        x_bar,
        fstar_strategy: strategy,
    })
}

/// Looks up a built-in name, or reads a JSON problem file.
pub fn load_problem(name_or_path: &str, seed: Option<u64>) -> Result<ProblemInstance> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        return builtin_with_seed(name_or_path, seed);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return ProblemSpec::load(path)?.build();
    }
    Err(Error::UnknownProblem(name_or_path.to_string()))
}

/// Fetches the conjugate oracle of an instance, or reports why there is none.
pub fn fstar(inst: &ProblemInstance) -> Result<&dyn ConjugateOracle> {
    inst.objective
        .f_conjugate()
        .ok_or_else(|| Error::ConjugateUnavailable(inst.name().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecspace::check_lipschitz;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    fn m(r: usize, c: usize, d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, d)
    }

    #[test]
    fn least_squares_identity() {
        let p = make_least_squares(&DMatrix::identity(2, 2), &v(&[1.0, 2.0]), &v(&[0.0, 0.0])).unwrap();
        assert!((p.x_bar.as_ref().unwrap() - &v(&[1.0, 2.0])).norm() < 1e-15);
        assert_eq!(p.f_bar.value, 0.0);
        assert!((p.lipschitz.unwrap() - 1.0).abs() < 1e-9);
        assert!((p.dist_x0.value - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.fstar_strategy, FstarStrategy::Analytic);
    }

    #[test]
    fn least_squares_zero_rhs_and_scalar() {
        let p = make_least_squares(&m(3, 2, &[1.0, 2.0, 0.0, 1.0, 1.0, 1.0]), &v(&[0.0; 3]), &v(&[1.0, 1.0])).unwrap();
        assert!(p.x_bar.as_ref().unwrap().norm() < 1e-15);
        assert_eq!(p.f_bar.value, 0.0);

        let p = make_least_squares(&m(1, 1, &[2.0]), &v(&[2.0]), &v(&[0.0])).unwrap();
        assert_eq!(p.x_bar.as_ref().unwrap(), &v(&[1.0]));
        assert!((p.lipschitz.unwrap() - 4.0).abs() < 1e-9);
        assert_eq!(p.dist_x0.value, 1.0);
    }

    #[test]
    fn least_squares_rank_deficient_uses_reference_run() {
        let p = make_least_squares(&m(2, 2, &[1.0, 1.0, 1.0, 1.0]), &v(&[1.0, 3.0]), &v(&[0.0, 0.0])).unwrap();
        // Residual is at least the distance from b to span{(1, 1)}: f̄ = 1.
        assert!((p.f_bar.value - 1.0).abs() < 1e-9);
        assert_eq!(p.fstar_strategy, FstarStrategy::Unavailable);
    }

    #[test]
    fn lasso_large_lambda_gives_zero() {
        let a = m(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let b = v(&[1.0, -0.5, 0.25]);
        let atb = Vector::from_dvector(a.tr_mul(b.as_dvector()));
        let p = make_lasso(&a, &b, atb.norm_inf() * 1.01, &v(&[1.0, 1.0])).unwrap();
        assert!(p.x_bar.as_ref().unwrap().norm() < 1e-14);
        assert!((p.f_bar.value - 0.5 * b.norm_sq()).abs() < 1e-14);
        // 0 ∈ ∂f(0): |Aᵀb|_i ≤ λ.
        let g = p.objective.phi().gradient(&Vector::zeros(2));
        assert!(g.norm_inf() <= atb.norm_inf() * 1.01);
    }

    #[test]
    fn lasso_scalar_fixed_point() {
        let p = make_lasso(&m(1, 1, &[1.0]), &v(&[3.0]), 1.0, &v(&[0.0])).unwrap();
        assert!((p.x_bar.as_ref().unwrap()[0] - 2.0).abs() < 1e-14);
        assert!((p.f_bar.value - 2.5).abs() < 1e-14);
        assert!(p.f_bar.accuracy < 1e-12);
        assert_eq!(p.fstar_strategy, FstarStrategy::DualSolve);
    }

    #[test]
    fn lasso_small_lambda_approaches_least_squares() {
        let a = m(3, 2, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.1]);
        let b = v(&[1.0, -0.5, 0.25]);
        let ls = make_least_squares(&a, &b, &v(&[0.0, 0.0])).unwrap();
        let la = make_lasso(&a, &b, 1e-8, &v(&[0.0, 0.0])).unwrap();
        assert!((ls.f_bar.value - la.f_bar.value).abs() < 1e-6);
        assert!((&ls.x_bar.unwrap() - &la.x_bar.unwrap()).norm() < 1e-6);
    }

    #[test]
    fn box_qp_examples() {
        let p = make_box_qp(&DMatrix::identity(3, 3), &v(&[0.0; 3]), &v(&[-1.0; 3]), &v(&[1.0; 3]), &v(&[0.5; 3])).unwrap();
        assert_eq!(p.x_bar.as_ref().unwrap(), &Vector::zeros(3));
        assert_eq!(p.f_bar.value, 0.0);

        let p = make_box_qp(&m(1, 1, &[1.0]), &v(&[2.0]), &v(&[0.0]), &v(&[1.0]), &v(&[1.0])).unwrap();
        assert_eq!(p.x_bar.as_ref().unwrap(), &v(&[0.0]));
        assert_eq!(p.f_bar.value, 0.0);
        // −∇φ(0) = −2 lies in the normal cone of [0, 1] at 0.
        assert!(p.objective.phi().gradient(&v(&[0.0]))[0] > 0.0);

        let p = make_box_qp(&m(2, 2, &[1.0, 0.0, 0.0, 4.0]), &v(&[0.0; 2]), &v(&[-1.0; 2]), &v(&[1.0; 2]), &v(&[0.0; 2])).unwrap();
        assert!((p.lipschitz.unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn box_qp_rejects_indefinite() {
        assert!(make_box_qp(&m(1, 1, &[-1.0]), &v(&[0.0]), &v(&[0.0]), &v(&[1.0]), &v(&[0.0])).is_err());
    }

    #[test]
    fn l1_regression_examples() {
        let p = make_l1_regression(&m(1, 1, &[1.0]), &v(&[0.0]), &v(&[-1.0]), &v(&[1.0]), &v(&[1.0])).unwrap();
        assert_eq!(p.x_bar.as_ref().unwrap(), &v(&[0.0]));
        assert_eq!(p.f_bar.value, 0.0);

        let p = make_l1_regression(&DMatrix::identity(2, 2), &v(&[0.5, -0.5]), &v(&[0.0, 0.0]), &v(&[1.0, 1.0]), &v(&[1.0, 1.0]))
            .unwrap();
        assert!((p.x_bar.as_ref().unwrap() - &v(&[0.5, 0.0])).norm() < 1e-15);
        assert!((p.f_bar.value - 0.5).abs() < 1e-15);
        assert_eq!(p.lipschitz, Some(2.0));
    }

    #[test]
    fn l1_regression_subgradient_norm_bounded_by_l() {
        let a = m(3, 2, &[1.0, -2.0, 0.5, 0.5, 3.0, 1.0]);
        let p = make_l1_regression(&a, &v(&[0.1, 0.2, -0.3]), &v(&[-1.0, -1.0]), &v(&[1.0, 1.0]), &v(&[0.0, 0.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = p.lipschitz.unwrap();
        for _ in 0..200 {
            let x = v(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            assert!(p.objective.phi().gradient(&x).norm() <= l);
            assert!(p.f(&x) >= p.f_bar.value - p.f_bar.accuracy);
        }
    }

    #[test]
    fn lipschitz_constants_hold_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = v(&[0.3, -0.1, 0.2, 0.0, 1.0]);
        let p = make_lasso(&a, &b, 0.1, &Vector::zeros(3)).unwrap();
        let pairs: Vec<(Vector, Vector)> = (0..200)
            .map(|_| {
                let mut r = || Vector::new((0..3).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
                (r(), r())
            })
            .collect();
        check_lipschitz(p.objective.phi(), p.lipschitz.unwrap(), &pairs).unwrap();
    }

    #[test]
    fn spec_json_round_trip() {
        let p = make_lasso(&m(2, 2, &[1.0, 0.2, 0.1, 1.0]), &v(&[1.0, -1.0]), 0.3, &v(&[0.0, 0.0])).unwrap();
        let text = p.spec.to_json().unwrap();
        let back = ProblemSpec::from_json(&text).unwrap();
        assert_eq!(back, p.spec);
        let rebuilt = back.build().unwrap();
        assert_eq!(rebuilt.f_bar, p.f_bar);
    }

    #[test]
    fn spec_rejects_missing_fields() {
        let mut spec = make_least_squares(&m(1, 1, &[1.0]), &v(&[1.0]), &v(&[0.0])).unwrap().spec;
        spec.b = None;
        assert!(spec.build().is_err());
        spec.b = Some(vec![1.0]);
        spec.matrix.data.push(1.0);
        assert!(spec.build().is_err());
    }
}
