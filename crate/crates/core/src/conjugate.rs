//! Convex conjugates `h*(z) = sup_x ⟨z, x⟩ − h(x)`.
//!
//! Analytic formulas for the standard pieces, a grid-max estimate for
//! low-dimensional functions, and inner-solve oracles for composite
//! objectives. Every non-analytic oracle returns `⟨z, x⟩ − h(x)` at some
//! feasible `x`, so its value is a lower estimate of `h*(z)`: the certificate
//! right-hand side `−h*(z) + …` built from it can only move up, which keeps
//! `LHS ≤ RHS` checks sound.

use std::sync::Mutex;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::qp::solve_box_qp;
use crate::vecspace::{ConjugateKind, ConjugateOracle, ExtReal, Vector};

/// Conjugate of `h(x) = ½xᵀQx − bᵀx + c`: `½(z+b)ᵀQ⁻¹(z+b) − c`.
pub fn conjugate_quadratic(q: &DMatrix<f64>, b: &Vector, c: f64, z: &Vector) -> Result<f64> {
    QuadraticConjugate::new(q, b, c)?.eval(z)
}

/// `Σᵢ max(zᵢ·loᵢ, zᵢ·hiᵢ)`, the conjugate of the box indicator.
pub fn support_box(lo: &Vector, hi: &Vector, z: &Vector) -> f64 {
    (0..z.dim()).map(|i| (z[i] * lo[i]).max(z[i] * hi[i])).sum()
}

/// Conjugate of `λ‖·‖₁`: the indicator of the `λ`-box in the ∞-norm.
pub fn conjugate_l1(lambda: f64, z: &Vector) -> ExtReal {
    if z.norm_inf() <= lambda {
        ExtReal::ZERO
    } else {
        ExtReal::PosInf
    }
}

/// Precomputed analytic conjugate of a strictly convex quadratic.
#[derive(Clone, Debug)]
pub struct QuadraticConjugate {
    chol: Cholesky<f64, Dyn>,
    b: DVector<f64>,
    c: f64,
}

impl QuadraticConjugate {
    pub fn new(q: &DMatrix<f64>, b: &Vector, c: f64) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::invalid("quadratic form must be square"));
        }
        b.check_dim(q.nrows())?;
        let chol = q.clone().cholesky().ok_or(Error::SingularMatrix)?;
        Ok(QuadraticConjugate {
            chol,
            b: b.as_dvector().clone(),
            c,
        })
    }

    pub fn eval(&self, z: &Vector) -> Result<f64> {
        z.check_dim(self.b.len())?;
        let w = z.as_dvector() + &self.b;
        Ok(0.5 * w.dot(&self.chol.solve(&w)) - self.c)
    }

    /// The maximizer `Q⁻¹(z + b)`, i.e. `∇h*(z)`.
    pub fn argmax(&self, z: &Vector) -> Vector {
        Vector::from_dvector(self.chol.solve(&(z.as_dvector() + &self.b)))
    }
}

impl ConjugateOracle for QuadraticConjugate {
    fn conj_value(&self, z: &Vector) -> ExtReal {
        ExtReal::Finite(self.eval(z).expect("dimension checked at objective construction"))
    }

    fn kind(&self) -> ConjugateKind {
        ConjugateKind::Analytic
    }
}

/// Axis-aligned grid for grid-max conjugates and brute-force prox (dimension ≤ 2).
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    lower: Vector,
    upper: Vector,
    points_per_axis: usize,
}

impl GridSpec {
    pub const MIN_POINTS: usize = 101;

    pub fn new(lower: Vector, upper: Vector, points_per_axis: usize) -> Result<Self> {
        upper.check_dim(lower.dim())?;
        if lower.dim() == 0 || lower.dim() > 2 {
            return Err(Error::invalid(format!(
                "grids support dimension 1 or 2, got {}",
                lower.dim()
            )));
        }
        if points_per_axis < Self::MIN_POINTS {
            return Err(Error::invalid(format!(
                "points_per_axis must be at least {}, got {points_per_axis}",
                Self::MIN_POINTS
            )));
        }
        if (0..lower.dim()).any(|i| lower[i] > upper[i]) {
            return Err(Error::invalid("grid lower bound exceeds upper bound"));
        }
        Ok(GridSpec {
            lower,
            upper,
            points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    /// Largest spacing between neighbouring grid coordinates.
    pub fn spacing(&self) -> f64 {
        (0..self.dim())
            .map(|i| (self.upper[i] - self.lower[i]) / (self.points_per_axis - 1) as f64)
            .fold(0.0, f64::max)
    }

    fn axis(&self, i: usize) -> Vec<f64> {
        let n = self.points_per_axis;
        let (lo, hi) = (self.lower[i], self.upper[i]);
        (0..n)
            .map(|j| {
                if j == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * j as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    /// All grid points, row-major in the last axis.
    pub fn points(&self) -> Vec<Vector> {
        match self.dim() {
            1 => self
                .axis(0)
                .into_iter()
                .map(|x| Vector::from_fn(1, |_| x))
                .collect(),
            _ => {
                let (a0, a1) = (self.axis(0), self.axis(1));
                a0.iter()
                    .flat_map(|&x| a1.iter().map(move |&y| Vector::from_fn(2, |i| [x, y][i])))
                    .collect()
            }
        }
    }
}

/// `max` over grid points of `⟨z, x⟩ − h(x)`: a lower estimate of `h*(z)`.
pub fn numeric_conjugate(
    h: impl Fn(&Vector) -> ExtReal,
    grid: &GridSpec,
    z: &Vector,
) -> Result<f64> {
    z.check_dim(grid.dim())?;
    grid.points()
        .iter()
        .filter_map(|x| h(x).finite().map(|hx| z.dot(x) - hx))
        .reduce(f64::max)
        .ok_or(Error::EmptyGridDomain)
}

/// Grid-max conjugate with the function tabulated once at construction.
#[derive(Clone, Debug)]
pub struct GridConjugate {
    dim: usize,
    // Flattened finite points and their values.
    coords: Vec<f64>,
    values: Vec<f64>,
}

impl GridConjugate {
    pub fn new(h: impl Fn(&Vector) -> ExtReal, grid: &GridSpec) -> Result<Self> {
        Self::from_candidates(grid.dim(), grid.points(), h)
    }

    fn from_candidates(
        dim: usize,
        points: Vec<Vector>,
        h: impl Fn(&Vector) -> ExtReal,
    ) -> Result<Self> {
        let mut coords = Vec::new();
        let mut values = Vec::new();
        for x in points {
            if let Some(hx) = h(&x).finite() {
                coords.extend_from_slice(x.as_slice());
                values.push(hx);
            }
        }
        if values.is_empty() {
            return Err(Error::EmptyGridDomain);
        }
        Ok(GridConjugate {
            dim,
            coords,
            values,
        })
    }

    /// The maximizing tabulated point and the max value.
    pub fn argmax(&self, z: &Vector) -> (Vector, f64) {
        let zs = z.as_slice();
        let (best, val) = self
            .values
            .iter()
            .enumerate()
            .map(|(j, hx)| {
                let x = &self.coords[j * self.dim..(j + 1) * self.dim];
                let dot: f64 = x.iter().zip(zs).map(|(a, b)| a * b).sum();
                (j, dot - hx)
            })
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let x = &self.coords[best * self.dim..(best + 1) * self.dim];
        (Vector::from_fn(self.dim, |i| x[i]), val)
    }
}

impl ConjugateOracle for GridConjugate {
    fn conj_value(&self, z: &Vector) -> ExtReal {
        ExtReal::Finite(self.argmax(z).1)
    }

    fn kind(&self) -> ConjugateKind {
        ConjugateKind::NumericGrid
    }
}

/// Exact conjugate of `‖Ax − b‖₁ + I_box(x)` in dimension ≤ 2.
///
/// The function is polyhedral on a polytope, so `⟨z, x⟩ − f(x)` peaks at a
/// vertex of the arrangement formed by the hyperplanes `aⱼᵀx = bⱼ` and the
/// box faces. All vertices are tabulated once.
#[derive(Clone, Debug)]
pub struct PolyhedralL1BoxConjugate {
    table: GridConjugate,
}

impl PolyhedralL1BoxConjugate {
    pub fn new(a: &DMatrix<f64>, b: &DVector<f64>, lo: &Vector, hi: &Vector) -> Result<Self> {
        let n = a.ncols();
        if n == 0 || n > 2 {
            return Err(Error::invalid(format!(
                "vertex enumeration supports dimension 1 or 2, got {n}"
            )));
        }
        lo.check_dim(n)?;
        hi.check_dim(n)?;
        // Hyperplanes as (normal, offset).
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for j in 0..a.nrows() {
            let row: Vec<f64> = a.row(j).iter().copied().collect();
            if row.iter().any(|c| *c != 0.0) {
                planes.push((row, b[j]));
            }
        }
        for i in 0..n {
            let e: Vec<f64> = (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
            planes.push((e.clone(), lo[i]));
            planes.push((e, hi[i]));
        }
        let inside = |x: &[f64]| {
            (0..n).all(|i| x[i] >= lo[i] - 1e-12 * (1.0 + lo[i].abs()) && x[i] <= hi[i] + 1e-12 * (1.0 + hi[i].abs()))
        };
        let clamp = |x: &[f64]| Vector::from_fn(n, |i| x[i].max(lo[i]).min(hi[i]));
        let mut vertices = Vec::new();
        if n == 1 {
            for (nv, off) in &planes {
                let x = [off / nv[0]];
                if inside(&x) {
                    vertices.push(clamp(&x));
                }
            }
        } else {
            for p in 0..planes.len() {
                for q in p + 1..planes.len() {
                    let (a1, b1) = (&planes[p].0, planes[p].1);
                    let (a2, b2) = (&planes[q].0, planes[q].1);
                    let det = a1[0] * a2[1] - a1[1] * a2[0];
                    let scale = (a1[0].abs() + a1[1].abs()) * (a2[0].abs() + a2[1].abs());
                    if det.abs() <= 1e-14 * scale {
                        continue;
                    }
                    let x = [(b1 * a2[1] - b2 * a1[1]) / det, (a1[0] * b2 - a2[0] * b1) / det];
                    if inside(&x) {
                        vertices.push(clamp(&x));
                    }
                }
            }
        }
        let a = a.clone();
        let b = b.clone();
        let table = GridConjugate::from_candidates(n, vertices, |x| {
            ExtReal::Finite((&a * x.as_dvector() - &b).lp_norm(1))
        })?;
        Ok(PolyhedralL1BoxConjugate { table })
    }

    /// `(x̄, f̄)`: a minimizer and the minimum of `f`, read off at `z = 0`.
    pub fn minimum(&self) -> (Vector, f64) {
        let (x, v) = self.table.argmax(&Vector::zeros(self.table.dim));
        (x, -v)
    }
}

impl ConjugateOracle for PolyhedralL1BoxConjugate {
    fn conj_value(&self, z: &Vector) -> ExtReal {
        self.table.conj_value(z)
    }

    fn kind(&self) -> ConjugateKind {
        ConjugateKind::DualSolve
    }
}

/// Conjugate of `½‖Ax − b‖² + λ‖x‖₁` for full-column-rank `A`, via
/// `f*(z) = min_{‖u‖∞ ≤ λ} φ*(z − u)` solved as a box QP. Each solve is
/// warm-started from the previous one.
#[derive(Debug)]
pub struct LassoConjugate {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
    phi_conj: QuadraticConjugate,
    inv_gram: DMatrix<f64>,
    warm: Mutex<Option<DVector<f64>>>,
}

impl LassoConjugate {
    pub fn new(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Result<Self> {
        let gram = a.transpose() * a;
        let atb = Vector::from_dvector(a.transpose() * b);
        let phi_conj = QuadraticConjugate::new(&gram, &atb, 0.5 * b.norm_squared())?;
        let inv_gram = gram.cholesky().ok_or(Error::SingularMatrix)?.inverse();
        Ok(LassoConjugate {
            a: a.clone(),
            b: b.clone(),
            lambda,
            phi_conj,
            inv_gram,
            warm: Mutex::new(None),
        })
    }

    fn primal(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.a * x - &self.b).norm_squared() + self.lambda * x.lp_norm(1)
    }

    /// `(lower, upper)` bracket on `f*(z)`: the primal point recovered from the
    /// inner solve gives the lower value, the dual point `u` the upper one.
    pub fn bracket(&self, z: &Vector) -> (f64, f64) {
        let (lower, upper, _) = self.solve(z);
        (lower, upper)
    }

    /// The maximizer of `⟨z, x⟩ − f(x)` recovered from the inner solve; at
    /// `z = 0` a minimizer of `f`.
    pub fn primal_point(&self, z: &Vector) -> Vector {
        self.solve(z).2
    }

    fn solve(&self, z: &Vector) -> (f64, f64, Vector) {
        let n = z.dim();
        let v = z.as_dvector() + &self.phi_conj.b;
        let g = -(&self.inv_gram * &v);
        let lo = DVector::from_element(n, -self.lambda);
        let hi = DVector::from_element(n, self.lambda);
        let mut warm = self.warm.lock().unwrap_or_else(|e| e.into_inner());
        let sol = solve_box_qp(&self.inv_gram, &g, &lo, &hi, warm.as_ref())
            .expect("inverse Gram matrix is positive definite");
        *warm = Some(sol.w.clone());
        drop(warm);
        let w = z.as_dvector() - &sol.w;
        let upper = self
            .phi_conj
            .eval(&Vector::from_dvector(w.clone()))
            .expect("dimensions match");
        let x = self.phi_conj.argmax(&Vector::from_dvector(w));
        let lower = z.dot(&x) - self.primal(x.as_dvector());
        (lower, upper.max(lower), x)
    }
}

impl ConjugateOracle for LassoConjugate {
    fn conj_value(&self, z: &Vector) -> ExtReal {
        ExtReal::Finite(self.bracket(z).0)
    }

    fn kind(&self) -> ConjugateKind {
        ConjugateKind::DualSolve
    }
}

/// Conjugate of `½xᵀQx + cᵀx + I_box(x)` via `−min_{x ∈ box} ½xᵀQx + (c − z)ᵀx`.
#[derive(Clone, Debug)]
pub struct BoxQpConjugate {
    q: DMatrix<f64>,
    c: DVector<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl BoxQpConjugate {
    pub fn new(q: &DMatrix<f64>, c: &Vector, lo: &Vector, hi: &Vector) -> Result<Self> {
        q.clone().cholesky().ok_or(Error::SingularMatrix)?;
        Ok(BoxQpConjugate {
            q: q.clone(),
            c: c.as_dvector().clone(),
            lo: lo.as_dvector().clone(),
            hi: hi.as_dvector().clone(),
        })
    }
}

impl ConjugateOracle for BoxQpConjugate {
    fn conj_value(&self, z: &Vector) -> ExtReal {
        let g = &self.c - z.as_dvector();
        let sol = solve_box_qp(&self.q, &g, &self.lo, &self.hi, None)
            .expect("positive definite by construction");
        // Feasible x, so -value is a lower estimate of the supremum.
        ExtReal::Finite(-sol.value)
    }

    fn kind(&self) -> ConjugateKind {
        ConjugateKind::DualSolve
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_slice(c).unwrap()
    }

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn quadratic_conjugate_examples() {
        // sup_x 2x − x²/2 = 2 at x = 2.
        assert_eq!(conjugate_quadratic(&eye(1), &v(&[0.0]), 0.0, &v(&[2.0])).unwrap(), 2.0);
        assert_eq!(conjugate_quadratic(&eye(1), &v(&[0.0]), 0.0, &v(&[0.0])).unwrap(), 0.0);
        // h = x² − x: sup_x x − x² + x = sup 2x − x² = 1.
        let q = DMatrix::from_element(1, 1, 2.0);
        assert!((conjugate_quadratic(&q, &v(&[1.0]), 0.0, &v(&[1.0])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_conjugate_rejects_singular() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            conjugate_quadratic(&q, &v(&[0.0, 0.0]), 0.0, &v(&[1.0, 0.0])),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn support_box_examples() {
        assert_eq!(support_box(&v(&[0.0]), &v(&[1.0]), &v(&[2.0])), 2.0);
        assert_eq!(support_box(&v(&[-1.0]), &v(&[1.0]), &v(&[-3.0])), 3.0);
        assert_eq!(support_box(&v(&[0.0, 0.0]), &v(&[1.0, 1.0]), &v(&[0.0, 0.0])), 0.0);
    }

    #[test]
    fn l1_conjugate_examples() {
        assert_eq!(conjugate_l1(1.0, &v(&[0.5, -1.0])), ExtReal::ZERO);
        assert_eq!(conjugate_l1(1.0, &v(&[1.01])), ExtReal::PosInf);
        assert_eq!(conjugate_l1(2.0, &v(&[0.0])), ExtReal::ZERO);
    }

    #[test]
    fn numeric_conjugate_examples() {
        let grid = GridSpec::new(v(&[-10.0]), v(&[10.0]), 1001).unwrap();
        let val = numeric_conjugate(|x| ExtReal::Finite(0.5 * x.norm_sq()), &grid, &v(&[2.0])).unwrap();
        assert!((val - 2.0).abs() <= 0.02 && val <= 2.0);

        let grid = GridSpec::new(v(&[-5.0]), v(&[5.0]), 1001).unwrap();
        let val = numeric_conjugate(|x| ExtReal::Finite(x.norm_l1()), &grid, &v(&[0.5])).unwrap();
        assert!(val.abs() < 1e-12);

        let grid = GridSpec::new(v(&[0.0]), v(&[1.0]), 101).unwrap();
        let unit = |x: &Vector| {
            if (0.0..=1.0).contains(&x[0]) {
                ExtReal::ZERO
            } else {
                ExtReal::PosInf
            }
        };
        assert_eq!(numeric_conjugate(unit, &grid, &v(&[3.0])).unwrap(), 3.0);
    }

    #[test]
    fn numeric_conjugate_empty_domain() {
        let grid = GridSpec::new(v(&[2.0]), v(&[3.0]), 101).unwrap();
        assert!(matches!(
            numeric_conjugate(|_| ExtReal::PosInf, &grid, &v(&[1.0])),
            Err(Error::EmptyGridDomain)
        ));
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(v(&[0.0]), v(&[1.0]), 100).is_err());
        assert!(GridSpec::new(v(&[0.0; 3]), v(&[1.0; 3]), 101).is_err());
        assert!(GridSpec::new(v(&[1.0]), v(&[0.0]), 101).is_err());
        let g = GridSpec::new(v(&[0.0, -1.0]), v(&[1.0, 1.0]), 101).unwrap();
        assert_eq!(g.points().len(), 101 * 101);
        assert!((g.spacing() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn tabulated_grid_matches_direct_grid() {
        let grid = GridSpec::new(v(&[-1.0, -2.0]), v(&[2.0, 1.0]), 121).unwrap();
        let h = |x: &Vector| ExtReal::Finite(x[0] * x[0] + 0.5 * x[1] * x[1] + x[0] * x[1]);
        let table = GridConjugate::new(h, &grid).unwrap();
        for z in [v(&[0.3, -1.2]), v(&[2.0, 2.0]), v(&[0.0, 0.0])] {
            let direct = numeric_conjugate(h, &grid, &z).unwrap();
            assert_eq!(table.conj_value(&z), ExtReal::Finite(direct));
        }
    }

    #[test]
    fn polyhedral_conjugate_matches_fine_grid() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 1.0, 0.8, -0.7]);
        let b = DVector::from_vec(vec![0.2, -0.4, 0.1]);
        let (lo, hi) = (v(&[-1.0, -1.0]), v(&[1.0, 1.0]));
        let exact = PolyhedralL1BoxConjugate::new(&a, &b, &lo, &hi).unwrap();
        let grid = GridSpec::new(lo.clone(), hi.clone(), 401).unwrap();
        let f = |x: &Vector| ExtReal::Finite((&a * x.as_dvector() - &b).lp_norm(1));
        for z in [v(&[0.0, 0.0]), v(&[1.5, -0.2]), v(&[-3.0, 4.0])] {
            let e = exact.conj_value(&z).to_f64();
            let g = numeric_conjugate(f, &grid, &z).unwrap();
            // Grid is a lower estimate within Lipschitz × spacing.
            assert!(g <= e + 1e-12, "grid {g} exceeds exact {e}");
            assert!(e - g < 0.05);
        }
    }

    #[test]
    fn lasso_conjugate_bracket_is_tight() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, 0.1, 0.9, 0.4, -0.3]);
        let b = DVector::from_vec(vec![1.0, -0.5, 0.3]);
        let conj = LassoConjugate::new(&a, &b, 0.3).unwrap();
        for z in [v(&[0.0, 0.0]), v(&[0.7, -1.1]), v(&[5.0, 3.0])] {
            let (lo, hi) = conj.bracket(&z);
            assert!(hi - lo <= 1e-12 * (1.0 + hi.abs()), "gap {}", hi - lo);
            // Fine grid lower estimate never exceeds the exact value.
            let grid = GridSpec::new(v(&[-4.0, -4.0]), v(&[4.0, 4.0]), 401).unwrap();
            let f = |x: &Vector| {
                ExtReal::Finite(0.5 * (&a * x.as_dvector() - &b).norm_squared() + 0.3 * x.norm_l1())
            };
            let g = numeric_conjugate(f, &grid, &z).unwrap();
            assert!(g <= hi + 1e-12);
        }
    }

    #[test]
    fn box_qp_conjugate_against_grid() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let c = v(&[0.5, -0.2]);
        let (lo, hi) = (v(&[-1.0, -1.0]), v(&[1.0, 1.0]));
        let conj = BoxQpConjugate::new(&q, &c, &lo, &hi).unwrap();
        let grid = GridSpec::new(lo.clone(), hi.clone(), 501).unwrap();
        let f = |x: &Vector| {
            ExtReal::Finite(0.5 * x.as_dvector().dot(&(&q * x.as_dvector())) + c.dot(x))
        };
        for z in [v(&[0.0, 0.0]), v(&[3.0, -2.0]), v(&[0.4, 0.1])] {
            let e = conj.conj_value(&z).to_f64();
            let g = numeric_conjugate(f, &grid, &z).unwrap();
            assert!(g <= e + 1e-12 && e - g < 1e-4);
        }
    }
}
