//! Named instances generated from a seeded ChaCha stream.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::vecspace::Vector;

use super::{make_box_qp, make_box_qp_with_grid, make_l1_regression, make_lasso, make_least_squares, ProblemInstance};

pub const BUILTIN_NAMES: [&str; 7] = ["ls-1", "ls-2", "lasso-2", "lasso-20", "box-qp-2", "box-qp-10", "l1reg-2"];

/// Grid resolution of the tabulated conjugate on `box-qp-2`.
const BOX_QP_2_GRID: usize = 501;

/// Seed used when none is given; `None` for instances without randomness.
pub fn default_seed(name: &str) -> Option<u64> {
    match name {
        "ls-1" => None,
        "ls-2" => Some(2),
        "lasso-2" => Some(3),
        "lasso-20" => Some(20),
        "box-qp-2" => Some(4),
        "box-qp-10" => Some(10),
        "l1reg-2" => Some(7),
        _ => None,
    }
}

pub fn builtin(name: &str) -> Result<ProblemInstance> {
    builtin_with_seed(name, None)
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::new((0..n).map(|_| rng.sample(StandardNormal)).collect()).expect("finite samples")
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::new((0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("finite samples")
}

/// Builds a named instance; `seed` overrides the default generator seed.
pub fn builtin_with_seed(name: &str, seed: Option<u64>) -> Result<ProblemInstance> {
    if !BUILTIN_NAMES.contains(&name) {
        return Err(Error::UnknownProblem(name.to_string()));
    }
    let seed = default_seed(name).map(|d| seed.unwrap_or(d));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let rng = &mut rng;
    let inst = match name {
        "ls-1" => make_least_squares(&DMatrix::from_element(1, 1, 2.0), &Vector::from_element(1, 2.0), &Vector::zeros(1))?,
        "ls-2" => {
            let a = gaussian(rng, 4, 2);
            let b = gaussian_vec(rng, 4);
            let x0 = uniform_vec(rng, 2, -2.0, 2.0);
            make_least_squares(&a, &b, &x0)?
        }
        "lasso-2" => {
            let a = gaussian(rng, 3, 2);
            let b = gaussian_vec(rng, 3);
            let lambda = 0.3 * a.tr_mul(b.as_dvector()).amax();
            let x0 = uniform_vec(rng, 2, -2.0, 2.0);
            make_lasso(&a, &b, lambda, &x0)?
        }
        "lasso-20" => lasso_20(rng)?,
        "box-qp-2" => {
            let m = gaussian(rng, 2, 2);
            let q = &m * m.transpose() + DMatrix::identity(2, 2) * 0.5;
            // Optimum at the corner (1, 1): −∇φ there lies in the normal cone.
            let corner = DVector::from_element(2, 1.0);
            let w = DVector::from_fn(2, |_, _| rng.random_range(0.5..1.5));
            let c = Vector::from_dvector(-(&q * &corner) - w);
            let x0 = uniform_vec(rng, 2, -1.0, 1.0);
            make_box_qp_with_grid(
                &q,
                &c,
                &Vector::from_element(2, -1.0),
                &Vector::from_element(2, 1.0),
                &x0,
                BOX_QP_2_GRID,
            )?
        }
        "box-qp-10" => {
            let m = gaussian(rng, 10, 10);
            let q = (&m * m.transpose()) / 10.0 + DMatrix::identity(10, 10) * 0.05;
            let c = gaussian_vec(rng, 10).scaled(2.0);
            let x0 = uniform_vec(rng, 10, -1.0, 1.0);
            make_box_qp(&q, &c, &Vector::from_element(10, -1.0), &Vector::from_element(10, 1.0), &x0)?
        }
        "l1reg-2" => {
            let a = gaussian(rng, 6, 2);
            let b = gaussian_vec(rng, 6);
            let x0 = uniform_vec(rng, 2, -1.0, 1.0);
            make_l1_regression(&a, &b, &Vector::from_element(2, -1.0), &Vector::from_element(2, 1.0), &x0)?
        }
        _ => unreachable!("name checked above"),
    };
    Ok(inst.named(name, seed))
}

/// `m = 40`, `n = 20`, singular values log-spaced over three decades and a
/// ground truth with unit weight on every right singular vector, so the
/// poorly conditioned directions still carry error late in a run. The ℓ1
/// weight is small enough that most of the solution stays nonzero.
fn lasso_20(rng: &mut ChaCha8Rng) -> Result<ProblemInstance> {
    let (m, n) = (40, 20);
    let u = gaussian(rng, m, n).qr().q();
    let v = gaussian(rng, n, n).qr().q();
    let s = DVector::from_fn(n, |i, _| 10f64.powf(-3.0 * i as f64 / (n - 1) as f64));
    let a = &u * DMatrix::from_diagonal(&s) * v.transpose();
    let signs = DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    let b = Vector::from_dvector(&a * (&v * signs));
    let lambda = 1e-5 * a.tr_mul(b.as_dvector()).amax();
    make_lasso(&a, &b, lambda, &Vector::zeros(n))
}
