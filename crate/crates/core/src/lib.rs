//! Proximal gradient and proximal subgradient methods on composite
//! objectives `f = φ + ψ`, with per-iterate convergence certificates built
//! from the Fenchel conjugate of `f`.

pub mod certificates;
pub mod conjugate;
pub mod error;
pub mod harness;
pub mod problems;
pub mod prox;
pub mod qp;
pub mod schedules;
pub mod solver;
pub mod vecspace;

pub use error::{Error, Result};
pub use vecspace::{CompositeObjective, ExtReal, Tolerance, Vector};
