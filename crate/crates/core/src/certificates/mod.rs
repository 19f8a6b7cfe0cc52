//! Dual certificates `z_k` and the bound checks built on them.

mod bounds;
mod report;
mod state;

pub use bounds::*;
pub use report::*;
pub use state::*;
