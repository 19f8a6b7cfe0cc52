//! Run configuration, trace and report files, rate tables and the
//! acceptance matrix behind the command-line tool.

mod config;
mod rates;
mod run;
mod trace_csv;
mod verify;

pub use config::*;
pub use rates::*;
pub use run::*;
pub use trace_csv::*;
pub use verify::*;
