//! Runs the full acceptance matrix and prints one line per criterion.
//! Built without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use proxcert::harness::{verify_all, VerifyOptions, CRITERIA};

fn main() -> ExitCode {
    let summary = match verify_all(&VerifyOptions::default()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("acceptance matrix did not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    for c in &summary.criteria {
        println!("{}", c.line());
    }
    let passed = summary.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed in {:.1} s", CRITERIA.len(), summary.seconds);
    if passed == CRITERIA.len() && summary.criteria.len() == CRITERIA.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
