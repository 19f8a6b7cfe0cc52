//! Rate tables: per-iterate optimality gaps next to the `O(1/k)` and
//! `O(1/k²)` bounds, with a fitted tail exponent per run.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificates::{bound_thm2_final, fit_tail_slope, rate_accel, rate_prox_grad, RateFit};
use crate::error::{Error, Result};
use crate::schedules::ThetaKind;

use super::config::RunConfig;
use super::run::{execute, ExitStatus, RunOutput};
use super::trace_csv::write_atomic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesRow {
    pub run: String,
    /// Index of the iterate `x_k`.
    pub k: usize,
    pub gap: f64,
    pub bound_1_over_k: f64,
    pub bound_1_over_k2: f64,
    /// `θ_{k−1}²·dist²/(2t_{k−1})`; NaN for `θ ≡ 1`.
    pub thm2_bound: f64,
    /// Gap over the bound that applies to the run; `0` when the bound is `0`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesSummary {
    pub run: String,
    pub fit: Option<RateFit>,
    pub max_ratio: f64,
}

/// Table rows for one proximal gradient run, with `L` replaced by
/// `1/min_{i<k} t_i`.
pub fn rates_rows(out: &RunOutput) -> Result<Vec<RatesRow>> {
    let cfg = &out.report.config;
    if cfg.algorithm.is_subgradient() {
        return Err(Error::invalid("rate tables cover proximal gradient runs"));
    }
    let run = format!("{}/{}", cfg.algorithm, out.report.meta.theta);
    let (fb, d) = (out.report.context.f_bar, out.report.context.dist);
    let plain = out.report.meta.theta == ThetaKind::ConstantOne;
    let mut t_min = f64::INFINITY;
    Ok(out
        .rows()
        .iter()
        .map(|r| {
            t_min = t_min.min(r.t_k);
            let (l, k) = (1.0 / t_min, r.k + 1);
            let b1 = rate_prox_grad(l, d, k);
            let b2 = rate_accel(l, d, k);
            let gap = r.f_x - fb;
            let bound = if plain { b1 } else { b2 };
            RatesRow {
                run: run.clone(),
                k,
                gap,
                bound_1_over_k: b1,
                bound_1_over_k2: b2,
                thm2_bound: if plain { f64::NAN } else { bound_thm2_final(r.theta_k, r.t_k, d) },
                ratio: if bound > 0.0 { gap.max(0.0) / bound } else { 0.0 },
            }
        })
        .collect())
}

pub fn rates_to_csv(rows: &[RatesRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "k", "gap", "bound_1_over_k", "bound_1_over_k2", "thm2_bound", "ratio"])?;
    for r in rows {
        let nums = [r.gap, r.bound_1_over_k, r.bound_1_over_k2, r.thm2_bound, r.ratio].map(|v| format!("{v:.16e}"));
        let mut rec = vec![r.run.clone(), r.k.to_string()];
        rec.extend(nums);
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Runs every configuration and builds the combined table.
pub fn rates_sweep(configs: &[RunConfig]) -> Result<(Vec<RatesRow>, Vec<RatesSummary>)> {
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for cfg in configs {
        let out = execute(cfg)?;
        let r = rates_rows(&out)?;
        summaries.push(RatesSummary {
            run: r.first().map(|x| x.run.clone()).unwrap_or_default(),
            fit: fit_tail_slope(out.rows(), out.report.context.f_bar),
            max_ratio: r.iter().map(|x| x.ratio).fold(0.0, f64::max),
        });
        rows.extend(r);
    }
    Ok((rows, summaries))
}

/// Writes the table to `table` (when given) and prints the fits. Exits `2`
/// when some ratio exceeds `1` beyond the configured tolerance.
pub fn cmd_rates(configs: &[RunConfig], table: Option<&Path>, log: &mut dyn Write) -> ExitStatus {
    let result = rates_sweep(configs).and_then(|(rows, summaries)| {
        if let Some(p) = table {
            write_atomic(p, &rates_to_csv(&rows)?)?;
        }
        Ok((rows, summaries))
    });
    let (rows, summaries) = match result {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            return ExitStatus::ConfigError;
        }
    };
    for s in &summaries {
        match &s.fit {
            Some(f) => {
                let _ = writeln!(
                    log,
                    "{}: max ratio {:.4}, tail exponent {:.3} (k = {}..{}, {} points)",
                    s.run, s.max_ratio, f.slope, f.k_from, f.k_to, f.points
                );
            }
            None => {
                let _ = writeln!(log, "{}: max ratio {:.4}, gap at rounding level, no fit", s.run, s.max_ratio);
            }
        }
    }
    let tol = configs.first().map(|c| c.tol).unwrap_or_default();
    let bad = rows.iter().find(|r| {
        let bound = if r.thm2_bound.is_nan() { r.bound_1_over_k } else { r.bound_1_over_k2 };
        !tol.le(r.gap, bound)
    });
    match bad {
        Some(r) => {
            let _ = writeln!(log, "FAILED: {} gap {:.6e} exceeds the bound at k = {}", r.run, r.gap, r.k);
            ExitStatus::CheckFailure
        }
        None => ExitStatus::Pass,
    }
}
