//! Trace CSV files: a fixed header and 17 significant digits per value, so a
//! reloaded trace is bit-identical to the one written.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::certificates::TraceRow;
use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 13] = [
    "k", "t_k", "theta_k", "f_x", "f_y", "norm_g", "norm_gphi", "norm_gpsi", "lhs", "rhs_conj", "rhs_dist", "S_k",
    "R_k",
];

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text for `rows`.
pub fn trace_to_csv(rows: &[TraceRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        let mut rec = vec![r.k.to_string()];
        rec.extend(
            [
                r.t_k, r.theta_k, r.f_x, r.f_y, r.norm_g, r.norm_gphi, r.norm_gpsi, r.lhs, r.rhs_conj, r.rhs_dist, r.s_k,
                r.r_k,
            ]
            .map(fmt_f64),
        );
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Parses CSV text produced by [`trace_to_csv`].
pub fn trace_from_csv(text: &[u8]) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(text);
    let header = r.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::invalid(format!(
            "unexpected trace header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_atomic(path, &trace_to_csv(rows)?)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    trace_from_csv(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, x: f64) -> TraceRow {
        TraceRow {
            k,
            t_k: 0.1,
            theta_k: 1.0 / 3.0,
            f_x: x,
            f_y: f64::INFINITY,
            norm_g: 1e-300,
            norm_gphi: 5e-324,
            norm_gpsi: 0.0,
            lhs: -0.0,
            rhs_conj: f64::NAN,
            rhs_dist: f64::MAX,
            s_k: std::f64::consts::PI,
            r_k: f64::NEG_INFINITY,
        }
    }

    fn bits(r: &TraceRow) -> Vec<u64> {
        [
            r.t_k, r.theta_k, r.f_x, r.f_y, r.norm_g, r.norm_gphi, r.norm_gpsi, r.lhs, r.rhs_conj, r.rhs_dist, r.s_k,
            r.r_k,
        ]
        .map(f64::to_bits)
        .to_vec()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let rows: Vec<TraceRow> = (0..50).map(|k| row(k, 1.0 / (k as f64 + 7.0) - 0.3)).collect();
        let text = trace_to_csv(&rows).unwrap();
        let first = String::from_utf8(text.clone()).unwrap();
        assert!(first.starts_with("k,t_k,theta_k,f_x,f_y,norm_g,norm_gphi,norm_gpsi,lhs,rhs_conj,rhs_dist,S_k,R_k\n"));
        let back = trace_from_csv(&text).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.k, b.k);
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(trace_from_csv(b"k,t\n0,1\n").is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace(&path, &[row(0, 1.0)]).unwrap();
        write_trace(&path, &[row(0, 2.0), row(1, 3.0)]).unwrap();
        assert_eq!(read_trace(&path).unwrap().len(), 2);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
