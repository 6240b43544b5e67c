//! Profile files and diagnostic tables.
//!
//! A profile file holds one `x u` pair per line for the nodes `x_i = i/n`.
//! Lines starting with `#` and blank lines are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evolve::TrajectoryReport;
use crate::model::Profile;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Two-column text with 17 significant digits.
pub fn format_profile(u: &Profile) -> String {
    let grid = u.grid();
    let mut s = String::with_capacity(48 * grid.n_nodes());
    for (x, v) in grid.nodes().zip(u.values()) {
        writeln!(s, "{x:.16e} {v:.16e}").unwrap();
    }
    s
}

pub fn write_profile(path: &Path, u: &Profile) -> Result<()> {
    fs::write(path, format_profile(u)).map_err(io_err(path))
}

pub fn read_profile(path: &Path) -> Result<Profile> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_profile(&text, path)
}

/// Parses two-column text; `path` only labels errors.
pub fn parse_profile(text: &str, path: &Path) -> Result<Profile> {
    let bad = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut xs = Vec::new();
    let mut us = Vec::new();
    let mut last_line = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        last_line = k + 1;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(bad(k + 1, format!("expected 2 columns, found {}", cols.len())));
        }
        let parse = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| bad(k + 1, format!("not a number: {s:?}")))?;
            if !v.is_finite() {
                return Err(bad(k + 1, format!("non-finite value {s:?}")));
            }
            Ok(v)
        };
        xs.push(parse(cols[0])?);
        us.push(parse(cols[1])?);
    }
    if us.len() < 5 {
        return Err(bad(last_line.max(1), format!("need at least 5 nodes, found {}", us.len())));
    }
    let n = (us.len() - 1) as f64;
    for (i, x) in xs.iter().enumerate() {
        if (x - i as f64 / n).abs() > 1e-9 {
            return Err(bad(0, format!("node {i} at x = {x}, expected a uniform grid on [0, 1]")));
        }
    }
    Profile::new(us).map_err(|e| bad(0, e.to_string()))
}

/// Per-step CSV: `step,time,ut_sup,tv_slope,l2_to_target,n_facets`.
/// The `l2_to_target` column is empty without a target.
pub fn diagnostics_csv(report: &TrajectoryReport) -> String {
    let mut s = String::from("step,time,ut_sup,tv_slope,l2_to_target,n_facets\n");
    for k in 0..report.n_steps() {
        let l2 = report
            .l2_to_target
            .as_ref()
            .map(|v| format!("{:e}", v[k]))
            .unwrap_or_default();
        writeln!(
            s,
            "{},{:e},{:e},{:e},{},{}",
            k + 1,
            report.times[k],
            report.ut_sup[k],
            report.tv_slope[k],
            l2,
            report.n_facets[k]
        )
        .unwrap();
    }
    s
}

/// `snapshot_<index>_t<time>.txt`; the index is zero-padded to four digits so
/// names sort by time.
pub fn snapshot_file_name(index: usize, time: f64) -> String {
    format!("snapshot_{index:04}_t{time:.6}.txt")
}
