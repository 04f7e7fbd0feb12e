//! Fixed-format CSV for fields, profiles, trajectories and sweep tables.
//!
//! Numbers are written with 17 significant digits in exponent form and
//! lines end in `\n`, so equal inputs give byte-identical files.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::classify::SweepRow;
use crate::error::{Error, Result};
use crate::evolution::Sample;
use crate::grid::{RadialField, RadialGrid};

pub const FIELD_HEADER: &str = "r,re_u,im_u";
pub const PROFILE_HEADER: &str = "r,Q";
pub const TRAJECTORY_HEADER: &str = "t,mass,kinetic_a,l4,energy,V,dV,d2V";
pub const SWEEP_HEADER: &str = "a,lambda,me_ratio,mk_ratio,predicted,observed,agreement,t_blowup,scatter_distance,error";

/// Relative tolerance on node positions when a grid is inferred from a file.
const NODE_TOL: f64 = 1e-9;

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn write_field<W: Write>(mut out: W, u: &RadialField) -> Result<()> {
    writeln!(out, "{FIELD_HEADER}")?;
    for (r, v) in u.grid().nodes().iter().zip(u.values()) {
        writeln!(out, "{},{},{}", fmt_num(*r), fmt_num(v.re), fmt_num(v.im))?;
    }
    Ok(())
}

pub fn write_profile<W: Write>(mut out: W, u: &RadialField) -> Result<()> {
    writeln!(out, "{PROFILE_HEADER}")?;
    for (r, v) in u.grid().nodes().iter().zip(u.values()) {
        writeln!(out, "{},{}", fmt_num(*r), fmt_num(v.re))?;
    }
    Ok(())
}

pub fn write_trajectory<W: Write>(mut out: W, samples: &[Sample]) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for s in samples {
        let cols = [s.t, s.f.mass, s.f.kinetic_a, s.f.l4, s.f.energy_a, s.v, s.dv, s.d2v];
        let line: Vec<String> = cols.iter().map(|&x| fmt_num(x)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_sweep<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        // Error text is quoted with embedded quotes doubled.
        let err = r
            .error
            .as_ref()
            .map(|e| format!("\"{}\"", e.replace('"', "\"\"")))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_num(r.a),
            fmt_num(r.lambda),
            fmt_opt(r.me_ratio),
            fmt_opt(r.mk_ratio),
            r.predicted.map(|p| p.as_str()).unwrap_or_default(),
            r.observed.map(|o| o.as_str()).unwrap_or_default(),
            r.agreement.map(|a| a.to_string()).unwrap_or_default(),
            fmt_opt(r.t_blowup),
            fmt_opt(r.scatter_distance),
            err,
        )?;
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Reads an `r,re_u,im_u` file. The grid is inferred from the nodes, which
/// must be `r_k = (k+1) h` for a uniform `h`.
pub fn read_field<R: BufRead>(input: R) -> Result<RadialField> {
    let mut rows: Vec<(f64, Complex64)> = Vec::new();
    let mut saw_header = false;
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if !saw_header {
            if text != FIELD_HEADER {
                return Err(parse_err(lineno, format!("expected header `{FIELD_HEADER}`, found `{text}`")));
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<&str> = text.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(parse_err(lineno, format!("expected 3 columns, found {}", cols.len())));
        }
        let mut nums = [0.0; 3];
        for (slot, c) in nums.iter_mut().zip(&cols) {
            *slot = c
                .parse::<f64>()
                .map_err(|_| parse_err(lineno, format!("`{c}` is not a number")))?;
            if !slot.is_finite() {
                return Err(parse_err(lineno, format!("`{c}` is not finite")));
            }
        }
        let k = rows.len();
        if k > 0 {
            let h = rows[0].0;
            let expected = (k + 1) as f64 * h;
            if (nums[0] - expected).abs() > NODE_TOL * expected {
                return Err(parse_err(
                    lineno,
                    format!("node r = {} breaks the uniform grid (expected {expected})", nums[0]),
                ));
            }
        } else if !(nums[0] > 0.0) {
            return Err(parse_err(lineno, "first node must be positive"));
        }
        rows.push((nums[0], Complex64::new(nums[1], nums[2])));
    }
    if !saw_header {
        return Err(parse_err(1, "empty field file"));
    }
    let n = rows.len();
    let h = rows.first().map(|r| r.0).unwrap_or(0.0);
    let grid = RadialGrid::new(n as f64 * h, n)?;
    RadialField::new(grid, rows.into_iter().map(|r| r.1).collect())
}
