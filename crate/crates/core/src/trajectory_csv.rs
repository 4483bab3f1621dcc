//! Trajectory CSV format.
//!
//! Header `t,q1,...,qN[,qd1,...,qdN]`, one row per sample, `.` as decimal
//! separator. Values are written in Rust's shortest round-trip decimal form,
//! so `read(write(t)) == t` bit for bit.
//!
//! When the velocity columns are absent, velocities are reconstructed by
//! finite differences: central differences for interior samples, one-sided
//! differences at the two ends, zero for a single-sample file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dynamics::{JointState, Trajectory};
use crate::error::{Error, Result};

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trajectory_csv(&text)
}

pub fn write_trajectory_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trajectory_to_csv(traj)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let n = traj.dof();
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",q{i}");
    }
    for i in 1..=n {
        let _ = write!(out, ",qd{i}");
    }
    out.push('\n');
    for (t, s) in traj.iter() {
        let _ = write!(out, "{t}");
        for v in s.q.iter().chain(&s.qd) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// `t,qd1,...,qdN` only.
pub fn velocities_to_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t");
    for i in 1..=traj.dof() {
        let _ = write!(out, ",qd{i}");
    }
    out.push('\n');
    for (t, s) in traj.iter() {
        let _ = write!(out, "{t}");
        for v in &s.qd {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Returns `(dof, has_velocities)`.
fn parse_header(header: &str) -> Result<(usize, bool)> {
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let bad = || {
        parse_err(
            1,
            format!("bad header `{header}` (expected t,q1,...,qN[,qd1,...,qdN])"),
        )
    };
    if cols.first() != Some(&"t") {
        return Err(bad());
    }
    let dof = cols[1..]
        .iter()
        .take_while(|c| c.starts_with('q') && !c.starts_with("qd"))
        .count();
    if dof == 0 {
        return Err(bad());
    }
    let rest = &cols[1 + dof..];
    let has_velocities = match rest.len() {
        0 => false,
        n if n == dof => true,
        _ => return Err(bad()),
    };
    for i in 0..dof {
        if cols[1 + i] != format!("q{}", i + 1) {
            return Err(bad());
        }
        if has_velocities && rest[i] != format!("qd{}", i + 1) {
            return Err(bad());
        }
    }
    Ok((dof, has_velocities))
}

pub fn parse_trajectory_csv(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let header = lines
        .next()
        .map(|(_, l)| l)
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let (dof, has_velocities) = parse_header(header.trim_start_matches('\u{feff}'))?;
    let width = 1 + if has_velocities { 2 * dof } else { dof };

    let mut t: Vec<f64> = Vec::new();
    let mut samples = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(parse_err(
                line_no,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        let mut values = Vec::with_capacity(width);
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_err(
                    line_no,
                    format!("column {}: invalid number `{field}`", c + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line_no,
                    format!("column {}: non-finite value", c + 1),
                ));
            }
            values.push(v);
        }
        if let Some(&prev) = t.last() {
            if values[0] <= prev {
                return Err(parse_err(
                    line_no,
                    format!("time {} does not increase (previous {prev})", values[0]),
                ));
            }
        }
        t.push(values[0]);
        let q = values[1..=dof].to_vec();
        let qd = if has_velocities {
            values[1 + dof..].to_vec()
        } else {
            Vec::new()
        };
        samples.push(JointState { q, qd });
    }
    if samples.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    if !has_velocities {
        fill_finite_difference_velocities(&t, &mut samples);
    }
    Trajectory::new(t, samples, dof)
}

fn fill_finite_difference_velocities(t: &[f64], samples: &mut [JointState]) {
    let n = samples.len();
    let dof = samples[0].q.len();
    let velocities: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            if n == 1 {
                return vec![0.0; dof];
            }
            let (a, b) = match k {
                0 => (0, 1),
                k if k == n - 1 => (n - 2, n - 1),
                k => (k - 1, k + 1),
            };
            (0..dof)
                .map(|i| (samples[b].q[i] - samples[a].q[i]) / (t[b] - t[a]))
                .collect()
        })
        .collect();
    for (s, qd) in samples.iter_mut().zip(velocities) {
        s.qd = qd;
    }
}
