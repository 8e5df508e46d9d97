//! CSV schemas: trajectories out, curves in.
//!
//! All floats are written with 17 significant digits so a round trip through
//! text reproduces the binary64 value exactly.

use anyhow::{bail, Context, Result};
use std::io::Write;
use tanform::dynamics::{Formulation, Trajectory};
use tanform::form::Curve;

/// 17 significant digits: round-trip exact for f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(formulation: Formulation, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    let blocks: [&[&str]; 3] = match formulation {
        Formulation::ThirdOrder => [&["x"], &["y"], &["z"]],
        Formulation::XFlow => [&["x"], &["y"], &["p"]],
        Formulation::YFlow => [&["x"], &["p0_"], &["p1_"]],
    };
    for block in blocks {
        for i in 1..=m {
            cols.push(format!("{}{i}", block[0]));
        }
    }
    cols.join(",")
}

/// Write a trajectory in the per-formulation column order
/// (`t,x1..xm,y1..ym,z1..zm`, `t,x..,y..,p..` or `t,x..,p0_..,p1_..`).
pub fn write_trajectory(traj: &Trajectory, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{}", header(traj.formulation, traj.m))?;
    for (k, state) in traj.states.iter().enumerate() {
        let mut row = Vec::with_capacity(1 + state.len());
        row.push(fmt_f64(traj.time(k)));
        row.extend(state.iter().map(|v| fmt_f64(*v)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a curve for the action: takes the `t` column and the `x1..xm`
/// columns (by header name) from any trajectory or curve CSV, ignoring
/// extra columns, and checks the grid is uniform.
pub fn read_curve(path: &str, m: usize) -> Result<Curve> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().context("empty CSV file")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let t_col = cols
        .iter()
        .position(|c| *c == "t")
        .context("CSV lacks a `t` column")?;
    let mut x_cols = Vec::with_capacity(m);
    for i in 1..=m {
        let name = format!("x{i}");
        let idx = cols
            .iter()
            .position(|c| *c == name)
            .with_context(|| format!("CSV lacks an `{name}` column"))?;
        x_cols.push(idx);
    }

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (row_no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            bail!(
                "{path}: row {} has {} fields, header has {}",
                row_no + 2,
                fields.len(),
                cols.len()
            );
        }
        let parse = |idx: usize| -> Result<f64> {
            fields[idx].parse::<f64>().with_context(|| {
                format!("{path}: row {}: bad number `{}`", row_no + 2, fields[idx])
            })
        };
        times.push(parse(t_col)?);
        samples.push(
            x_cols
                .iter()
                .map(|&i| parse(i))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    if times.len() < 5 {
        bail!("{path}: a curve needs at least 5 rows");
    }
    let t0 = times[0];
    let t1 = *times.last().expect("nonempty");
    let h = (t1 - t0) / (times.len() - 1) as f64;
    for (k, &t) in times.iter().enumerate() {
        let expect = t0 + k as f64 * h;
        if (t - expect).abs() > 1e-9 * (1.0 + expect.abs()) {
            bail!("{path}: time grid is not uniform at row {}", k + 2);
        }
    }
    Curve::new(t0, t1, samples).map_err(anyhow::Error::from)
}
