//! CSV artifacts. Floats are written in the shortest form that round-trips,
//! so identical inputs give identical bytes.

use std::io::{Read, Write};

use crate::chattering::ConvergenceRow;
use crate::controls::ControlSignal;
use crate::dynamics::{Grid, Trajectory};
use crate::error::{Error, Result};
use crate::optimizer::{RelaxationReport, TraceEntry};
use crate::relax_young::YoungControl;
use crate::Vector;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

fn fmt(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        // `-0` and `0` print differently but compare equal.
        "0".into()
    } else if !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Columns `t, x1..xN, residual`.
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(numbered("x", traj.dim()));
    header.push("residual".into());
    out.write_record(&header)?;
    for (k, x) in traj.states.iter().enumerate() {
        let mut row = vec![fmt(traj.grid.time(k))];
        row.extend(x.iter().map(|v| fmt(*v)));
        row.push(fmt(traj.residuals[k]));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `t, u1..um`, one row per interval at its left endpoint.
pub fn write_control<W: Write>(w: W, u: &ControlSignal) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["t".to_string()];
    header.extend(numbered("u", u.dim()));
    out.write_record(&header)?;
    for (k, v) in u.values().iter().enumerate() {
        let mut row = vec![fmt(u.grid().time(k))];
        row.extend(v.iter().map(|c| fmt(*c)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `k, t, atom, u1..um, weight`.
pub fn write_young<W: Write>(w: W, lam: &YoungControl) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["k".to_string(), "t".into(), "atom".into()];
    header.extend(numbered("u", lam.dim()));
    header.push("weight".into());
    out.write_record(&header)?;
    for (k, mu) in lam.measures().iter().enumerate() {
        for (i, (a, wgt)) in mu.atoms().iter().zip(mu.weights()).enumerate() {
            let mut row = vec![k.to_string(), fmt(lam.grid().time(k)), i.to_string()];
            row.extend(a.iter().map(|c| fmt(*c)));
            row.push(fmt(*wgt));
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Columns `n, weak_gap, state_gap, J, gap_to_mr`.
pub fn write_convergence<W: Write>(w: W, rows: &[ConvergenceRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["n", "weak_gap", "state_gap", "J", "gap_to_mr"])?;
    for r in rows {
        out.write_record([
            r.n.to_string(),
            fmt(r.weak_gap),
            fmt(r.state_gap),
            fmt(r.cost),
            fmt(r.gap_to_mr),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `iteration, objective, step`.
pub fn write_trace<W: Write>(w: W, trace: &[TraceEntry]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["iteration", "objective", "step"])?;
    for e in trace {
        out.write_record([e.iteration.to_string(), fmt(e.objective), fmt(e.step)])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `u, L, L_biconjugate` for scalar controls.
pub fn write_envelope<W: Write>(w: W, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["u", "L", "L_biconjugate"])?;
    for (u, l, e) in rows {
        out.write_record([fmt(*u), fmt(*l), fmt(*e)])?;
    }
    out.flush()?;
    Ok(())
}

/// Two-column `key, value` summary of a relaxation report.
pub fn write_report<W: Write>(w: W, report: &RelaxationReport) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["key", "value"])?;
    let rows: Vec<(&str, String)> = vec![
        ("problem", report.problem.clone()),
        ("intervals", report.intervals.to_string()),
        ("atoms", report.atoms.to_string()),
        ("m_r", fmt(report.m_r)),
        ("m_hat_r", fmt(report.m_hat_r)),
        ("m_estimate", fmt(report.m_estimate)),
        ("best_n", report.best_n.to_string()),
        ("converged", report.converged.to_string()),
        ("tie", report.tie.to_string()),
        ("equivalence_ok", report.equivalence_ok.to_string()),
        ("sandwich_ok", report.sandwich_ok.to_string()),
        ("iterations", report.trace.last().map_or(0, |e| e.iteration).to_string()),
    ];
    for (k, v) in rows {
        out.write_record([k, v.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<R: Read>(r: R, first: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some(first) {
        return Err(Error::schema("header", format!("expected first column {first:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.trim().parse::<f64>().map_err(|e| {
                    Error::schema(format!("row {}, column {}", line + 1, header.get(col).map_or("?", |s| s)), e.to_string())
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::schema(format!("row {}", line + 1), "wrong number of columns"));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::schema("rows", "no data rows"));
    }
    Ok((header, rows))
}

fn check_times(rows: &[Vec<f64>], grid: Grid) -> Result<()> {
    let tol = 1e-9 * grid.horizon().max(1.0);
    for (k, row) in rows.iter().enumerate() {
        if (row[0] - grid.time(k)).abs() > tol {
            return Err(Error::schema(
                format!("row {}, column t", k + 1),
                format!("time {} is off the uniform grid (expected {})", row[0], grid.time(k)),
            ));
        }
    }
    Ok(())
}

/// Reads a trajectory on the uniform grid of `[0, horizon]` implied by its row count.
pub fn read_trajectory<R: Read>(r: R, horizon: f64) -> Result<Trajectory> {
    let (header, rows) = read_rows(r, "t")?;
    let has_residual = header.last().map(String::as_str) == Some("residual");
    let dim = header.len() - 1 - usize::from(has_residual);
    if dim == 0 || rows.len() < 2 {
        return Err(Error::schema("header", "a trajectory needs state columns and two rows"));
    }
    let grid = Grid::new(horizon, rows.len() - 1)?;
    check_times(&rows, grid)?;
    Ok(Trajectory {
        grid,
        states: rows.iter().map(|r| Vector::from_column_slice(&r[1..=dim])).collect(),
        residuals: rows
            .iter()
            .map(|r| if has_residual { r[dim + 1] } else { 0.0 })
            .collect(),
    })
}

/// Reads a control signal with one row per interval of `[0, horizon]`.
pub fn read_control<R: Read>(r: R, horizon: f64) -> Result<ControlSignal> {
    let (header, rows) = read_rows(r, "t")?;
    if header.len() < 2 {
        return Err(Error::schema("header", "a control needs at least one component column"));
    }
    let grid = Grid::new(horizon, rows.len())?;
    check_times(&rows, grid)?;
    ControlSignal::new(grid, rows.iter().map(|r| Vector::from_column_slice(&r[1..])).collect())
}

/// Reads a convergence table written by [`write_convergence`].
pub fn read_convergence<R: Read>(r: R) -> Result<Vec<ConvergenceRow>> {
    let (header, rows) = read_rows(r, "n")?;
    if header != ["n", "weak_gap", "state_gap", "J", "gap_to_mr"] {
        return Err(Error::schema("header", "unexpected convergence columns"));
    }
    Ok(rows
        .iter()
        .map(|r| ConvergenceRow {
            n: r[0] as usize,
            weak_gap: r[1],
            state_gap: r[2],
            cost: r[3],
            gap_to_mr: r[4],
            feedback_slack: f64::NAN,
        })
        .collect())
}
