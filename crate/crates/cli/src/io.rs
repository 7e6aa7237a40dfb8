//! CSV and JSON formats.
//!
//! Signals are CSV with a header `t,u1,...,um` and one sample per row.
//! Trajectories add `x*` and `y*` columns and one extra row for the final
//! state, whose input and output cells are empty. Matrices are JSON arrays
//! of rows; vectors are flat arrays.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use peu_core::adversary::CloudReport;
use peu_core::lti::Trajectory;
use peu_core::signals::PeReport;
use peu_core::Signal;
use serde::de::DeserializeOwned;

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn parse_json<T: DeserializeOwned>(name: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CliError::parse(name, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(&path.display().to_string(), &read_text(path)?)
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(name: &str, text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> =
        reader.headers().map_err(|e| CliError::parse(name, e))?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(CliError::parse(name, "first column must be `t`"));
    }
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| CliError::parse(name, e)))
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok(Table { header, rows })
}

fn parse_cell(name: &str, row: usize, cell: &str) -> Result<f64> {
    let x: f64 =
        cell.parse().map_err(|_| CliError::parse(name, format!("row {}: `{cell}` is not a number", row + 1)))?;
    if !x.is_finite() {
        return Err(CliError::parse(name, format!("row {}: non-finite value", row + 1)));
    }
    Ok(x)
}

/// Columns whose names start with `prefix` (`u1`, `u2`, ...), in file order.
fn columns(table: &Table, prefix: char) -> Vec<usize> {
    table
        .header
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, h)| h.starts_with(prefix) && h[1..].chars().all(|c| c.is_ascii_digit()))
        .map(|(i, _)| i)
        .collect()
}

/// Rows of the given columns, skipping trailing rows where they are empty.
fn extract(name: &str, table: &Table, cols: &[usize]) -> Result<Signal> {
    let mut data = Vec::new();
    let mut ended = false;
    for (r, row) in table.rows.iter().enumerate() {
        let empty = cols.iter().all(|&c| row[c].is_empty());
        if empty {
            ended = true;
            continue;
        }
        if ended {
            return Err(CliError::parse(name, format!("row {}: data after an empty row", r + 1)));
        }
        for &c in cols {
            data.push(parse_cell(name, r, &row[c])?);
        }
    }
    Signal::new(cols.len(), data).map_err(|e| CliError::parse(name, e))
}

/// Signal CSV: every column after `t` is a coordinate.
pub fn parse_signal(name: &str, text: &str) -> Result<Signal> {
    let table = read_table(name, text)?;
    let cols: Vec<usize> = (1..table.header.len()).collect();
    if cols.is_empty() {
        return Err(CliError::parse(name, "no signal columns"));
    }
    extract(name, &table, &cols)
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    parse_signal(&path.display().to_string(), &read_text(path)?)
}

/// Input-output data: the `u*` and `y*` columns of a signal or trajectory
/// CSV. Other columns (such as `x*`) are ignored.
pub fn parse_io_data(name: &str, text: &str) -> Result<(Signal, Signal)> {
    let table = read_table(name, text)?;
    let (u_cols, y_cols) = (columns(&table, 'u'), columns(&table, 'y'));
    if u_cols.is_empty() || y_cols.is_empty() {
        return Err(CliError::parse(name, "data needs u* and y* columns"));
    }
    let u = extract(name, &table, &u_cols)?;
    let y = extract(name, &table, &y_cols)?;
    if u.len() != y.len() {
        return Err(CliError::parse(name, "u and y have different lengths"));
    }
    Ok((u, y))
}

pub fn signal_csv(prefix: char, v: &Signal) -> String {
    let mut out = String::from("t");
    for j in 1..=v.dim() {
        let _ = write!(out, ",{prefix}{j}");
    }
    out.push('\n');
    for (t, s) in v.samples().enumerate() {
        let _ = write!(out, "{t}");
        for x in s {
            let _ = write!(out, ",{}", fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}

pub fn trajectory_csv(tr: &Trajectory) -> String {
    let (m, n, p) = (tr.u.dim(), tr.x.dim(), tr.y.dim());
    let mut out = String::from("t");
    for (prefix, dim) in [('u', m), ('x', n), ('y', p)] {
        for j in 1..=dim {
            let _ = write!(out, ",{prefix}{j}");
        }
    }
    out.push('\n');
    for t in 0..tr.x.len() {
        let _ = write!(out, "{t}");
        let cells = |s: Option<&[f64]>, dim: usize, out: &mut String| match s {
            Some(s) => s.iter().for_each(|x| {
                let _ = write!(out, ",{}", fmt_f64(*x));
            }),
            None => (0..dim).for_each(|_| out.push(',')),
        };
        let in_range = t < tr.u.len();
        cells(in_range.then(|| tr.u.sample(t)), m, &mut out);
        cells(Some(tr.x.sample(t)), n, &mut out);
        cells(in_range.then(|| tr.y.sample(t)), p, &mut out);
        out.push('\n');
    }
    out
}

pub fn pe_csv(report: &PeReport) -> String {
    let mut out = String::from("k,rows,cols,rank,full_row_rank\n");
    for (k, r) in &report.per_order {
        let _ = writeln!(out, "{k},{},{},{},{}", r.rows, r.cols, r.rank, r.full_row_rank);
    }
    out
}

pub fn cloud_csv(report: &CloudReport, m: usize) -> String {
    let mut out = String::from("a");
    for j in 1..=m {
        let _ = write!(out, ",b{j}");
    }
    out.push_str(",x0,verified\n");
    for p in &report.points {
        let _ = write!(out, "{}", fmt_f64(p.a));
        for b in &p.b {
            let _ = write!(out, ",{}", fmt_f64(*b));
        }
        let _ = writeln!(out, ",{},{}", fmt_f64(p.x0), p.verified);
    }
    out
}

pub fn parse_matrix(name: &str, text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = parse_json(name, text)?;
    let m = peu_core::rowmajor::from_rows(&rows, 0).map_err(|e| CliError::parse(name, e))?;
    if m.is_empty() {
        return Err(CliError::parse(name, "empty matrix"));
    }
    Ok(m)
}

pub fn parse_vector(name: &str, text: &str) -> Result<DVector<f64>> {
    let v: Vec<f64> = parse_json(name, text)?;
    if v.is_empty() {
        return Err(CliError::parse(name, "empty vector"));
    }
    Ok(DVector::from_vec(v))
}

/// Kernel vector laid out with one row per input coordinate and one column
/// per block: column `i` is `eta_i`.
pub fn parse_eta(name: &str, text: &str) -> Result<Vec<DVector<f64>>> {
    let m = parse_matrix(name, text)?;
    Ok(m.column_iter().map(|c| c.into_owned()).collect())
}

/// Comma-separated numbers, as in `--x0 0.1,-2,3`.
pub fn parse_list(what: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{what}: `{s}` is not a finite number")))
        })
        .collect()
}
