//! File formats: curve and response CSVs, precomputed distance matrices,
//! flat key-value study configs, and CSV study reports.
//!
//! Curves CSV: one curve per row, `p` numeric columns, `,` separator and `.`
//! decimal point. An optional first row `u=<value>,…` gives the grid;
//! otherwise the grid is `p` equidistant points on [0, 1].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::error::{Error, Result};
use crate::model::{DistanceMatrix, FunctionalSample, Grid};
use crate::simulation::{DegreeStudyReport, NullStudyReport, PowerStudyReport};

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(input)
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::parse(line, 0, format!("{other:?}")),
    }
}

fn parse_number(field: &str, line: u64, column: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::parse(line, column, format!("'{field}' is not a number")))
}

fn parse_row(record: &StringRecord) -> Result<Vec<f64>> {
    let line = line_of(record);
    record
        .iter()
        .enumerate()
        .map(|(j, f)| parse_number(f, line, j + 1))
        .collect()
}

/// Reads a curves CSV; see the module docs for the format.
pub fn read_curves<R: Read>(input: R) -> Result<FunctionalSample> {
    let mut rdr = reader(input);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(Error::parse(1, 0, "empty input")),
    };
    let (grid, mut rows) = if first.iter().any(|f| f.starts_with("u=")) {
        let line = line_of(&first);
        let points = first
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let v = f
                    .strip_prefix("u=")
                    .ok_or_else(|| Error::parse(line, j + 1, format!("header field '{f}' lacks 'u='")))?;
                parse_number(v, line, j + 1)
            })
            .collect::<Result<Vec<_>>>()?;
        (Some(Grid::new(points)?), Vec::new())
    } else {
        (None, vec![parse_row(&first)?])
    };
    let width = grid.as_ref().map_or_else(|| rows[0].len(), Grid::len);
    for record in records {
        let record = record.map_err(csv_error)?;
        if record.len() != width {
            return Err(Error::parse(
                line_of(&record),
                record.len().min(width) + 1,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        rows.push(parse_row(&record)?);
    }
    if rows.is_empty() {
        return Err(Error::parse(2, 0, "no curves after the grid header"));
    }
    let grid = match grid {
        Some(g) => g,
        None => Grid::uniform(width)?,
    };
    FunctionalSample::from_rows(rows, grid)
}

pub fn parse_curves_csv(path: impl AsRef<Path>) -> Result<FunctionalSample> {
    read_curves(BufReader::new(File::open(path)?))
}

/// Reads one finite number per line.
pub fn read_response<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for record in reader(input).records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        if record.len() != 1 {
            return Err(Error::parse(line, 2, format!("expected one value, found {}", record.len())));
        }
        let v = parse_number(&record[0], line, 1)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                row: out.len(),
                col: 0,
            });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::parse(1, 0, "empty input"));
    }
    Ok(out)
}

pub fn parse_response_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_response(BufReader::new(File::open(path)?))
}

/// Reads a square symmetric distance matrix, one row per line.
pub fn read_distance_matrix<R: Read>(input: R) -> Result<DistanceMatrix> {
    let mut rows = Vec::new();
    for record in reader(input).records() {
        let record = record.map_err(csv_error)?;
        if let Some(first) = rows.first().map(Vec::len) {
            if record.len() != first {
                return Err(Error::parse(
                    line_of(&record),
                    0,
                    format!("expected {first} fields, found {}", record.len()),
                ));
            }
        }
        rows.push(parse_row(&record)?);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::parse(1, 0, "empty input"));
    }
    if rows[0].len() != n {
        return Err(Error::DimensionMismatch {
            what: "distance matrix columns vs rows",
            expected: n,
            found: rows[0].len(),
        });
    }
    DistanceMatrix::from_full(rows.concat(), n)
}

pub fn parse_distance_csv(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    read_distance_matrix(BufReader::new(File::open(path)?))
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a curves CSV with a `u=` grid header.
pub fn write_sample<W: Write>(sample: &FunctionalSample, mut out: W) -> Result<()> {
    let header: Vec<String> = sample.grid().points().iter().map(|u| format!("u={}", num(*u))).collect();
    writeln!(out, "{}", header.join(","))?;
    for c in sample.curves() {
        let row: Vec<String> = c.iter().map(|v| num(*v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_response<W: Write>(y: &[f64], mut out: W) -> Result<()> {
    for v in y {
        writeln!(out, "{}", num(*v))?;
    }
    Ok(())
}

pub fn write_distance_matrix<W: Write>(d: &DistanceMatrix, mut out: W) -> Result<()> {
    for i in 0..d.n() {
        let row: Vec<String> = d.row(i).iter().map(|v| num(*v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Keys accepted in study config files.
pub const CONFIG_KEYS: &[&str] = &[
    "study",
    "n",
    "B",
    "seed",
    "kind",
    "r2",
    "alpha",
    "lambda_decay_a",
    "basis_K",
    "grid_p",
    "variance_decay",
    "sizes",
    "runs",
    "dcor",
    "dcor_permutations",
];

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(k as u64 + 1, 0, format!("expected key = value, got '{line}'")))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::InvalidParameter(format!("unknown config key '{key}' (line {})", k + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

pub fn write_null_csv<W: Write>(r: &NullStudyReport, mut out: W) -> Result<()> {
    let with_dcor = r.dcor_mean.is_some();
    write!(out, "replicate,t_hat,i_n,p_value,l_max")?;
    writeln!(out, "{}", if with_dcor { ",dcor" } else { "" })?;
    for rep in &r.replicates {
        write!(out, "{},{},{},{},{}", rep.replicate, num(rep.t_hat), num(rep.i_n), num(rep.p_value), rep.l_max)?;
        match rep.dcor {
            Some(d) => writeln!(out, ",{}", num(d))?,
            None => writeln!(out)?,
        }
    }
    Ok(())
}

pub fn write_power_csv<W: Write>(r: &PowerStudyReport, mut out: W) -> Result<()> {
    writeln!(out, "kind,r2,sigma,rejection_rate,t_hat_mean,t_hat_sd,dcor_rejection_rate")?;
    for c in &r.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.kind,
            num(c.r2),
            num(c.sigma),
            num(c.rejection_rate),
            num(c.t_hat_mean),
            num(c.t_hat_sd),
            c.dcor_rejection_rate.map(num).unwrap_or_default()
        )?;
    }
    Ok(())
}

pub fn write_degree_csv<W: Write>(r: &DegreeStudyReport, mut out: W) -> Result<()> {
    writeln!(out, "n,run,l_max,g_n,x_cube_root,tail_cube_root,x_sqrt,tail_sqrt,x_two_thirds,tail_two_thirds")?;
    for run in &r.runs {
        let b = &run.bounds;
        write!(out, "{},{},{},{}", run.n, run.run, b.l_max, b.g_n)?;
        for t in &b.thresholds {
            write!(out, ",{},{}", t.x, t.tail)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
