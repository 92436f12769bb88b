//! Plain-text instance files.
//!
//! ```text
//! blocksparse-instance 1
//! experiment cs            (optional, free-form name)
//! nu2 25                   (optional, SID shift used when a method does not set one)
//! A dense 2 3              (or: A identity <n>)
//! 1 0 0
//! 0 1 0
//! L identity 3             (or: L difference <n>, the (n-1) x n first-difference map)
//! x0 3                     (optional ground truth)
//! 1 2 3
//! y 2
//! 1 2
//! ```
//!
//! Numbers are whitespace separated and matrices are row-major, one row per
//! line. Lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use blocksparse::LinearMap;
use ndarray::{Array1, Array2};

use crate::error::CliError;

pub const MAGIC: &str = "blocksparse-instance 1";

#[derive(Debug, Clone)]
pub struct InstanceFile {
    pub experiment: Option<String>,
    pub nu2: Option<f64>,
    pub a: LinearMap,
    pub l: LinearMap,
    pub x0: Option<Array1<f64>>,
    pub y: Array1<f64>,
}

fn write_row<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        // shortest representation that round-trips exactly
        write!(out, "{v}").expect("writing to a String");
    }
    out.push('\n');
}

fn write_operator(out: &mut String, name: &str, op: &LinearMap) -> Result<(), CliError> {
    match op {
        LinearMap::Identity(n) => writeln!(out, "{name} identity {n}").expect("writing to a String"),
        LinearMap::FirstDifference(n) => writeln!(out, "{name} difference {n}").expect("writing to a String"),
        LinearMap::Dense(m) => {
            writeln!(out, "{name} dense {} {}", m.nrows(), m.ncols()).expect("writing to a String");
            for row in m.rows() {
                write_row(out, row.iter());
            }
        }
        other => {
            // scaled and composed maps are stored densely
            return write_operator(out, name, &LinearMap::dense(other.to_dense()));
        }
    }
    Ok(())
}

pub fn render(inst: &InstanceFile) -> Result<String, CliError> {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    if let Some(e) = &inst.experiment {
        writeln!(out, "experiment {e}").expect("writing to a String");
    }
    if let Some(nu2) = inst.nu2 {
        writeln!(out, "nu2 {nu2}").expect("writing to a String");
    }
    write_operator(&mut out, "A", &inst.a)?;
    write_operator(&mut out, "L", &inst.l)?;
    if let Some(x0) = &inst.x0 {
        writeln!(out, "x0 {}", x0.len()).expect("writing to a String");
        write_row(&mut out, x0.iter());
    }
    writeln!(out, "y {}", inst.y.len()).expect("writing to a String");
    write_row(&mut out, inst.y.iter());
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn numbers(&mut self, expected: usize, what: &str) -> Result<Vec<f64>, CliError> {
        if expected == 0 {
            return Ok(Vec::new());
        }
        let (no, line) = self
            .next_line()
            .ok_or_else(|| CliError::Config(format!("instance ended while reading {what}")))?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("line {no}: {what}: {e}")))?;
        if values.len() != expected {
            return Err(CliError::Config(format!(
                "line {no}: {what} has {} values, expected {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("line {no}: {what} contains a non-finite value")));
        }
        Ok(values)
    }
}

fn parse_count(no: usize, tok: Option<&str>) -> Result<usize, CliError> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| CliError::Config(format!("line {no}: expected a count")))
}

fn parse_operator(lines: &mut Lines, no: usize, parts: &[&str]) -> Result<LinearMap, CliError> {
    match parts.get(1).copied() {
        Some("identity") => Ok(LinearMap::identity(parse_count(no, parts.get(2).copied())?)),
        Some("difference") => Ok(LinearMap::first_difference(parse_count(no, parts.get(2).copied())?)),
        Some("dense") => {
            let rows = parse_count(no, parts.get(2).copied())?;
            let cols = parse_count(no, parts.get(3).copied())?;
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                data.extend(lines.numbers(cols, &format!("{} row {r}", parts[0]))?);
            }
            let m = Array2::from_shape_vec((rows, cols), data).map_err(CliError::config)?;
            Ok(LinearMap::dense(m))
        }
        _ => Err(CliError::Config(format!(
            "line {no}: operator kind must be dense, identity or difference"
        ))),
    }
}

pub fn parse(text: &str) -> Result<InstanceFile, CliError> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    match lines.next_line() {
        Some((_, MAGIC)) => {}
        _ => return Err(CliError::Config(format!("instance must start with '{MAGIC}'"))),
    }
    let (mut experiment, mut nu2, mut a, mut l, mut x0, mut y) = (None, None, None, None, None, None);
    while let Some((no, line)) = lines.next_line() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts[0] {
            "experiment" => experiment = parts.get(1).map(|s| s.to_string()),
            "nu2" => {
                nu2 = Some(
                    parts
                        .get(1)
                        .and_then(|t| t.parse::<f64>().ok())
                        .ok_or_else(|| CliError::Config(format!("line {no}: nu2 needs a number")))?,
                )
            }
            "A" => a = Some(parse_operator(&mut lines, no, &parts)?),
            "L" => l = Some(parse_operator(&mut lines, no, &parts)?),
            "x0" | "y" => {
                let len = parse_count(no, parts.get(1).copied())?;
                let v = Array1::from(lines.numbers(len, parts[0])?);
                if parts[0] == "x0" {
                    x0 = Some(v);
                } else {
                    y = Some(v);
                }
            }
            other => return Err(CliError::Config(format!("line {no}: unknown section '{other}'"))),
        }
    }
    let missing = |what: &str| CliError::Config(format!("instance has no {what} section"));
    Ok(InstanceFile {
        experiment,
        nu2,
        a: a.ok_or_else(|| missing("A"))?,
        l: l.ok_or_else(|| missing("L"))?,
        x0,
        y: y.ok_or_else(|| missing("y"))?,
    })
}

pub fn read(path: &Path) -> Result<InstanceFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text)
}
