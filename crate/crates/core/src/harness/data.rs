//! Measurement files: one CSV block per repetition.
//!
//! ```text
//! # loopspam measurements v1 scheme=2n blocks=2
//! 1,0.01,...
//! ...
//!
//! 0.99,0.02,...
//! ...
//! ```
//!
//! Rows are preparations and columns are settings. Blocks are separated by
//! one or more blank lines. Lines starting with `#` after the header are
//! ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::optics::Scheme;
use crate::spam::ExpectationMatrix;

pub const MEASUREMENT_FORMAT: &str = "loopspam measurements v1";

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFile {
    pub scheme: Scheme,
    pub blocks: Vec<ExpectationMatrix>,
}

fn data_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_header(path: &Path, line: &str) -> Result<(Scheme, Option<usize>)> {
    let rest = line
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|l| l.strip_prefix(MEASUREMENT_FORMAT))
        .ok_or_else(|| data_err(path, 1, format!("missing header `# {MEASUREMENT_FORMAT} scheme=...`")))?;
    let mut scheme = None;
    let mut blocks = None;
    for kv in rest.split_whitespace() {
        match kv.split_once('=') {
            Some(("scheme", v)) => scheme = Some(v.parse::<Scheme>().map_err(|e| data_err(path, 1, e.to_string()))?),
            Some(("blocks", v)) => {
                blocks = Some(v.parse::<usize>().map_err(|_| data_err(path, 1, format!("invalid block count `{v}`")))?)
            }
            _ => return Err(data_err(path, 1, format!("unexpected header field `{kv}`"))),
        }
    }
    let scheme = scheme.ok_or_else(|| data_err(path, 1, "header does not declare scheme="))?;
    Ok((scheme, blocks))
}

pub fn parse_measurements(text: &str, path: &Path) -> Result<MeasurementFile> {
    let mut lines = text.lines().enumerate();
    let (scheme, declared) = match lines.next() {
        Some((_, l)) => parse_header(path, l)?,
        None => return Err(data_err(path, 1, "empty file")),
    };
    let n = scheme.settings();
    let mut blocks = Vec::new();
    let mut current: Vec<f64> = Vec::with_capacity(n * n);
    let mut block_start = 0;

    let finish = |values: &mut Vec<f64>, start: usize, blocks: &mut Vec<ExpectationMatrix>| -> Result<()> {
        if values.is_empty() {
            return Ok(());
        }
        if values.len() != n * n {
            return Err(data_err(
                path,
                start,
                format!("block {} has {} rows, expected {n}", blocks.len() + 1, values.len() / n),
            ));
        }
        let m = ExpectationMatrix::new(scheme.shape(), std::mem::take(values)).map_err(|e| match e {
            Error::Range { row, col, value, .. } => Error::Range {
                block: blocks.len() + 1,
                row,
                col,
                value,
            },
            other => other,
        })?;
        blocks.push(m);
        Ok(())
    };

    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            finish(&mut current, block_start, &mut blocks)?;
            continue;
        }
        if current.is_empty() {
            block_start = lineno;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| data_err(path, lineno, format!("malformed number `{}`", f.trim())))
            })
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(data_err(path, lineno, format!("expected {n} columns, got {}", row.len())));
        }
        if current.len() == n * n {
            return Err(data_err(path, lineno, format!("block {} has more than {n} rows", blocks.len() + 1)));
        }
        current.extend(row);
    }
    finish(&mut current, block_start, &mut blocks)?;

    if let Some(k) = declared {
        if k != blocks.len() {
            return Err(data_err(path, 1, format!("header declares {k} blocks, found {}", blocks.len())));
        }
    }
    Ok(MeasurementFile { scheme, blocks })
}

pub fn load_measurements(path: &Path) -> Result<MeasurementFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_measurements(&text, path)
}

/// Renders blocks in the measurement format. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn format_measurements(scheme: Scheme, blocks: &[ExpectationMatrix]) -> String {
    let mut out = format!("# {MEASUREMENT_FORMAT} scheme={scheme} blocks={}\n", blocks.len());
    for (k, m) in blocks.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for row in m.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
    }
    out
}

pub fn write_measurements(path: &Path, scheme: Scheme, blocks: &[ExpectationMatrix]) -> Result<()> {
    std::fs::write(path, format_measurements(scheme, blocks)).map_err(|e| Error::io(path, e))
}
