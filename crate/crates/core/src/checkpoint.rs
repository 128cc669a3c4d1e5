//! Plain-text parameter files.
//!
//! ```text
//! brnn-v1 <n> <m> <r> <sigma>
//! A    n rows of n values
//! U    n rows of n values
//! W    n rows of m values
//! b    n rows of 1 value
//! V    r rows of n values
//! Dft  r rows of m values
//! c    r rows of 1 value
//! ```
//!
//! Values are whitespace separated, one matrix row per line (vectors are
//! columns, so one entry per line), written in shortest round-trip form.
//! Blank lines are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{BrnnError, Result};
use crate::model::{BrnnParams, Nonlinearity};

pub const MAGIC: &str = "brnn-v1";

pub fn to_string(params: &BrnnParams) -> String {
    let mut out = format!(
        "{MAGIC} {} {} {} {}\n",
        params.n(),
        params.m(),
        params.r(),
        params.sigma
    );
    let mut put = |m: &DMatrix<f64>| {
        for row in m.row_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    };
    put(&params.a);
    put(&params.u);
    put(&params.w);
    put(&DMatrix::from_column_slice(
        params.b.len(),
        1,
        params.b.as_slice(),
    ));
    put(&params.v);
    put(&params.dft);
    put(&DMatrix::from_column_slice(
        params.c.len(),
        1,
        params.c.as_slice(),
    ));
    out
}

pub fn from_str(text: &str) -> Result<BrnnParams> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| BrnnError::parse(1, "empty checkpoint"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&MAGIC) {
        return Err(BrnnError::parse(
            hline,
            format!(
                "unrecognized checkpoint version '{}'",
                fields.first().unwrap_or(&"")
            ),
        ));
    }
    if fields.len() != 5 {
        return Err(BrnnError::parse(
            hline,
            "header must be 'brnn-v1 n m r sigma'",
        ));
    }
    let dim = |s: &str| -> Result<usize> {
        match s.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(BrnnError::parse(hline, format!("bad dimension '{s}'"))),
        }
    };
    let (n, m, r) = (dim(fields[1])?, dim(fields[2])?, dim(fields[3])?);
    let sigma: Nonlinearity = fields[4]
        .parse()
        .map_err(|e: BrnnError| BrnnError::parse(hline, e.to_string()))?;

    let mut read = |what: &str, rows: usize, cols: usize| -> Result<DMatrix<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for row in 0..rows {
            let (ln, line) = lines.next().ok_or_else(|| {
                BrnnError::parse(0, format!("unexpected end of file in {what} (row {row})"))
            })?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| BrnnError::parse(ln, format!("bad number '{t}' in {what}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != cols {
                return Err(BrnnError::parse(
                    ln,
                    format!("{what} row has {} values, expected {cols}", vals.len()),
                ));
            }
            data.extend(vals);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    };

    let a = read("A", n, n)?;
    let u = read("U", n, n)?;
    let w = read("W", n, m)?;
    let b = DVector::from_column_slice(read("b", n, 1)?.as_slice());
    let v = read("V", r, n)?;
    let dft = read("Dft", r, m)?;
    let c = DVector::from_column_slice(read("c", r, 1)?.as_slice());
    if let Some((ln, _)) = lines.next() {
        return Err(BrnnError::parse(ln, "trailing data after c"));
    }

    Ok(BrnnParams {
        a,
        u,
        w,
        b,
        v,
        dft,
        c,
        sigma,
    })
}

pub fn save(params: &BrnnParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_string(params))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<BrnnParams> {
    from_str(&fs::read_to_string(path)?)
}
