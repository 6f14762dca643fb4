//! Matrix Market dense array format (`%%MatrixMarket matrix array real general`).
//!
//! Values are stored column by column. Vectors are single-column matrices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const HEADER: &str = "%%MatrixMarket matrix array real general";

/// Renders a matrix. Numbers use the shortest representation that round-trips,
/// so writing the same matrix twice gives identical bytes.
pub fn to_string(a: &DenseMatrix) -> String {
    let mut out = String::with_capacity(24 * a.rows() * a.cols() + 64);
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(out, "{} {}", a.rows(), a.cols());
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let _ = writeln!(out, "{:e}", a[(i, j)]);
        }
    }
    out
}

pub fn parse(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let banner: Vec<String> = first
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if banner.len() != 5 || banner[0] != "%%matrixmarket" || banner[1] != "matrix" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected '{HEADER}'"),
        });
    }
    if banner[2] != "array" || banner[3] != "real" || banner[4] != "general" {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "unsupported layout '{} {} {}', only 'array real general'",
                banner[2], banner[3], banner[4]
            ),
        });
    }

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or(Error::Parse {
        line: 2,
        msg: "missing size line".into(),
    })?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: size_line + 1,
            msg: format!("bad size line: {e}"),
        })?;
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: size_line + 1,
            msg: "size line must hold 'rows cols'".into(),
        });
    }
    let (rows, cols) = (dims[0], dims[1]);

    let mut col_major = Vec::with_capacity(rows * cols);
    for (idx, line) in body {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|e| Error::Parse {
                line: idx + 1,
                msg: format!("bad value '{tok}': {e}"),
            })?;
            col_major.push(v);
        }
    }
    if col_major.len() != rows * cols {
        return Err(Error::DataLength {
            rows,
            cols,
            got: col_major.len(),
        });
    }
    let mut data = vec![0.0; rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            data[i * cols + j] = col_major[j * rows + i];
        }
    }
    DenseMatrix::from_row_major(rows, cols, data)
}

pub fn write(path: impl AsRef<Path>, a: &DenseMatrix) -> Result<()> {
    fs::write(path, to_string(a))?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse(&fs::read_to_string(path)?)
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    write(path, &DenseMatrix::column_vector(v))
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let m = read(path)?;
    if m.cols() != 1 {
        return Err(Error::shape("read_vector", "a single column", m.cols()));
    }
    Ok(m.into_vec())
}
