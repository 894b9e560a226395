//! Small dense-matrix helpers and the plain-text matrix format.
//!
//! The text format is one matrix row per line, entries separated by
//! whitespace. Blank lines and lines starting with `#` are ignored. A
//! vector is a matrix with a single row or a single column.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use std::path::Path;

pub fn l1_norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l2_norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn linf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Parse the text matrix format. `origin` is used in error messages.
pub fn parse_matrix(text: &str, origin: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("not a number: {tok:?}"),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: lineno + 1,
                    msg: format!(
                        "ragged row: expected {} entries, found {}",
                        first.len(),
                        row.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 0,
            msg: "empty matrix".to_string(),
        });
    }
    let (n, d) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::InvalidArgument(format!("{origin}: {e}")))
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, &path.display().to_string())
}

/// Read a vector: a single-row or single-column matrix, flattened.
pub fn read_vector(path: &Path) -> Result<Array1<f64>> {
    let m = read_matrix(path)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: format!("expected a vector, found a {}x{} matrix", m.nrows(), m.ncols()),
        });
    }
    Ok(Array1::from_iter(m.iter().copied()))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Solve the square system `a x = b` by Gaussian elimination with
/// partial pivoting. Returns `None` when the matrix is singular to
/// working precision.
pub fn solve_dense(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[[r, col]].abs() > m[[piv, col]].abs() {
                piv = r;
            }
        }
        if m[[piv, col]].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap([piv, c], [col, c]);
            }
            rhs.swap(piv, col);
        }
        for r in col + 1..n {
            let f = m[[r, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[[r, c]] -= f * m[[col, c]];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m[[r, c]] * x[c];
        }
        x[r] = acc / m[[r, r]];
    }
    Some(x)
}
