use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_bytes};
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

pub const MATRIX_MARKET_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Coordinate Matrix Market text, 1-based, entries in `(row, col)` order.
/// Values use the shortest representation that parses back to the same bits.
pub fn format_matrix_market(op: &SparseOperator) -> String {
    let mut out = String::with_capacity(32 * (op.nnz() + 2));
    out.push_str(MATRIX_MARKET_HEADER);
    out.push('\n');
    let _ = writeln!(out, "{} {} {}", op.rows(), op.cols(), op.nnz());
    for (r, c, v) in op.triplets() {
        let _ = writeln!(out, "{} {} {:e}", r + 1, c + 1, v);
    }
    out
}

pub fn write_matrix_market(path: &Path, op: &SparseOperator) -> Result<()> {
    write_bytes(path, format_matrix_market(op).as_bytes())
}

pub fn read_matrix_market(path: &Path) -> Result<SparseOperator> {
    parse_matrix_market(path, &read_text(path)?)
}

fn parse_matrix_market(path: &Path, text: &str) -> Result<SparseOperator> {
    let err = |line: usize, message: &str| Error::Parse {
        path: path.to_owned(),
        line,
        message: message.to_owned(),
    };
    let mut lines = text.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let banner: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if banner != ["%%matrixmarket", "matrix", "coordinate", "real", "general"] {
        return Err(err(1, "expected a coordinate real general Matrix Market banner"));
    }
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (ln, size) = body.next().ok_or_else(|| err(2, "missing size line"))?;
    let size: Vec<usize> = size
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| err(ln + 1, "bad size line")))
        .collect::<Result<_>>()?;
    let [rows, cols, nnz] = size[..] else {
        return Err(err(ln + 1, "size line needs rows, cols, nnz"));
    };
    let mut triplets = Vec::with_capacity(nnz);
    for (ln, line) in body {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(ln + 1, "entry needs row, col, value"));
        }
        let r: usize = f[0].parse().map_err(|_| err(ln + 1, "bad row index"))?;
        let c: usize = f[1].parse().map_err(|_| err(ln + 1, "bad column index"))?;
        let v: f64 = f[2].parse().map_err(|_| err(ln + 1, "bad value"))?;
        if r == 0 || c == 0 {
            return Err(err(ln + 1, "indices are 1-based"));
        }
        triplets.push((r - 1, c - 1, v));
    }
    if triplets.len() != nnz {
        return Err(err(0, &format!("expected {nnz} entries, found {}", triplets.len())));
    }
    SparseOperator::from_triplets(rows, cols, triplets)
}
