//! Sorted triplet / compressed-row sparse matrices.

use crate::error::{Error, Result};
use crate::field::Features;

/// Sparse linear map stored as `(row, col, value)` triplets sorted by
/// `(row, col)` without duplicates, plus a row pointer for products.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Sort triplets by `(row, col)` and sum duplicates in that order.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidArgument(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} operator"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite entry at ({r}, {c})")));
            }
        }
        // stable: duplicates are summed in insertion order
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    /// Largest absolute row sum, `max_i Σ_j |A_ij|`.
    pub fn linf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `self · rhs`, accumulating each output row in ascending column order.
    pub fn matmul(&self, rhs: &SparseOperator) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::InvalidArgument(format!(
                "cannot compose {}x{} with {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut row_ptr = vec![0; self.rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; rhs.cols];
        let mut seen = vec![false; rhs.cols];
        let mut pattern = Vec::new();
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&k, &a) in cols.iter().zip(vals) {
                let (rc, rv) = rhs.row(k);
                for (&c, &b) in rc.iter().zip(rv) {
                    if !seen[c] {
                        seen[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                col_idx.push(c);
                values.push(acc[c]);
                acc[c] = 0.0;
                seen[c] = false;
            }
            pattern.clear();
            row_ptr[r + 1] = col_idx.len();
        }
        Ok(Self {
            rows: self.rows,
            cols: rhs.cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// `self + factor · rhs`.
    pub fn add_scaled(&self, rhs: &SparseOperator, factor: f64) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::InvalidArgument(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let triplets = self
            .triplets()
            .chain(rhs.triplets().map(|(r, c, v)| (r, c, factor * v)))
            .collect();
        Self::from_triplets(self.rows, self.cols, triplets)
    }

    /// Channel-wise product with a `cols × C` feature matrix.
    pub fn apply(&self, x: &Features) -> Result<Features> {
        if x.rows() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows for a {}x{} operator", self.cols, self.rows, self.cols),
                actual: format!("{} rows", x.rows()),
            });
        }
        let channels = x.channels();
        let mut out = Features::zeros(self.rows, channels);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let dst = out.row_mut(r);
            for (&c, &a) in cols.iter().zip(vals) {
                for (d, s) in dst.iter_mut().zip(x.row(c)) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }
}

/// Divide by the ℓ∞ operator norm, returning the normalized operator and
/// the norm.
pub fn normalize_linf(op: &SparseOperator) -> Result<(SparseOperator, f64)> {
    let norm = op.linf_norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("cannot normalize an all-zero operator".into()));
    }
    Ok((op.scaled(norm.recip()), norm))
}
