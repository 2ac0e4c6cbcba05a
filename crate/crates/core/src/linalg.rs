//! Dense vector helpers and a compressed sparse column matrix with the block kernels
//! used throughout the solvers.
//!
//! Dense vectors are plain `[f64]` slices. Everything that touches a block of
//! coordinates goes through [`BlockSelection`], which guarantees sorted, unique,
//! in-range indices.

use crate::error::{Error, Result};

/// A sorted set of unique coordinate indices, the block updated by one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockSelection {
    indices: Vec<usize>,
}

impl BlockSelection {
    /// Builds a block from arbitrary indices. The indices are sorted; duplicates,
    /// out-of-range entries and empty input are rejected.
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyBlock);
        }
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateIndex(w[0]));
            }
        }
        let last = *indices.last().unwrap();
        if last >= dim {
            return Err(Error::IndexOutOfRange { index: last, dim });
        }
        Ok(Self { indices })
    }

    /// The contiguous block `{start, ..., end - 1}`.
    pub fn range(start: usize, end: usize) -> Self {
        assert!(start < end, "empty range block");
        Self {
            indices: (start..end).collect(),
        }
    }

    /// Every coordinate of an `dim`-dimensional space.
    pub fn full(dim: usize) -> Self {
        Self::range(0, dim)
    }

    pub fn single(index: usize) -> Self {
        Self {
            indices: vec![index],
        }
    }

    /// Wraps indices the caller already knows are sorted and unique.
    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(!indices.is_empty());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self { indices }
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }
}

/// `out[j] = x[blk[j]]`. Panics if the block does not fit `x`.
pub fn gather(x: &[f64], blk: &BlockSelection) -> Vec<f64> {
    blk.iter().map(|j| x[j]).collect()
}

/// In-place `x[blk[j]] += alpha * t[j]`.
pub fn scatter_add(x: &mut [f64], blk: &BlockSelection, t: &[f64], alpha: f64) -> Result<()> {
    check_len("scatter_add", blk.len(), t.len())?;
    if let Some(&last) = blk.indices().last() {
        if last >= x.len() {
            return Err(Error::IndexOutOfRange {
                index: last,
                dim: x.len(),
            });
        }
    }
    for (&j, &tj) in blk.indices().iter().zip(t) {
        x[j] += alpha * tj;
    }
    Ok(())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Validates and wraps raw CSC arrays.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 {
            return Err(Error::InvalidMatrix(format!(
                "column offsets have length {}, expected {}",
                col_ptr.len(),
                ncols + 1
            )));
        }
        if col_ptr[0] != 0 || *col_ptr.last().unwrap() != row_idx.len() {
            return Err(Error::InvalidMatrix(
                "column offsets must start at 0 and end at nnz".into(),
            ));
        }
        if row_idx.len() != values.len() {
            return Err(Error::InvalidMatrix(
                "row index and value arrays differ in length".into(),
            ));
        }
        for j in 0..ncols {
            let (lo, hi) = (col_ptr[j], col_ptr[j + 1]);
            if lo > hi {
                return Err(Error::InvalidMatrix(format!(
                    "column offsets decrease at column {j}"
                )));
            }
            let rows = &row_idx[lo..hi];
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!(
                    "row indices not strictly increasing in column {j}"
                )));
            }
            if let Some(&r) = rows.last() {
                if r >= nrows {
                    return Err(Error::IndexOutOfRange {
                        index: r,
                        dim: nrows,
                    });
                }
            }
        }
        if !all_finite(&values) {
            return Err(Error::NonFinite("matrix values"));
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets. Duplicate positions are summed and
    /// explicit zeros are kept.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= nrows {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    dim: nrows,
                });
            }
            if c >= ncols {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    dim: ncols,
                });
            }
        }
        sorted.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
            last = Some((r, c));
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        Self::new(nrows, ncols, col_ptr, row_idx, values)
    }

    /// Builds from a dense row-major array, skipping zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            check_len("dense row", ncols, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &triplets)
    }

    #[allow(clippy::needless_range_loop)]
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for j in 0..self.ncols {
            let (rows, vals) = self.column(j);
            for (&r, &v) in rows.iter().zip(vals) {
                out[r][j] = v;
            }
        }
        out
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn column_sq_norm(&self, j: usize) -> f64 {
        let (_, vals) = self.column(j);
        vals.iter().map(|v| v * v).sum()
    }

    fn check_block(&self, blk: &BlockSelection) -> Result<()> {
        match blk.indices().last() {
            Some(&j) if j >= self.ncols => Err(Error::IndexOutOfRange {
                index: j,
                dim: self.ncols,
            }),
            _ => Ok(()),
        }
    }

    /// `sum_j t[j] * A[:, blk[j]]`, a dense vector of length `nrows`.
    pub fn block_matvec(&self, blk: &BlockSelection, t: &[f64]) -> Result<Vec<f64>> {
        check_len("block_matvec", blk.len(), t.len())?;
        self.check_block(blk)?;
        let mut out = vec![0.0; self.nrows];
        for (&j, &tj) in blk.indices().iter().zip(t) {
            if tj == 0.0 {
                continue;
            }
            let (rows, vals) = self.column(j);
            for (&r, &v) in rows.iter().zip(vals) {
                out[r] += v * tj;
            }
        }
        Ok(out)
    }

    /// `out[j] = <A[:, blk[j]], r>`.
    pub fn block_matvec_transpose(&self, blk: &BlockSelection, r: &[f64]) -> Result<Vec<f64>> {
        check_len("block_matvec_transpose", self.nrows, r.len())?;
        self.check_block(blk)?;
        Ok(blk.iter().map(|j| self.column_dot(j, r)).collect())
    }

    #[inline]
    pub fn column_dot(&self, j: usize, r: &[f64]) -> f64 {
        let (rows, vals) = self.column(j);
        rows.iter().zip(vals).map(|(&q, &v)| v * r[q]).sum()
    }

    /// Full product `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec", self.ncols, x.len())?;
        let mut out = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let (rows, vals) = self.column(j);
            for (&r, &v) in rows.iter().zip(vals) {
                out[r] += v * xj;
            }
        }
        Ok(out)
    }

    /// Full product `A^T r`.
    pub fn matvec_transpose(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec_transpose", self.nrows, r.len())?;
        Ok((0..self.ncols).map(|j| self.column_dot(j, r)).collect())
    }

    /// Multiplies column `j` by `s` in place.
    pub fn scale_column(&mut self, j: usize, s: f64) {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        for v in &mut self.values[lo..hi] {
            *v *= s;
        }
    }
}
