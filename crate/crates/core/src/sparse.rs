//! Compressed sparse row matrices with the handful of operations the
//! commuting-matrix scorer needs.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("dimension mismatch: {left_rows}x{left_cols} times {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix blowup: product would hold more than {budget} nonzeros")]
    Blowup { budget: usize },
    #[error("entry ({row}, {col}) out of range for {rows}x{cols} matrix")]
    OutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
}

/// Row-major sparse matrix of nonnegative reals.
///
/// Column indices within a row are strictly increasing, so there is never
/// more than one stored entry per `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Binary matrix from coordinate pairs; repeated pairs collapse to one entry.
    pub fn from_pairs(
        rows: usize,
        cols: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, MatrixError> {
        Self::from_triplets(rows, cols, pairs.into_iter().map(|(r, c)| (r, c, 1.0)), false)
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed when
    /// `sum_duplicates` is set, otherwise the last one wins.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        sum_duplicates: bool,
    ) -> Result<Self, MatrixError> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (row, col, value) in triplets {
            if row >= rows || col >= cols {
                return Err(MatrixError::OutOfRange {
                    row,
                    col,
                    rows,
                    cols,
                });
            }
            entries.push((row, col, value));
        }
        // stable sort keeps insertion order among duplicates
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                let slot = values.last_mut().expect("duplicate follows an entry");
                if sum_duplicates {
                    *slot += v;
                } else {
                    *slot = v;
                }
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Stored `(col, value)` entries of one row, in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr: counts,
            indices,
            values,
        }
    }

    /// Keeps only the listed rows, in the given order. Row `i` of the result
    /// is row `rows[i]` of `self`.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            indices.extend_from_slice(&self.indices[span.clone()]);
            values.extend_from_slice(&self.values[span]);
            indptr.push(indices.len());
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    /// Sparse product `self * rhs` (row-by-row Gustavson accumulation).
    /// Fails once the output would exceed `budget` nonzeros.
    pub fn matmul(&self, rhs: &SparseMatrix, budget: usize) -> Result<Self, MatrixError> {
        if self.cols != rhs.rows {
            return Err(MatrixError::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let mut accum = vec![0.0f64; rhs.cols];
        let mut touched = vec![false; rhs.cols];
        let mut row_cols: Vec<usize> = Vec::new();

        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        row_cols.push(c);
                    }
                    accum[c] += a * b;
                }
            }
            row_cols.sort_unstable();
            for &c in &row_cols {
                if accum[c] != 0.0 {
                    indices.push(c);
                    values.push(accum[c]);
                }
                accum[c] = 0.0;
                touched[c] = false;
            }
            row_cols.clear();
            if indices.len() > budget {
                return Err(MatrixError::Blowup { budget });
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: rhs.cols,
            indptr,
            indices,
            values,
        })
    }

    /// Scales each row to sum to one; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            let total: f64 = self.values[span.clone()].iter().sum();
            if total > 0.0 {
                for v in &mut out.values[span] {
                    *v /= total;
                }
            }
        }
        out
    }

    /// Elementwise product. Shapes must agree.
    pub fn hadamard(&self, rhs: &SparseMatrix) -> Result<Self, MatrixError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(MatrixError::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.rows {
            let mut left = self.row(r).peekable();
            let mut right = rhs.row(r).peekable();
            while let (Some(&(lc, lv)), Some(&(rc, rv))) = (left.peek(), right.peek()) {
                match lc.cmp(&rc) {
                    std::cmp::Ordering::Less => {
                        left.next();
                    }
                    std::cmp::Ordering::Greater => {
                        right.next();
                    }
                    std::cmp::Ordering::Equal => {
                        let v = lv * rv;
                        if v != 0.0 {
                            indices.push(lc);
                            values.push(v);
                        }
                        left.next();
                        right.next();
                    }
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.triplets() {
            dense[r][c] = v;
        }
        dense
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let m = b[0].len();
        let mut out = vec![vec![0.0; m]; n];
        for i in 0..n {
            for k in 0..b.len() {
                for j in 0..m {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    #[test]
    fn duplicate_pairs_collapse() {
        let m = SparseMatrix::from_pairs(2, 2, [(0, 1), (0, 1), (1, 0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 1.0);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let err = SparseMatrix::from_pairs(3, 2, [(5, 0)]).unwrap_err();
        assert!(matches!(err, MatrixError::OutOfRange { row: 5, .. }));
    }

    #[test]
    fn product_matches_dense() {
        let a = SparseMatrix::from_pairs(2, 2, [(0, 1), (1, 0)]).unwrap();
        let b = SparseMatrix::from_pairs(2, 2, [(0, 0), (1, 0), (1, 1)]).unwrap();
        let p = a.matmul(&b, usize::MAX).unwrap();
        assert_eq!(p.to_dense(), dense_mul(&a.to_dense(), &b.to_dense()));
        assert_eq!(p.to_dense(), vec![vec![1.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn product_budget_is_enforced() {
        let a = SparseMatrix::from_pairs(3, 1, [(0, 0), (1, 0), (2, 0)]).unwrap();
        let b = SparseMatrix::from_pairs(1, 3, [(0, 0), (0, 1), (0, 2)]).unwrap();
        assert_eq!(a.matmul(&b, 8), Err(MatrixError::Blowup { budget: 8 }));
        assert_eq!(a.matmul(&b, 9).unwrap().nnz(), 9);
    }

    #[test]
    fn transpose_and_row_selection() {
        let a = SparseMatrix::from_pairs(2, 3, [(0, 2), (1, 0), (1, 1)]).unwrap();
        let t = a.transpose();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.get(2, 0), 1.0);
        assert_eq!(t.transpose(), a);
        let picked = a.select_rows(&[1, 1, 0]);
        assert_eq!(picked.rows(), 3);
        assert_eq!(picked.get(0, 1), 1.0);
        assert_eq!(picked.get(2, 2), 1.0);
    }

    #[test]
    fn normalization_leaves_zero_rows() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 3.0)], false).unwrap();
        let n = a.row_normalized();
        assert_eq!(n.get(0, 0), 0.25);
        assert_eq!(n.get(0, 1), 0.75);
        assert_eq!(n.row(1).count(), 0);
    }

    #[test]
    fn hadamard_keeps_common_support() {
        let a = SparseMatrix::from_triplets(1, 3, [(0, 0, 0.5), (0, 2, 0.5)], false).unwrap();
        let b = SparseMatrix::from_triplets(1, 3, [(0, 1, 1.0), (0, 2, 0.4)], false).unwrap();
        let h = a.hadamard(&b).unwrap();
        assert_eq!(h.nnz(), 1);
        assert!((h.get(0, 2) - 0.2).abs() < 1e-15);
    }
}
