//! Compressed-sparse-row matrices and the sparse kernels built on them.
//!
//! CSR is the single sparse format of the crate. Construction canonicalizes:
//! duplicate `(row, col)` entries are summed and exact zeros are pruned, so
//! two matrices with the same entries compare equal structurally.

use thiserror::Error;

use crate::dense::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(&'static str),
}

/// Real matrix in compressed-sparse-row form.
///
/// Invariants (enforced at construction): `row_ptr` is nondecreasing with
/// `row_ptr[0] = 0` and `row_ptr[nrows] = nnz`; within each row the column
/// indices are strictly increasing; no explicitly stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds a canonical CSR matrix from triplets. Duplicates are summed,
    /// exact zeros (including those produced by cancellation) are pruned.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self, SparseError> {
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(SparseError::IndexOutOfRange {
                    row: i,
                    col: j,
                    nrows,
                    ncols,
                });
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // stable sort keeps insertion order within a (row, col) group, so
        // duplicate summation is deterministic
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut pos = 0;
        while pos < order.len() {
            let (i, j, _) = triplets[order[pos]];
            let mut sum = T::zero();
            while pos < order.len() {
                let (pi, pj, v) = triplets[order[pos]];
                if pi != i || pj != j {
                    break;
                }
                sum += v;
                pos += 1;
            }
            if sum != T::zero() {
                row_ptr[i + 1] += 1;
                col_idx.push(j);
                values.push(sum);
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Wraps raw CSR arrays, validating every structural invariant.
    pub fn from_csr_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, SparseError> {
        if row_ptr.len() != nrows + 1 {
            return Err(SparseError::InvalidStructure("row_ptr length != nrows + 1"));
        }
        if row_ptr[0] != 0 {
            return Err(SparseError::InvalidStructure("row_ptr[0] != 0"));
        }
        if *row_ptr.last().unwrap() != values.len() || col_idx.len() != values.len() {
            return Err(SparseError::InvalidStructure(
                "row_ptr[nrows], col_idx and values lengths disagree",
            ));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(SparseError::InvalidStructure("row_ptr not nondecreasing"));
            }
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(SparseError::InvalidStructure(
                        "column indices not strictly increasing within a row",
                    ));
                }
            }
            if let Some(&last) = row.last() {
                if last >= ncols {
                    return Err(SparseError::InvalidStructure("column index out of range"));
                }
            }
        }
        if values.iter().any(|v| *v == T::zero()) {
            return Err(SparseError::InvalidStructure("explicitly stored zero"));
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let trip: Vec<_> = diag
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self::from_triplets(diag.len(), diag.len(), &trip).unwrap()
    }

    pub fn from_dense(m: &DenseMatrix<T>) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m.get(i, j);
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trip).unwrap()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `(column, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => T::zero(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Sparse matrix-vector product `M x`.
    pub fn spmv(&self, x: &[T]) -> Vec<T> {
        assert_eq!(
            self.ncols,
            x.len(),
            "spmv dimension mismatch: matrix is {}x{}, vector has length {}",
            self.nrows,
            self.ncols,
            x.len()
        );
        let mut y = vec![T::zero(); self.nrows];
        for i in 0..self.nrows {
            let mut acc = T::zero();
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// `Mᵀ x` without materializing the transpose.
    pub fn spmv_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(
            self.nrows,
            x.len(),
            "spmv_transpose dimension mismatch: matrix is {}x{}, vector has length {}",
            self.nrows,
            self.ncols,
            x.len()
        );
        let mut y = vec![T::zero(); self.ncols];
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == T::zero() {
                continue;
            }
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// Materialized transpose; CSR invariants hold on the result.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        let mut next = counts;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let dst = next[j];
                col_idx[dst] = i;
                values[dst] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Entrywise sum `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(
            (self.nrows, self.ncols),
            (other.nrows, other.ncols),
            "matrix sum dimension mismatch"
        );
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push((i, j, v));
            }
            for (j, v) in other.row(i) {
                trip.push((i, j, v));
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &trip).unwrap()
    }

    /// `self + alpha I` for square matrices.
    pub fn add_scaled_identity(&self, alpha: T) -> Self {
        assert_eq!(self.nrows, self.ncols, "matrix must be square");
        let mut trip: Vec<(usize, usize, T)> = Vec::with_capacity(self.nnz() + self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push((i, j, v));
            }
            trip.push((i, i, alpha));
        }
        Self::from_triplets(self.nrows, self.ncols, &trip).unwrap()
    }

    /// Σ_{i ∈ rows} bᵢᵀ bᵢ over the selected rows of `self`, i.e. `BᵀWB`
    /// for the diagonal 0/1 weight matrix indicated by `rows`.
    ///
    /// Symmetric by construction: the contribution to `(a, b)` and `(b, a)`
    /// is the same product accumulated in the same order.
    pub fn triple_product(&self, rows: &[usize]) -> Result<Self, SparseError> {
        for &r in rows {
            if r >= self.nrows {
                return Err(SparseError::IndexOutOfRange {
                    row: r,
                    col: 0,
                    nrows: self.nrows,
                    ncols: self.ncols,
                });
            }
        }
        let mut trip = Vec::new();
        for &r in rows {
            let entries: Vec<(usize, T)> = self.row(r).collect();
            for &(ja, va) in &entries {
                for &(jb, vb) in &entries {
                    trip.push((ja, jb, va * vb));
                }
            }
        }
        Self::from_triplets(self.ncols, self.ncols, &trip)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d.set(i, j, v);
            }
        }
        d
    }

    /// Maximum relative asymmetry `|a_ij - a_ji| / max|a|`; zero for
    /// symmetric matrices and non-square inputs are rejected.
    pub fn asymmetry(&self) -> T {
        assert_eq!(self.nrows, self.ncols, "asymmetry requires a square matrix");
        let scale = self.max_abs();
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// `(self + selfᵀ) / 2`.
    pub fn symmetrize(&self) -> Self {
        let half = T::from_f64(0.5).unwrap();
        let mut trip = Vec::with_capacity(2 * self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push((i, j, v * half));
                trip.push((j, i, v * half));
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &trip).unwrap()
    }

    /// Extracts the principal submatrix on `[lo, hi)`.
    pub fn principal_submatrix(&self, lo: usize, hi: usize) -> Self {
        let mut trip = Vec::new();
        for i in lo..hi {
            for (j, v) in self.row(i) {
                if j >= lo && j < hi {
                    trip.push((i - lo, j - lo, v));
                }
            }
        }
        Self::from_triplets(hi - lo, hi - lo, &trip).unwrap()
    }

    /// Structural bandwidth: max |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.nrows {
            for (j, _) in self.row(i) {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_mv(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn random_csr(
        nrows: usize,
        ncols: usize,
        seed: u64,
        density: f64,
    ) -> (SparseMatrix<f64>, Vec<Vec<f64>>) {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        let mut dense = vec![vec![0.0; ncols]; nrows];
        for i in 0..nrows {
            for j in 0..ncols {
                if rng.random::<f64>() < density {
                    let v = rng.random_range(-1.0..1.0);
                    trip.push((i, j, v));
                    dense[i][j] = v;
                }
            }
        }
        (
            SparseMatrix::from_triplets(nrows, ncols, &trip).unwrap(),
            dense,
        )
    }

    #[test]
    fn spmv_identity() {
        let m = SparseMatrix::<f64>::identity(3);
        assert_eq!(m.spmv(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spmv_zero_matrix() {
        let m = SparseMatrix::<f64>::zeros(2, 2);
        assert_eq!(m.spmv(&[5.0, 7.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn spmv_matches_dense_reference() {
        let (m, dense) = random_csr(8, 5, 42, 0.5);
        let x: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 - 0.7).collect();
        let got = m.spmv(&x);
        let want = dense_mv(&dense, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-14 * w.abs().max(1.0));
        }
    }

    #[test]
    #[should_panic(expected = "spmv dimension mismatch")]
    fn spmv_dimension_mismatch_panics() {
        let m = SparseMatrix::<f64>::identity(3);
        m.spmv(&[1.0, 2.0]);
    }

    #[test]
    fn transpose_identity_is_identity() {
        let m = SparseMatrix::<f64>::identity(3);
        assert_eq!(m.transpose(), m);
    }

    #[test]
    fn transpose_single_entry() {
        let m = SparseMatrix::from_triplets(3, 3, &[(0, 2, 4.0)]).unwrap();
        let t = m.transpose();
        assert_eq!(t.get(2, 0), 4.0);
        assert_eq!(t.nnz(), 1);
    }

    #[test]
    fn double_transpose_roundtrip() {
        let (m, _) = random_csr(6, 9, 7, 0.4);
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn triple_product_single_row() {
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 1, 1.0)]).unwrap();
        let g = b.triple_product(&[0]).unwrap();
        assert_eq!(g, SparseMatrix::from_diagonal(&[0.0, 1.0]));
        assert_eq!(g.get(1, 1), 1.0);
        assert_eq!(g.nnz(), 1);
    }

    #[test]
    fn triple_product_empty_selection() {
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 1, 1.0)]).unwrap();
        let g = b.triple_product(&[]).unwrap();
        assert_eq!(g.nnz(), 0);
        assert_eq!(g.nrows(), 2);
    }

    #[test]
    fn triple_product_matches_dense_btwb() {
        let (b, dense) = random_csr(4, 7, 3, 0.6);
        let rows = [0usize, 2];
        let g = b.triple_product(&rows).unwrap();
        // dense BᵀWB with W = diag(1,0,1,0)
        let mut want = vec![vec![0.0; 7]; 7];
        for &r in &rows {
            for a in 0..7 {
                for c in 0..7 {
                    want[a][c] += dense[r][a] * dense[r][c];
                }
            }
        }
        for a in 0..7 {
            for c in 0..7 {
                assert!((g.get(a, c) - want[a][c]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn triple_product_bit_symmetric() {
        let (b, _) = random_csr(5, 6, 11, 0.5);
        let g = b.triple_product(&[0, 1, 3, 4]).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(g.get(i, j).to_bits(), g.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn triple_product_row_out_of_range() {
        let b = SparseMatrix::<f64>::identity(2);
        assert!(matches!(
            b.triple_product(&[5]),
            Err(SparseError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn construction_sums_duplicates_and_prunes_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 3.0), (1, 1, -3.0), (1, 0, 0.0)],
        )
        .unwrap();
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn from_csr_parts_rejects_bad_structure() {
        // column indices not strictly increasing
        let r = SparseMatrix::from_csr_parts(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 2.0]);
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn spmv_linearity(seed in 0u64..200, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let (m, _) = random_csr(7, 5, seed, 0.5);
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = m.spmv(&combo);
            let mx = m.spmv(&x);
            let my = m.spmv(&y);
            let scale: f64 = lhs.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            for i in 0..7 {
                prop_assert!((lhs[i] - (alpha * mx[i] + beta * my[i])).abs() <= 1e-13 * scale);
            }
        }

        #[test]
        fn transpose_roundtrip_prop(seed in 0u64..200) {
            let (m, _) = random_csr(6, 9, seed, 0.3);
            prop_assert_eq!(m.transpose().transpose(), m);
        }
    }
}
