//! Cholesky factorizations: exact dense `LLᵀ` and threshold incomplete
//! Cholesky (ICT) for sparse SPD matrices.
//!
//! The ICT dropping rule is column-relative: entries of each computed column
//! whose magnitude is below `droptol` times the column 2-norm (fill-in
//! included, diagonal never dropped) are discarded.

use thiserror::Error;

use crate::dense::DenseMatrix;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FactorError {
    #[error("matrix not positive definite: nonpositive pivot at index {0}")]
    NotPositiveDefinite(usize),
    #[error("incomplete factorization breakdown: pivot {0} nonpositive after dropping")]
    BreakdownPivot(usize),
}

/// Lower-triangular Cholesky factor, dense or incomplete-sparse.
#[derive(Debug, Clone)]
pub enum CholeskyFactor<T> {
    Dense(DenseMatrix<T>),
    Incomplete(SparseMatrix<T>),
}

impl<T: Scalar> CholeskyFactor<T> {
    pub fn dim(&self) -> usize {
        match self {
            CholeskyFactor::Dense(l) => l.nrows(),
            CholeskyFactor::Incomplete(l) => l.nrows(),
        }
    }

    /// Stored entries of the factor (used in experiment reports).
    pub fn nnz(&self) -> usize {
        match self {
            CholeskyFactor::Dense(l) => {
                let n = l.nrows();
                n * (n + 1) / 2
            }
            CholeskyFactor::Incomplete(l) => l.nnz(),
        }
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let y = self.solve_lower(b);
        self.solve_upper(&y)
    }

    /// Forward substitution `L y = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "solve dimension mismatch");
        match self {
            CholeskyFactor::Dense(l) => {
                let mut y = b.to_vec();
                for i in 0..n {
                    let mut acc = y[i];
                    for j in 0..i {
                        acc -= l.get(i, j) * y[j];
                    }
                    y[i] = acc / l.get(i, i);
                }
                y
            }
            CholeskyFactor::Incomplete(l) => {
                let mut y = b.to_vec();
                for i in 0..n {
                    let mut acc = y[i];
                    let mut diag = T::zero();
                    for (j, v) in l.row(i) {
                        if j < i {
                            acc -= v * y[j];
                        } else if j == i {
                            diag = v;
                        }
                    }
                    y[i] = acc / diag;
                }
                y
            }
        }
    }

    /// Back substitution `Lᵀ x = y`.
    pub fn solve_upper(&self, y: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(y.len(), n, "solve dimension mismatch");
        match self {
            CholeskyFactor::Dense(l) => {
                let mut x = y.to_vec();
                for i in (0..n).rev() {
                    x[i] /= l.get(i, i);
                    let xi = x[i];
                    for j in 0..i {
                        x[j] -= l.get(i, j) * xi;
                    }
                }
                x
            }
            CholeskyFactor::Incomplete(l) => {
                let mut x = y.to_vec();
                for i in (0..n).rev() {
                    let mut diag = T::zero();
                    for (j, v) in l.row(i) {
                        if j == i {
                            diag = v;
                        }
                    }
                    x[i] /= diag;
                    let xi = x[i];
                    for (j, v) in l.row(i) {
                        if j < i {
                            x[j] -= v * xi;
                        }
                    }
                }
                x
            }
        }
    }

    /// Materializes `L Lᵀ` (the SPD operator the factor represents).
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let l = match self {
            CholeskyFactor::Dense(l) => l.clone(),
            CholeskyFactor::Incomplete(l) => l.to_dense(),
        };
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for k in 0..=i.min(j) {
                    acc += l.get(i, k) * l.get(j, k);
                }
                out.set(i, j, acc);
            }
        }
        out
    }
}

/// Exact dense Cholesky `M = L Lᵀ` of a symmetric positive definite matrix.
pub fn dense_cholesky<T: Scalar>(m: &DenseMatrix<T>) -> Result<CholeskyFactor<T>, FactorError> {
    assert_eq!(m.nrows(), m.ncols(), "Cholesky requires a square matrix");
    let n = m.nrows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m.get(j, j);
        for k in 0..j {
            let v = l.get(j, k);
            diag -= v * v;
        }
        if diag <= T::zero() || !diag.is_finite() {
            return Err(FactorError::NotPositiveDefinite(j));
        }
        let d = diag.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut acc = m.get(i, j);
            for k in 0..j {
                acc -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, acc / d);
        }
    }
    Ok(CholeskyFactor::Dense(l))
}

/// Threshold incomplete Cholesky (ICT) of a sparse symmetric matrix with
/// positive diagonal. `droptol = 0` reproduces the exact factor.
pub fn incomplete_cholesky<T: Scalar>(
    m: &SparseMatrix<T>,
    droptol: T,
) -> Result<CholeskyFactor<T>, FactorError> {
    assert_eq!(m.nrows(), m.ncols(), "Cholesky requires a square matrix");
    let n = m.nrows();
    // finalized columns of L: (row index, value), rows ascending, diagonal first
    let mut cols: Vec<Vec<(usize, T)>> = Vec::with_capacity(n);
    // for each row j, the finalized (k, l_jk) with k < j, in ascending k
    let mut row_pattern: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];

    let mut work = vec![T::zero(); n];
    let mut touched = vec![false; n];
    let mut touch_list: Vec<usize> = Vec::new();

    for j in 0..n {
        // scatter the lower part of column j of M (row j by symmetry)
        for (c, v) in m.row(j) {
            if c >= j {
                work[c] = v;
                if !touched[c] {
                    touched[c] = true;
                    touch_list.push(c);
                }
            }
        }
        // left-looking update from every finalized column k with l_jk != 0
        for &(k, ljk) in &row_pattern[j] {
            for &(i, lik) in &cols[k] {
                if i < j {
                    continue;
                }
                if !touched[i] {
                    touched[i] = true;
                    touch_list.push(i);
                    work[i] = T::zero();
                }
                work[i] -= ljk * lik;
            }
        }

        let pivot = work[j];
        if pivot <= T::zero() || !pivot.is_finite() {
            for &i in &touch_list {
                work[i] = T::zero();
                touched[i] = false;
            }
            touch_list.clear();
            return Err(FactorError::BreakdownPivot(j));
        }
        let d = pivot.sqrt();

        // full computed column (with fill), then column-relative dropping
        let mut column: Vec<(usize, T)> = Vec::with_capacity(touch_list.len());
        let mut norm_sq = d * d;
        for &i in &touch_list {
            if i > j && work[i] != T::zero() {
                let lij = work[i] / d;
                norm_sq += lij * lij;
                column.push((i, lij));
            }
        }
        let cutoff = droptol * norm_sq.sqrt();
        column.retain(|&(_, v)| v.abs() >= cutoff);
        column.sort_by_key(|&(i, _)| i);

        for &i in &touch_list {
            work[i] = T::zero();
            touched[i] = false;
        }
        touch_list.clear();

        let mut stored = Vec::with_capacity(column.len() + 1);
        stored.push((j, d));
        for &(i, v) in &column {
            row_pattern[i].push((j, v));
            stored.push((i, v));
        }
        cols.push(stored);
    }

    let mut trip = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        for &(i, v) in col {
            trip.push((i, j, v));
        }
    }
    let l = SparseMatrix::from_triplets(n, n, &trip).expect("factor triplets in range");
    Ok(CholeskyFactor::Incomplete(l))
}

/// Hager-style 1-norm condition estimate of the SPD matrix behind `factor`:
/// `||A||_1 * est(||A^{-1}||_1)`. The factor provides the inverse action.
pub fn condest_one<T: Scalar>(a: &SparseMatrix<T>, factor: &CholeskyFactor<T>) -> T {
    let n = a.nrows();
    if n == 0 {
        return T::one();
    }
    let mut col_sums = vec![T::zero(); a.ncols()];
    for i in 0..n {
        for (j, v) in a.row(i) {
            col_sums[j] += v.abs();
        }
    }
    let a_norm = col_sums.iter().fold(T::zero(), |x, &y| x.max(y));

    let mut x = vec![T::one() / T::from_usize(n).unwrap(); n];
    let mut est = T::zero();
    for _ in 0..5 {
        let y = factor.solve(&x);
        est = y.iter().map(|v| v.abs()).sum();
        let xi: Vec<T> = y
            .iter()
            .map(|&v| if v >= T::zero() { T::one() } else { -T::one() })
            .collect();
        let z = factor.solve(&xi); // A symmetric: A⁻ᵀ = A⁻¹
        let (mut zmax, mut jmax) = (T::zero(), 0usize);
        for (j, &v) in z.iter().enumerate() {
            if v.abs() > zmax {
                zmax = v.abs();
                jmax = j;
            }
        }
        let ztx: T = z.iter().zip(&x).map(|(&u, &w)| u * w).sum();
        if zmax <= ztx {
            break;
        }
        x = vec![T::zero(); n];
        x[jmax] = T::one();
    }
    a_norm * est
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::jacobi_eigen;
    use rand::prelude::*;

    #[test]
    fn cholesky_identity() {
        let f = dense_cholesky(&DenseMatrix::<f64>::identity(4)).unwrap();
        match &f {
            CholeskyFactor::Dense(l) => {
                for i in 0..4 {
                    assert_eq!(l.get(i, i), 1.0);
                }
            }
            _ => panic!("expected dense factor"),
        }
    }

    #[test]
    fn cholesky_diagonal_square_roots() {
        let m = DenseMatrix::from_diagonal(&[4.0, 9.0]);
        let f = dense_cholesky(&m).unwrap();
        match &f {
            CholeskyFactor::Dense(l) => {
                assert_eq!(l.get(0, 0), 2.0);
                assert_eq!(l.get(1, 1), 3.0);
            }
            _ => panic!("expected dense factor"),
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        // eigenvalues 3 and -1
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            dense_cholesky(&m),
            Err(FactorError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn cholesky_solve_residual() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 15;
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let spd = g.matmul(&g.transpose()).add(&DenseMatrix::identity(n));
        let f = dense_cholesky(&spd).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = f.solve(&b);
        let r = spd.matvec(&x);
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rn = r
            .iter()
            .zip(&b)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt();
        assert!(rn <= 1e-10 * bn);
    }

    #[test]
    fn factorization_accuracy() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 10;
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let spd = g.matmul(&g.transpose()).add(&DenseMatrix::identity(n));
        let f = dense_cholesky(&spd).unwrap();
        let rec = f.reconstruct();
        assert!(rec.sub(&spd).frobenius_norm() <= 1e-12 * spd.frobenius_norm());
    }

    #[test]
    fn ict_diagonal_is_exact() {
        let m = SparseMatrix::from_diagonal(&[4.0, 9.0, 16.0]);
        let f = incomplete_cholesky(&m, 0.5).unwrap();
        match &f {
            CholeskyFactor::Incomplete(l) => {
                assert_eq!(l.get(0, 0), 2.0);
                assert_eq!(l.get(1, 1), 3.0);
                assert_eq!(l.get(2, 2), 4.0);
                assert_eq!(l.nnz(), 3);
            }
            _ => panic!("expected incomplete factor"),
        }
    }

    #[test]
    fn ict_zero_droptol_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let n = 12;
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
        let spd = g.matmul(&g.transpose()).add(&DenseMatrix::identity(n).scale(2.0));
        let sp = SparseMatrix::from_dense(&spd);
        let ic = incomplete_cholesky(&sp, 0.0).unwrap();
        let dc = dense_cholesky(&spd).unwrap();
        let (li, ld) = match (&ic, &dc) {
            (CholeskyFactor::Incomplete(a), CholeskyFactor::Dense(b)) => (a.to_dense(), b.clone()),
            _ => unreachable!(),
        };
        assert!(li.sub(&ld).frobenius_norm() <= 1e-12 * ld.frobenius_norm());
    }

    #[test]
    fn ict_beats_jacobi_on_tridiagonal() {
        // 20x20 tridiagonal SPD test: IC(0.01) yields a smaller
        // ||I - L⁻¹ M L⁻ᵀ||_2 than the Jacobi split
        let n = 20;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.5));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.0));
            }
        }
        let m = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let md = m.to_dense();

        let f = incomplete_cholesky(&m, 0.01).unwrap();
        let mut ic_mat = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            // L⁻¹ M L⁻ᵀ column by column
            let t = f.solve_upper(&e);
            let mt = md.matvec(&t);
            let col = f.solve_lower(&mt);
            ic_mat.set_column(j, &col);
        }
        let ic_dev = deviation_from_identity(&ic_mat);

        let dinv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / md.get(i, i).sqrt()).collect();
        let jac =
            DenseMatrix::from_fn(n, n, |i, j| dinv_sqrt[i] * md.get(i, j) * dinv_sqrt[j]);
        let jac_dev = deviation_from_identity(&jac);
        assert!(
            ic_dev < jac_dev,
            "IC dev {} should beat Jacobi dev {}",
            ic_dev,
            jac_dev
        );
    }

    fn deviation_from_identity(m: &DenseMatrix<f64>) -> f64 {
        let n = m.nrows();
        let dev = m.sub(&DenseMatrix::identity(n)).symmetrize();
        let (e, _) = jacobi_eigen(&dev);
        e.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn ict_breakdown_reported() {
        // indefinite matrix trips a nonpositive pivot
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)])
            .unwrap();
        assert!(matches!(
            incomplete_cholesky(&m, 0.0),
            Err(FactorError::BreakdownPivot(_))
        ));
    }

    #[test]
    fn condest_tracks_true_condition() {
        let d: Vec<f64> = vec![1.0, 10.0, 100.0, 1000.0];
        let m = SparseMatrix::from_diagonal(&d);
        let f = dense_cholesky(&m.to_dense()).unwrap();
        let est = condest_one(&m, &f);
        assert!((est - 1000.0).abs() < 1e-6, "est = {}", est);
    }
}
