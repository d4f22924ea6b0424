//! Desk-scale dense kernels: storage, products, LU, QR, the cyclic Jacobi
//! symmetric eigensolver and a one-sided Jacobi SVD.
//!
//! Everything here targets matrices of a few hundred rows; the toolkit
//! deliberately solves small dense subproblems exactly instead of pulling in
//! a direct sparse solver.

use thiserror::Error;

use crate::scalar::{cast, Scalar};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DenseError {
    #[error("matrix is singular to working precision (pivot column {0})")]
    Singular(usize),
    #[error("dimension {n} exceeds the dense eigensolver cap of {cap}")]
    DimensionCap { n: usize, cap: usize },
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    values: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            values: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut values = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            values.extend_from_slice(r);
        }
        Self {
            nrows,
            ncols,
            values,
        }
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
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
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[i * self.ncols + j] = v;
    }

    #[inline]
    pub fn row_slice(&self, i: usize) -> &[T] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[T]) {
        assert_eq!(col.len(), self.nrows);
        for i in 0..self.nrows {
            self.set(i, j, col[i]);
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let aik = self.get(i, k);
                if aik == T::zero() {
                    continue;
                }
                for j in 0..other.ncols {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.ncols, x.len(), "matvec dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                self.row_slice(i)
                    .iter()
                    .zip(x)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(&other.values) {
            *o += *v;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(&other.values) {
            *o -= *v;
        }
        out
    }

    pub fn scale(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= alpha;
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.values
            .iter()
            .map(|v| *v * *v)
            .sum::<T>()
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Symmetrizes against roundoff: `(M + Mᵀ)/2`.
    pub fn symmetrize(&self) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let half = cast::<T>(0.5);
        Self::from_fn(self.nrows, self.ncols, |i, j| {
            (self.get(i, j) + self.get(j, i)) * half
        })
    }

    /// One-norm (max absolute column sum).
    pub fn norm_one(&self) -> T {
        (0..self.ncols)
            .map(|j| (0..self.nrows).map(|i| self.get(i, j).abs()).sum::<T>())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Stacks `self` on top of `other` (matching column counts).
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.ncols);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self {
            nrows: self.nrows + other.nrows,
            ncols: self.ncols,
            values,
        }
    }
}

/// LU factorization with partial pivoting; used for the dense inverses of
/// symmetric indefinite matrices (saddle matrices themselves).
pub struct LuFactor<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

pub fn lu_factor<T: Scalar>(m: &DenseMatrix<T>) -> Result<LuFactor<T>, DenseError> {
    assert_eq!(m.nrows(), m.ncols(), "LU requires a square matrix");
    let n = m.nrows();
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu.get(k, k).abs();
        for i in (k + 1)..n {
            let v = lu.get(i, k).abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == T::zero() {
            return Err(DenseError::Singular(k));
        }
        if p != k {
            for j in 0..n {
                let a = lu.get(k, j);
                lu.set(k, j, lu.get(p, j));
                lu.set(p, j, a);
            }
            perm.swap(k, p);
        }
        let piv = lu.get(k, k);
        for i in (k + 1)..n {
            let factor = lu.get(i, k) / piv;
            lu.set(i, k, factor);
            if factor == T::zero() {
                continue;
            }
            for j in (k + 1)..n {
                let v = lu.get(i, j) - factor * lu.get(k, j);
                lu.set(i, j, v);
            }
        }
    }
    Ok(LuFactor { lu, perm })
}

impl<T: Scalar> LuFactor<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc / self.lu.get(i, i);
        }
        x
    }
}

pub fn lu_inverse<T: Scalar>(m: &DenseMatrix<T>) -> Result<DenseMatrix<T>, DenseError> {
    let n = m.nrows();
    let f = lu_factor(m)?;
    let mut inv = DenseMatrix::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        let col = f.solve(&e);
        inv.set_column(j, &col);
        e[j] = T::zero();
    }
    Ok(inv)
}

/// Thin QR via modified Gram-Schmidt with one re-orthogonalization pass.
/// Returns the orthonormal factor only (all we need from it).
pub fn mgs_orthonormal_columns<T: Scalar>(m: &DenseMatrix<T>) -> DenseMatrix<T> {
    let (nr, nc) = (m.nrows(), m.ncols());
    assert!(nc <= nr, "need at least as many rows as columns");
    let mut q = m.clone();
    for j in 0..nc {
        let mut col = q.column(j);
        for _pass in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let proj: T = qk.iter().zip(&col).map(|(&a, &b)| a * b).sum();
                for i in 0..nr {
                    col[i] -= proj * qk[i];
                }
            }
        }
        let norm: T = col.iter().map(|v| *v * *v).sum::<T>().sqrt();
        assert!(norm > T::zero(), "rank-deficient input to QR");
        for v in col.iter_mut() {
            *v /= norm;
        }
        q.set_column(j, &col);
    }
    q
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps plane rotations over all off-diagonal pairs until the off-diagonal
/// Frobenius norm falls below `1e-12 * ||M||_F`. Returns eigenvalues sorted
/// ascending together with the matching orthonormal eigenvectors (columns).
pub fn jacobi_eigen<T: Scalar>(m: &DenseMatrix<T>) -> (Vec<T>, DenseMatrix<T>) {
    assert_eq!(m.nrows(), m.ncols(), "eigensolver requires a square matrix");
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    if n <= 1 {
        let evals = if n == 1 { vec![a.get(0, 0)] } else { vec![] };
        return (evals, v);
    }
    let norm = a.frobenius_norm();
    let threshold = cast::<T>(1e-12) * norm;
    let max_sweeps = 50;

    for _sweep in 0..max_sweeps {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                let x = a.get(i, j);
                off += x * x;
            }
        }
        off = (off + off).sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // rotation angle from the classic two-by-two reduction
                let theta = (aqq - app) / (cast::<T>(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(i, i)
            .partial_cmp(&a.get(j, j))
            .expect("eigenvalue comparison")
    });
    let evals: Vec<T> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut evecs = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        evecs.set_column(dst, &col);
    }
    (evals, evecs)
}

/// Singular value decomposition via one-sided Jacobi.
pub struct Svd<T> {
    /// Left singular vectors, `nrows x ncols.min(nrows)` (columns beyond the
    /// rank are zero).
    pub u: DenseMatrix<T>,
    /// Column norms of the rotated matrix, descending. Has `ncols` entries;
    /// only the first `min(nrows, ncols)` are singular values proper, the
    /// rest are structural zeros of a wide input.
    pub sigma: Vec<T>,
    /// Right singular vectors as columns, `ncols x ncols`, orthogonal.
    pub v: DenseMatrix<T>,
}

/// One-sided Jacobi SVD: orthogonalizes the columns of `m` by right
/// rotations. Accurate for small singular values (no Gram matrix is formed),
/// which is what the null-space extraction relies on.
pub fn jacobi_svd<T: Scalar>(m: &DenseMatrix<T>) -> Svd<T> {
    let (nr, nc) = (m.nrows(), m.ncols());
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(nc);
    let eps = T::epsilon();
    let max_sweeps = 60;

    for _sweep in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..nc.saturating_sub(1) {
            for q in (p + 1)..nc {
                let mut app = T::zero();
                let mut aqq = T::zero();
                let mut apq = T::zero();
                for i in 0..nr {
                    let x = a.get(i, p);
                    let y = a.get(i, q);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() || apq == T::zero() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (cast::<T>(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for i in 0..nr {
                    let x = a.get(i, p);
                    let y = a.get(i, q);
                    a.set(i, p, c * x - s * y);
                    a.set(i, q, s * x + c * y);
                }
                for i in 0..nc {
                    let x = v.get(i, p);
                    let y = v.get(i, q);
                    v.set(i, p, c * x - s * y);
                    v.set(i, q, s * x + c * y);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // column norms of the rotated matrix are the singular values
    let mut sig_idx: Vec<(T, usize)> = (0..nc)
        .map(|j| {
            let norm = (0..nr)
                .map(|i| {
                    let x = a.get(i, j);
                    x * x
                })
                .sum::<T>()
                .sqrt();
            (norm, j)
        })
        .collect();
    sig_idx.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("singular value comparison"));

    let ucols = nc.min(nr);
    let mut u = DenseMatrix::zeros(nr, ucols);
    let mut vs = DenseMatrix::zeros(nc, nc);
    let mut sigma = Vec::with_capacity(nc);
    for (dst, &(s, src)) in sig_idx.iter().enumerate() {
        sigma.push(s);
        let vcol = v.column(src);
        vs.set_column(dst, &vcol);
        if dst < ucols && s > T::zero() {
            let ucol: Vec<T> = (0..nr).map(|i| a.get(i, src) / s).collect();
            u.set_column(dst, &ucol);
        }
    }
    Svd { u, sigma, v: vs }
}

/// Numerical rank with the standard tolerance `max(nrows, ncols) * eps * sigma_max`.
pub fn numerical_rank<T: Scalar>(m: &DenseMatrix<T>) -> usize {
    let svd = jacobi_svd(m);
    rank_from_singular_values(&svd.sigma, m.nrows(), m.ncols())
}

pub fn rank_from_singular_values<T: Scalar>(sigma: &[T], nrows: usize, ncols: usize) -> usize {
    if sigma.is_empty() {
        return 0;
    }
    let smax = sigma[0];
    if smax == T::zero() {
        return 0;
    }
    let tol = T::from_usize(nrows.max(ncols)).unwrap() * T::epsilon() * smax;
    sigma.iter().filter(|&&s| s > tol).count()
}
