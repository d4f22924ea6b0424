//! The saddle-point system `[[A, Bᵀ], [B, 0]]` with symmetric positive
//! semidefinite `A` and full-row-rank `B`.

use thiserror::Error;

use crate::dense::{jacobi_svd, rank_from_singular_values, DenseMatrix};
use crate::scalar::{cast, Scalar};
use crate::sparse::SparseMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SaddleError {
    #[error("A must be square, got {0}x{1}")]
    LeadingNotSquare(usize, usize),
    #[error("B has {bcols} columns but A is {n}x{n}")]
    ColumnMismatch { bcols: usize, n: usize },
    #[error("need m < n, got m = {m}, n = {n}")]
    TooManyConstraints { m: usize, n: usize },
}

/// Vector partitioned conformally with the saddle system: `top` has length
/// `n`, `bottom` has length `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector<T> {
    pub top: Vec<T>,
    pub bottom: Vec<T>,
}

impl<T: Scalar> BlockVector<T> {
    pub fn new(top: Vec<T>, bottom: Vec<T>) -> Self {
        Self { top, bottom }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            top: vec![T::zero(); n],
            bottom: vec![T::zero(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.top.len() + self.bottom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dot(&self, other: &Self) -> T {
        let a: T = self.top.iter().zip(&other.top).map(|(&x, &y)| x * y).sum();
        let b: T = self
            .bottom
            .iter()
            .zip(&other.bottom)
            .map(|(&x, &y)| x * y)
            .sum();
        a + b
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = self.top.clone();
        out.extend_from_slice(&self.bottom);
        out
    }

    pub fn from_flat(flat: &[T], n: usize) -> Self {
        Self {
            top: flat[..n].to_vec(),
            bottom: flat[n..].to_vec(),
        }
    }
}

/// Report of the well-posedness certificate for a saddle system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellposedReport {
    /// `rank(B) = m`.
    pub b_full_rank: bool,
    /// `ker(A) ∩ ker(B) = {0}`, i.e. the stacked `[A; B]` has rank `n`.
    pub kernels_disjoint: bool,
    /// `n - rank(A)`.
    pub nullity_a: usize,
}

impl WellposedReport {
    pub fn is_wellposed(&self) -> bool {
        self.b_full_rank && self.kernels_disjoint
    }
}

/// Saddle-point system `(A, B)` of size `(n + m) x (n + m)`.
///
/// `A` is symmetrized at construction; if the correction exceeds `1e-12`
/// relative the defect is retained in `asymmetry_corrected` so callers can
/// warn about it.
#[derive(Debug, Clone)]
pub struct SaddleSystem<T> {
    a: SparseMatrix<T>,
    b: SparseMatrix<T>,
    n: usize,
    m: usize,
    asymmetry_corrected: Option<T>,
}

impl<T: Scalar> SaddleSystem<T> {
    pub fn new(a: SparseMatrix<T>, b: SparseMatrix<T>) -> Result<Self, SaddleError> {
        if a.nrows() != a.ncols() {
            return Err(SaddleError::LeadingNotSquare(a.nrows(), a.ncols()));
        }
        let n = a.nrows();
        let m = b.nrows();
        if b.ncols() != n {
            return Err(SaddleError::ColumnMismatch {
                bcols: b.ncols(),
                n,
            });
        }
        if m >= n {
            return Err(SaddleError::TooManyConstraints { m, n });
        }
        let defect = a.asymmetry();
        let (a, asymmetry_corrected) = if defect == T::zero() {
            (a, None)
        } else if defect <= cast::<T>(1e-12) {
            (a.symmetrize(), None)
        } else {
            (a.symmetrize(), Some(defect))
        };
        Ok(Self {
            a,
            b,
            n,
            m,
            asymmetry_corrected,
        })
    }

    pub fn a(&self) -> &SparseMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &SparseMatrix<T> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Relative asymmetry of the original `A` when it exceeded `1e-12`.
    pub fn asymmetry_corrected(&self) -> Option<T> {
        self.asymmetry_corrected
    }

    /// Applies the saddle operator: `(A v_t + Bᵀ v_b, B v_t)`.
    pub fn apply_k(&self, v: &BlockVector<T>) -> BlockVector<T> {
        assert_eq!(v.top.len(), self.n, "block vector top length mismatch");
        assert_eq!(v.bottom.len(), self.m, "block vector bottom length mismatch");
        let mut top = self.a.spmv(&v.top);
        let bt = self.b.spmv_transpose(&v.bottom);
        for (t, u) in top.iter_mut().zip(&bt) {
            *t += *u;
        }
        let bottom = self.b.spmv(&v.top);
        BlockVector { top, bottom }
    }

    /// Assembles the dense `(n+m) x (n+m)` saddle matrix.
    pub fn assemble_dense(&self) -> DenseMatrix<T> {
        let size = self.n + self.m;
        let mut k = DenseMatrix::zeros(size, size);
        for i in 0..self.n {
            for (j, v) in self.a.row(i) {
                k.set(i, j, v);
            }
        }
        for i in 0..self.m {
            for (j, v) in self.b.row(i) {
                k.set(self.n + i, j, v);
                k.set(j, self.n + i, v);
            }
        }
        k
    }

    /// Certifies well-posedness by dense SVD ranks with tolerance
    /// `max(n, m) * eps * sigma_max`.
    pub fn check_wellposed(&self) -> WellposedReport {
        let bd = self.b.to_dense();
        let svd_b = jacobi_svd(&bd);
        let rank_b = rank_from_singular_values(&svd_b.sigma, self.m, self.n);

        let ad = self.a.to_dense();
        let svd_a = jacobi_svd(&ad);
        let rank_a = rank_from_singular_values(&svd_a.sigma, self.n, self.n);

        let stacked = ad.vstack(&bd);
        let svd_s = jacobi_svd(&stacked);
        let rank_s = rank_from_singular_values(&svd_s.sigma, self.n + self.m, self.n);

        WellposedReport {
            b_full_rank: rank_b == self.m,
            kernels_disjoint: rank_s == self.n,
            nullity_a: self.n - rank_a,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn random_system(n: usize, m: usize, seed: u64) -> SaddleSystem<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = g.matmul(&g.transpose());
        let b = DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        SaddleSystem::new(SparseMatrix::from_dense(&a), SparseMatrix::from_dense(&b)).unwrap()
    }

    #[test]
    fn apply_k_zero_is_zero() {
        let sys = random_system(5, 2, 1);
        let v = BlockVector::zeros(5, 2);
        let out = sys.apply_k(&v);
        assert!(out.norm() == 0.0);
    }

    #[test]
    fn apply_k_hand_case() {
        let a = SparseMatrix::<f64>::identity(2);
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap();
        let sys = SaddleSystem::new(a, b).unwrap();
        let out = sys.apply_k(&BlockVector::new(vec![1.0, 0.0], vec![1.0]));
        assert_eq!(out.top, vec![2.0, 0.0]);
        assert_eq!(out.bottom, vec![1.0]);
    }

    #[test]
    fn apply_k_matches_dense_assembly() {
        let sys = random_system(8, 3, 9);
        let k = sys.assemble_dense();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let v = BlockVector::new(
            (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let got = sys.apply_k(&v).to_flat();
        let want = k.matvec(&v.to_flat());
        let scale: f64 = want.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn assemble_minimal() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0)]).unwrap();
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 0, 3.0)]).unwrap();
        let sys = SaddleSystem::new(a, b).unwrap();
        let k = sys.assemble_dense();
        assert_eq!(k.get(0, 0), 2.0);
        assert_eq!(k.get(0, 2), 3.0);
        assert_eq!(k.get(2, 0), 3.0);
        assert_eq!(k.get(2, 2), 0.0);
    }

    #[test]
    fn assembled_matrix_is_symmetric() {
        let sys = random_system(7, 3, 2);
        let k = sys.assemble_dense();
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn apply_k_symmetric_bilinear_form() {
        let sys = random_system(9, 4, 33);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(34);
        for _ in 0..10 {
            let u = BlockVector::new(
                (0..9).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let v = BlockVector::new(
                (0..9).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let lhs = sys.apply_k(&u).dot(&v);
            let rhs = u.dot(&sys.apply_k(&v));
            assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn wellposed_identity_leading() {
        let sys = SaddleSystem::new(
            SparseMatrix::<f64>::identity(3),
            SparseMatrix::from_triplets(1, 3, &[(0, 0, 1.0), (0, 2, 2.0)]).unwrap(),
        )
        .unwrap();
        let rep = sys.check_wellposed();
        assert!(rep.b_full_rank);
        assert!(rep.kernels_disjoint);
        assert_eq!(rep.nullity_a, 0);
    }

    #[test]
    fn wellposed_disjoint_kernels() {
        // ker A = span(e2), ker B = span(e1)
        let a = SparseMatrix::from_diagonal(&[1.0, 0.0]);
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 1, 1.0)]).unwrap();
        let sys = SaddleSystem::new(a, b).unwrap();
        let rep = sys.check_wellposed();
        assert!(rep.b_full_rank);
        assert!(rep.kernels_disjoint);
        assert_eq!(rep.nullity_a, 1);
    }

    #[test]
    fn wellposed_detects_shared_kernel() {
        // e2 is in both kernels, so the saddle matrix is singular
        let a = SparseMatrix::from_diagonal(&[1.0, 0.0]);
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap();
        let sys = SaddleSystem::new(a, b).unwrap();
        let rep = sys.check_wellposed();
        assert!(rep.b_full_rank);
        assert!(!rep.kernels_disjoint);
    }

    #[test]
    fn wellposed_system_has_nonsingular_k() {
        let a = SparseMatrix::from_diagonal(&[1.0, 0.0, 2.0]);
        let b = SparseMatrix::from_triplets(1, 3, &[(0, 1, 1.0)]).unwrap();
        let sys = SaddleSystem::new(a, b).unwrap();
        assert!(sys.check_wellposed().is_wellposed());
        let k = sys.assemble_dense();
        let svd = jacobi_svd(&k);
        let smin = svd.sigma.last().copied().unwrap();
        let smax = svd.sigma[0];
        assert!(smin > 4.0 * f64::EPSILON * smax);
    }

    #[test]
    fn asymmetric_a_gets_symmetrized() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 0.5), (1, 1, 1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap();
        let sys = SaddleSystem::new(a, b).unwrap();
        assert!(sys.asymmetry_corrected().is_some());
        assert_eq!(sys.a().get(0, 1), 0.25);
        assert_eq!(sys.a().get(1, 0), 0.25);
    }

    #[test]
    fn rejects_m_not_less_than_n() {
        let a = SparseMatrix::<f64>::identity(2);
        let b = SparseMatrix::<f64>::identity(2);
        assert!(matches!(
            SaddleSystem::new(a, b),
            Err(SaddleError::TooManyConstraints { .. })
        ));
    }
}
