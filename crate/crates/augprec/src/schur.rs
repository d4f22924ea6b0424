//! Exact and approximate Schur-complement operators.
//!
//! The exact operator solves with the materialized `S_k = B A_k⁻¹ Bᵀ`. The
//! WkI and BFBT variants approximate `S_k⁻¹` directly (they multiply, they
//! do not solve), and the additive form evaluates the exact inverse formula
//! `S_k⁻¹ = W_k + (BBᵀ)⁻¹B(A − AVA)Bᵀ(BBᵀ)⁻¹` that holds when
//! `rank(W_k) = nullity(A)`.

use thiserror::Error;

use crate::augment::{AugmentedBlock, WeightSelection};
use crate::chol::{dense_cholesky, CholeskyFactor};
use crate::dense::{jacobi_svd, lu_inverse, rank_from_singular_values, DenseMatrix};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchurError {
    #[error("leading block is not positive definite")]
    NotPositiveDefinite,
    #[error("B is rank deficient: rank {rank} < {m} rows")]
    RankDeficientB { rank: usize, m: usize },
    #[error("reduced Hessian ZᵀAZ is singular (saddle matrix singular)")]
    SingularReducedHessian,
    #[error("WkI shift beta must be positive")]
    NonpositiveBeta,
}

/// Orthonormal basis of `ker(B)`: `Z` is `n x (n-m)` with `BZ = 0`.
#[derive(Debug, Clone)]
pub struct NullspaceBasis<T> {
    z: DenseMatrix<T>,
}

impl<T: Scalar> NullspaceBasis<T> {
    pub fn z(&self) -> &DenseMatrix<T> {
        &self.z
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }
}

/// Computes an orthonormal null-space basis of `B` from the right singular
/// vectors of its SVD.
pub fn nullspace_basis<T: Scalar>(b: &SparseMatrix<T>) -> Result<NullspaceBasis<T>, SchurError> {
    let m = b.nrows();
    let n = b.ncols();
    let svd = jacobi_svd(&b.to_dense());
    let rank = rank_from_singular_values(&svd.sigma, m, n);
    if rank < m {
        return Err(SchurError::RankDeficientB { rank, m });
    }
    let mut z = DenseMatrix::zeros(n, n - m);
    for (dst, src) in (m..n).enumerate() {
        let col = svd.v.column(src);
        z.set_column(dst, &col);
    }
    Ok(NullspaceBasis { z })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurKind {
    Exact,
    Diagonal,
    Wki,
    Bfbt,
    Additive,
}

enum SchurImp<T> {
    /// Cholesky solve with a materialized SPD `m x m` matrix.
    Solve {
        factor: CholeskyFactor<T>,
        matrix: DenseMatrix<T>,
    },
    /// `r -> (W_k + beta I) r`.
    Wki { weights: Vec<T>, beta: T },
    /// `r -> W_k r + (BBᵀ)⁻¹ B A Bᵀ (BBᵀ)⁻¹ r`.
    Bfbt {
        weights: Vec<T>,
        bbt_factor: CholeskyFactor<T>,
        b: SparseMatrix<T>,
        a: SparseMatrix<T>,
    },
    /// Multiply by a dense approximation of `S_k⁻¹`.
    DenseMul { matrix: DenseMatrix<T> },
}

/// SPD solve operator for the Schur block of a block-diagonal preconditioner.
pub struct SchurOperator<T> {
    kind: SchurKind,
    m: usize,
    imp: SchurImp<T>,
}

impl<T: Scalar> SchurOperator<T> {
    pub fn kind(&self) -> SchurKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Applies the (approximate) inverse Schur complement to `r`.
    pub fn apply_inverse(&self, r: &[T]) -> Vec<T> {
        assert_eq!(r.len(), self.m, "Schur operator dimension mismatch");
        match &self.imp {
            SchurImp::Solve { factor, .. } => factor.solve(r),
            SchurImp::Wki { weights, beta } => weights
                .iter()
                .zip(r)
                .map(|(&w, &v)| (w + *beta) * v)
                .collect(),
            SchurImp::Bfbt {
                weights,
                bbt_factor,
                b,
                a,
            } => {
                let t = bbt_factor.solve(r);
                let bt = b.spmv_transpose(&t);
                let abt = a.spmv(&bt);
                let bab = b.spmv(&abt);
                let s = bbt_factor.solve(&bab);
                weights
                    .iter()
                    .zip(r)
                    .zip(&s)
                    .map(|((&w, &v), &u)| w * v + u)
                    .collect()
            }
            SchurImp::DenseMul { matrix } => matrix.matvec(r),
        }
    }

    /// The materialized exact Schur matrix, when this operator holds one.
    pub fn materialized(&self) -> Option<&DenseMatrix<T>> {
        match &self.imp {
            SchurImp::Solve { matrix, .. } => Some(matrix),
            _ => None,
        }
    }

    /// The `m x m` matrix of the inverse action (`S⁻¹` or its approximation).
    pub fn inverse_matrix(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.m, self.m);
        let mut e = vec![T::zero(); self.m];
        for j in 0..self.m {
            e[j] = T::one();
            let col = self.apply_inverse(&e);
            out.set_column(j, &col);
            e[j] = T::zero();
        }
        out
    }

    /// The preconditioner's (2,2) block: the inverse of [`Self::inverse_matrix`].
    /// For solve-backed kinds this is the materialized matrix itself.
    pub fn precond_block(&self) -> Result<DenseMatrix<T>, SchurError> {
        match &self.imp {
            SchurImp::Solve { matrix, .. } => Ok(matrix.clone()),
            SchurImp::Wki { weights, beta } => {
                let diag: Vec<T> = weights.iter().map(|&w| T::one() / (w + *beta)).collect();
                Ok(DenseMatrix::from_diagonal(&diag))
            }
            _ => {
                let inv = self.inverse_matrix().symmetrize();
                lu_inverse(&inv).map_err(|_| SchurError::NotPositiveDefinite)
            }
        }
    }
}

/// Exact Schur complement `S_k = B A_k⁻¹ Bᵀ`, materialized densely and
/// factorized once.
pub fn exact_schur<T: Scalar>(
    blk: &AugmentedBlock<T>,
    b: &SparseMatrix<T>,
) -> Result<SchurOperator<T>, SchurError> {
    let ak_factor = blk.factor().map_err(|_| SchurError::NotPositiveDefinite)?;
    let m = b.nrows();
    let n = b.ncols();
    let mut s = DenseMatrix::zeros(m, m);
    // columns of Bᵀ are the rows of B
    for j in 0..m {
        let mut bj = vec![T::zero(); n];
        for (c, v) in b.row(j) {
            bj[c] = v;
        }
        let x = ak_factor.solve(&bj);
        let col = b.spmv(&x);
        s.set_column(j, &col);
    }
    let s = s.symmetrize();
    let factor = dense_cholesky(&s).map_err(|_| SchurError::NotPositiveDefinite)?;
    Ok(SchurOperator {
        kind: SchurKind::Exact,
        m,
        imp: SchurImp::Solve { factor, matrix: s },
    })
}

/// Schur block built from a diagonal leading-block approximation:
/// solve with the materialized `B D⁻¹ Bᵀ`.
pub fn diag_schur<T: Scalar>(
    diag_ak: &[T],
    b: &SparseMatrix<T>,
) -> Result<SchurOperator<T>, SchurError> {
    let m = b.nrows();
    if diag_ak.iter().any(|&d| d <= T::zero()) {
        return Err(SchurError::NotPositiveDefinite);
    }
    let mut s = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut acc = T::zero();
            // sparse dot of rows i and j of B, scaled by 1/diag
            let row_j: Vec<(usize, T)> = b.row(j).collect();
            let mut pos = 0usize;
            for (c, v) in b.row(i) {
                while pos < row_j.len() && row_j[pos].0 < c {
                    pos += 1;
                }
                if pos < row_j.len() && row_j[pos].0 == c {
                    acc += v * row_j[pos].1 / diag_ak[c];
                }
            }
            s.set(i, j, acc);
            s.set(j, i, acc);
        }
    }
    let factor = dense_cholesky(&s).map_err(|_| SchurError::NotPositiveDefinite)?;
    Ok(SchurOperator {
        kind: SchurKind::Diagonal,
        m,
        imp: SchurImp::Solve { factor, matrix: s },
    })
}

/// The WkI approximation `S_k⁻¹ ≈ W_k + beta I` (a multiply, not a solve).
pub fn wki_operator<T: Scalar>(
    sel: &WeightSelection<T>,
    beta: T,
    m: usize,
) -> Result<SchurOperator<T>, SchurError> {
    if beta <= T::zero() {
        return Err(SchurError::NonpositiveBeta);
    }
    let mut weights = vec![T::zero(); m];
    for &i in sel.rows() {
        weights[i] = T::one();
    }
    Ok(SchurOperator {
        kind: SchurKind::Wki,
        m,
        imp: SchurImp::Wki { weights, beta },
    })
}

/// The BFBT approximation `S_k⁻¹ ≈ W_k + (BBᵀ)⁻¹ B A Bᵀ (BBᵀ)⁻¹` with a
/// cached Cholesky factorization of `BBᵀ` shared by the two solves per
/// application.
pub fn bfbt_operator<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &SparseMatrix<T>,
    sel: &WeightSelection<T>,
) -> Result<SchurOperator<T>, SchurError> {
    let m = b.nrows();
    let mut bbt = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let row_j: Vec<(usize, T)> = b.row(j).collect();
            let mut acc = T::zero();
            let mut pos = 0usize;
            for (c, v) in b.row(i) {
                while pos < row_j.len() && row_j[pos].0 < c {
                    pos += 1;
                }
                if pos < row_j.len() && row_j[pos].0 == c {
                    acc += v * row_j[pos].1;
                }
            }
            bbt.set(i, j, acc);
            bbt.set(j, i, acc);
        }
    }
    let bbt_factor = dense_cholesky(&bbt).map_err(|_| SchurError::NotPositiveDefinite)?;
    let mut weights = vec![T::zero(); m];
    for &i in sel.rows() {
        weights[i] = T::one();
    }
    Ok(SchurOperator {
        kind: SchurKind::Bfbt,
        m,
        imp: SchurImp::Bfbt {
            weights,
            bbt_factor,
            b: b.clone(),
            a: a.clone(),
        },
    })
}

/// Evaluates the additive inverse formula
/// `S_k⁻¹ = W_k + (BBᵀ)⁻¹ B (A − AVA) Bᵀ (BBᵀ)⁻¹` with
/// `V = Z (ZᵀAZ)⁻¹ Zᵀ`, valid when `rank(W_k) = nullity(A)`.
pub fn schur_inverse_additive<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &SparseMatrix<T>,
    sel: &WeightSelection<T>,
    basis: &NullspaceBasis<T>,
) -> Result<DenseMatrix<T>, SchurError> {
    let n = a.nrows();
    let m = b.nrows();
    let z = basis.z();
    assert_eq!(z.nrows(), n, "null-space basis dimension mismatch");

    // ZᵀAZ (SPD whenever the saddle matrix is nonsingular)
    let mut az = DenseMatrix::zeros(n, z.ncols());
    for j in 0..z.ncols() {
        let col = a.spmv(&z.column(j));
        az.set_column(j, &col);
    }
    let ztaz = z.transpose().matmul(&az).symmetrize();
    let ztaz_factor = dense_cholesky(&ztaz).map_err(|_| SchurError::SingularReducedHessian)?;

    // V A = Z (ZᵀAZ)⁻¹ (AZ)ᵀ, then A − A·(VA)
    let azt = az.transpose();
    let mut inner = DenseMatrix::zeros(z.ncols(), n);
    for j in 0..n {
        let col = ztaz_factor.solve(&azt.column(j));
        inner.set_column(j, &col);
    }
    let va = z.matmul(&inner);
    let ad = a.to_dense();
    let a_minus_ava = ad.sub(&ad.matmul(&va)).symmetrize();

    // (BBᵀ)⁻¹ B (A − AVA) Bᵀ (BBᵀ)⁻¹
    let bd = b.to_dense();
    let core = bd.matmul(&a_minus_ava).matmul(&bd.transpose());
    let mut bbt = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = T::zero();
            for k in 0..n {
                acc += bd.get(i, k) * bd.get(j, k);
            }
            bbt.set(i, j, acc);
        }
    }
    let bbt_factor = dense_cholesky(&bbt).map_err(|_| SchurError::RankDeficientB { rank: 0, m })?;
    let mut half = DenseMatrix::zeros(m, m);
    for j in 0..m {
        let col = bbt_factor.solve(&core.column(j));
        half.set_column(j, &col);
    }
    let halft = half.transpose();
    let mut full = DenseMatrix::zeros(m, m);
    for j in 0..m {
        let col = bbt_factor.solve(&halft.column(j));
        full.set_column(j, &col);
    }
    let mut out = full.transpose().symmetrize();
    let w = sel.weight_matrix(m);
    for i in 0..m {
        let v = out.get(i, i) + w.get(i, i);
        out.set(i, i, v);
    }
    Ok(out)
}

/// Wraps a dense `S⁻¹` approximation (e.g. the additive formula) as an
/// operator.
pub fn additive_operator<T: Scalar>(matrix: DenseMatrix<T>) -> SchurOperator<T> {
    let m = matrix.nrows();
    SchurOperator {
        kind: SchurKind::Additive,
        m,
        imp: SchurImp::DenseMul { matrix },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{build_augmented, WeightSelection};
    use rand::prelude::*;

    /// Gauss-Jordan inverse, independent of the library factorizations.
    fn gj_inverse(m: &DenseMatrix<f64>) -> DenseMatrix<f64> {
        let n = m.nrows();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).map(|j| m.get(i, j)).collect();
                row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            let p = a[col][col];
            assert!(p.abs() > 1e-300, "singular in gj_inverse");
            for j in 0..2 * n {
                a[col][j] /= p;
            }
            for i in 0..n {
                if i != col {
                    let f = a[i][col];
                    for j in 0..2 * n {
                        a[i][j] -= f * a[col][j];
                    }
                }
            }
        }
        DenseMatrix::from_fn(n, n, |i, j| a[i][n + j])
    }

    fn maximal_nullity_system(
        n: usize,
        m: usize,
        seed: u64,
    ) -> (SparseMatrix<f64>, SparseMatrix<f64>) {
        // A = Z D Zᵀ over ker(B): nullity exactly m, kernels disjoint
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let bd = DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = SparseMatrix::from_dense(&bd);
        let basis = nullspace_basis(&b).unwrap();
        let z = basis.z();
        let d: Vec<f64> = (0..n - m).map(|_| rng.random_range(0.5..3.0)).collect();
        let mut a = DenseMatrix::zeros(n, n);
        for k in 0..n - m {
            for i in 0..n {
                for j in 0..n {
                    let v = a.get(i, j) + d[k] * z.get(i, k) * z.get(j, k);
                    a.set(i, j, v);
                }
            }
        }
        (SparseMatrix::from_dense(&a.symmetrize()), b)
    }

    #[test]
    fn nullspace_of_single_row() {
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0f64)]).unwrap();
        let basis = nullspace_basis(&b).unwrap();
        let z = basis.z();
        assert_eq!(z.nrows(), 2);
        assert_eq!(z.ncols(), 1);
        assert!(z.get(0, 0).abs() < 1e-14);
        assert!((z.get(1, 0).abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nullspace_padded_identity() {
        // B = [I2 | 0]: kernel is the padded coordinate directions
        let b = SparseMatrix::from_triplets(2, 4, &[(0, 0, 1.0f64), (1, 1, 1.0)]).unwrap();
        let basis = nullspace_basis(&b).unwrap();
        let z = basis.z();
        for j in 0..2 {
            let col = z.column(j);
            assert!(col[0].abs() < 1e-14 && col[1].abs() < 1e-14);
        }
    }

    #[test]
    fn nullspace_random_rectangular() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let bd = DenseMatrix::from_fn(3, 7, |_, _| rng.random_range(-1.0f64..1.0));
        let b = SparseMatrix::from_dense(&bd);
        let basis = nullspace_basis(&b).unwrap();
        let z = basis.z();
        assert_eq!(z.ncols(), 4);
        // BZ = 0 to machine precision relative to ||B||
        let bnorm = bd.frobenius_norm();
        let mut bz_norm = 0.0f64;
        for j in 0..4 {
            let bz = b.spmv(&z.column(j));
            bz_norm += bz.iter().map(|v| v * v).sum::<f64>();
        }
        assert!(bz_norm.sqrt() <= 1e-12 * bnorm);
        // ZᵀZ = I
        let ztz = z.transpose().matmul(z);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ztz.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nullspace_rejects_rank_deficient() {
        let b = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 0, 2.0)]).unwrap();
        assert!(matches!(
            nullspace_basis(&b),
            Err(SchurError::RankDeficientB { .. })
        ));
    }

    #[test]
    fn exact_schur_hand_case() {
        // A = diag(1,0), B = [0 1], W = {0}: Ak = I, S = BBᵀ = 1
        let a = SparseMatrix::from_diagonal(&[1.0f64, 0.0]);
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 1, 1.0)]).unwrap();
        let sel = WeightSelection::partial(vec![0]);
        let blk = build_augmented(&a, &b, &sel).unwrap();
        let s = exact_schur(&blk, &b).unwrap();
        let out = s.apply_inverse(&[3.5]);
        assert!((out[0] - 3.5).abs() < 1e-14);
    }

    #[test]
    fn exact_schur_matches_dense_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let n = 9;
        let m = 3;
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0f64..1.0));
        let a = SparseMatrix::from_dense(&g.matmul(&g.transpose()));
        let bd = DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = SparseMatrix::from_dense(&bd);
        let sel = WeightSelection::partial(vec![]);
        let blk = build_augmented(&a, &b, &sel).unwrap();
        let s = exact_schur(&blk, &b).unwrap();
        // oracle: dense B A⁻¹ Bᵀ via Gauss-Jordan
        let ainv = gj_inverse(&blk.ak().to_dense());
        let want = bd.matmul(&ainv).matmul(&bd.transpose());
        let got = s.materialized().unwrap();
        assert!(got.sub(&want).frobenius_norm() <= 1e-12 * want.frobenius_norm());
    }

    #[test]
    fn mrd_schur_identity_prop() {
        // B (A + BᵀWB)⁻¹ Bᵀ = W⁻¹ at maximal nullity, W = I
        for seed in 0..20 {
            let (a, b) = maximal_nullity_system(8, 3, 1000 + seed);
            let sel = WeightSelection::full(3);
            let blk = build_augmented(&a, &b, &sel).unwrap();
            let s = exact_schur(&blk, &b).unwrap();
            let got = s.materialized().unwrap();
            let dev = got.sub(&DenseMatrix::identity(3)).frobenius_norm();
            let scale = 3.0f64.sqrt();
            assert!(dev <= 1e-10 * scale, "seed {}: dev {}", seed, dev);
        }
    }

    #[test]
    fn wki_empty_selection_is_scaled_identity() {
        let sel = WeightSelection::<f64>::partial(vec![]);
        let op = wki_operator(&sel, 1.0, 3).unwrap();
        let out = op.apply_inverse(&[1.0, -2.0, 0.5]);
        assert_eq!(out, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn wki_selected_component() {
        let sel = WeightSelection::partial(vec![1]);
        let op = wki_operator(&sel, 0.5, 3).unwrap();
        let out = op.apply_inverse(&[2.0, 2.0, 2.0]);
        assert_eq!(out, vec![1.0, 3.0, 1.0]);
    }

    #[test]
    fn wki_rejects_nonpositive_beta() {
        let sel = WeightSelection::<f64>::partial(vec![]);
        assert!(matches!(
            wki_operator(&sel, 0.0, 2),
            Err(SchurError::NonpositiveBeta)
        ));
    }

    #[test]
    fn wki_exactness_at_maximal_nullity() {
        let (a, b) = maximal_nullity_system(10, 4, 3);
        let sel = WeightSelection::full(4);
        let blk = build_augmented(&a, &b, &sel).unwrap();
        let s = exact_schur(&blk, &b).unwrap();
        let sinv = gj_inverse(s.materialized().unwrap());
        for &beta in &[0.25f64, 0.015625] {
            let op = wki_operator(&sel, beta, 4).unwrap();
            let wki = op.inverse_matrix();
            // ||(W + beta I) - S⁻¹||_2 <= beta (+ roundoff margin)
            let dev = wki.sub(&sinv).symmetrize();
            let (e, _) = crate::dense::jacobi_eigen(&dev);
            let two_norm = e.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            assert!(
                two_norm <= beta * (1.0 + 1e-9),
                "beta {}: ||dev||_2 = {}",
                beta,
                two_norm
            );
        }
    }

    #[test]
    fn bfbt_orthonormal_rows_collapses() {
        // B with orthonormal rows: BBᵀ = I, operator = W + B A Bᵀ
        let a = SparseMatrix::from_diagonal(&[2.0f64, 3.0, 4.0]);
        let b = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let sel = WeightSelection::partial(vec![0]);
        let op = bfbt_operator(&a, &b, &sel).unwrap();
        let got = op.inverse_matrix();
        // W + BABᵀ = diag(1,0) + diag(2,3)
        assert!((got.get(0, 0) - 3.0).abs() < 1e-14);
        assert!((got.get(1, 1) - 3.0).abs() < 1e-14);
        assert!(got.get(0, 1).abs() < 1e-14);
    }

    #[test]
    fn bfbt_zero_a_is_pure_weight() {
        let a = SparseMatrix::<f64>::zeros(3, 3);
        let b =
            SparseMatrix::from_triplets(2, 3, &[(0, 0, 2.0f64), (1, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let sel = WeightSelection::partial(vec![1]);
        let op = bfbt_operator(&a, &b, &sel).unwrap();
        let got = op.inverse_matrix();
        assert!(got.get(0, 0).abs() < 1e-14);
        assert!((got.get(1, 1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn additive_formula_vanishing_term_hand_case() {
        // A = diag(1,0), B = [0 1], W = {0}: V = diag(1,0), A - AVA = 0
        let a = SparseMatrix::from_diagonal(&[1.0f64, 0.0]);
        let b = SparseMatrix::from_triplets(1, 2, &[(0, 1, 1.0)]).unwrap();
        let sel = WeightSelection::partial(vec![0]);
        let basis = nullspace_basis(&b).unwrap();
        let out = schur_inverse_additive(&a, &b, &sel, &basis).unwrap();
        assert!((out.get(0, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn additive_formula_spd_a_equals_schur_inverse() {
        // k = 0: result must equal (B A⁻¹ Bᵀ)⁻¹
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let n = 8;
        let m = 3;
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0f64..1.0));
        let a =
            SparseMatrix::from_dense(&g.matmul(&g.transpose()).add(&DenseMatrix::identity(n)));
        let bd = DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = SparseMatrix::from_dense(&bd);
        let sel = WeightSelection::partial(vec![]);
        let basis = nullspace_basis(&b).unwrap();
        let got = schur_inverse_additive(&a, &b, &sel, &basis).unwrap();
        let ainv = gj_inverse(&a.to_dense());
        let want = gj_inverse(&bd.matmul(&ainv).matmul(&bd.transpose()));
        assert!(got.sub(&want).frobenius_norm() <= 1e-8 * want.frobenius_norm());
    }

    #[test]
    fn additive_formula_matches_exact_inverse_partial_rank() {
        // n = 8, m = 3, k = 2: rank(W) = nullity(A) = 2, with ker(A)
        // spanned by two selected rows of B so that A_k is SPD
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let n = 8;
        let m = 3;
        let k = 2;
        let bd = DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0f64..1.0));
        let b = SparseMatrix::from_dense(&bd);
        // kernel directions: span of rows 0 and 2 of B, orthonormalized
        let sel_rows = vec![0usize, 2];
        let mut span = DenseMatrix::zeros(n, k);
        for (c, &r) in sel_rows.iter().enumerate() {
            let col: Vec<f64> = (0..n).map(|j| bd.get(r, j)).collect();
            span.set_column(c, &col);
        }
        let kern = crate::dense::mgs_orthonormal_columns(&span);
        // complete to an orthonormal basis and put positive weight on the rest
        let full = {
            let mut g = DenseMatrix::from_fn(n, n, |i, j| {
                if j < k {
                    kern.get(i, j)
                } else {
                    rng.random_range(-1.0..1.0)
                }
            });
            g = crate::dense::mgs_orthonormal_columns(&g);
            g
        };
        let mut ad = DenseMatrix::zeros(n, n);
        for t in k..n {
            let w = rng.random_range(0.5..3.0);
            for i in 0..n {
                for j in 0..n {
                    let v = ad.get(i, j) + w * full.get(i, t) * full.get(j, t);
                    ad.set(i, j, v);
                }
            }
        }
        let a = SparseMatrix::from_dense(&ad.symmetrize());
        let sel = WeightSelection::partial(sel_rows);
        let blk = build_augmented(&a, &b, &sel).unwrap();
        let basis = nullspace_basis(&b).unwrap();
        let got = schur_inverse_additive(&a, &b, &sel, &basis).unwrap();
        let s = exact_schur(&blk, &b).unwrap();
        let want = gj_inverse(s.materialized().unwrap());
        let rel = got.sub(&want).frobenius_norm() / want.frobenius_norm();
        assert!(rel <= 1e-8, "relative deviation {}", rel);
    }

    #[test]
    fn operators_are_spd_and_linear() {
        let (a, b) = maximal_nullity_system(10, 4, 77);
        let sel = WeightSelection::full(4);
        let blk = build_augmented(&a, &b, &sel).unwrap();
        let ops: Vec<SchurOperator<f64>> = vec![
            exact_schur(&blk, &b).unwrap(),
            wki_operator(&sel, 0.3, 4).unwrap(),
            bfbt_operator(&a, &b, &sel).unwrap(),
            diag_schur(&blk.ak().diagonal(), &b).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(78);
        for op in &ops {
            for _ in 0..50 {
                let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let s = op.apply_inverse(&r);
                let q: f64 = r.iter().zip(&s).map(|(x, y)| x * y).sum();
                assert!(q > 0.0, "operator {:?} not SPD", op.kind());
            }
            // superposition
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let alpha = 0.7;
            let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + b).collect();
            let lhs = op.apply_inverse(&combo);
            let sx = op.apply_inverse(&x);
            let sy = op.apply_inverse(&y);
            for i in 0..4 {
                let want = alpha * sx[i] + sy[i];
                assert!((lhs[i] - want).abs() <= 1e-13 * want.abs().max(1.0));
            }
        }
    }
}
