//! Block-diagonal SPD preconditioners: a leading-block solver paired with a
//! Schur operator.
//!
//! The leading block can be solved exactly (dense Cholesky), by reciprocal
//! diagonal, by incomplete Cholesky triangular solves, or by an inner
//! block-Jacobi-preconditioned CG. The last one makes the preconditioner
//! *flexible*: its action changes run to run, so the outer solver must be
//! FGMRES, never MINRES.

use std::cell::Cell;

use thiserror::Error;

use crate::augment::AugmentedBlock;
use crate::chol::{dense_cholesky, incomplete_cholesky, CholeskyFactor, FactorError};
use crate::dense::DenseMatrix;
use crate::krylov;
use crate::saddle::BlockVector;
use crate::scalar::{cast, Scalar};
use crate::schur::{diag_schur, exact_schur, SchurError, SchurOperator};
use crate::sparse::SparseMatrix;

/// Inner CG defaults; the iteration cap is a safety net on top of the
/// loose 0.1 tolerance.
pub const INNER_CG_TOL: f64 = 0.1;
pub const INNER_CG_MAXIT: usize = 200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrecondError {
    #[error("leading block has a nonpositive diagonal entry at {0}")]
    NonpositiveDiagonal(usize),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Schur(#[from] SchurError),
    #[error("flexible preconditioners cannot be materialized")]
    NotMaterializable,
}

/// Block-Jacobi split solver used to precondition the inner CG: exact
/// solves with the two principal diagonal blocks `[0, split)` and
/// `[split, n)`.
#[derive(Debug, Clone)]
pub struct BlockJacobi<T> {
    lo: CholeskyFactor<T>,
    hi: CholeskyFactor<T>,
    split: usize,
}

impl<T: Scalar> BlockJacobi<T> {
    pub fn new(ak: &SparseMatrix<T>, split: usize) -> Result<Self, FactorError> {
        let n = ak.nrows();
        assert!(split > 0 && split < n, "split must cut the matrix in two");
        let lo = dense_cholesky(&ak.principal_submatrix(0, split).to_dense())?;
        let hi = dense_cholesky(&ak.principal_submatrix(split, n).to_dense())?;
        Ok(Self { lo, hi, split })
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let mut out = self.lo.solve(&v[..self.split]);
        out.extend(self.hi.solve(&v[self.split..]));
        out
    }
}

/// SPD solve operator for the leading block.
pub enum LeadingSolver<T> {
    /// Dense Cholesky solve with `A_k` itself (the ideal block).
    Exact {
        factor: CholeskyFactor<T>,
        matrix: DenseMatrix<T>,
    },
    /// Reciprocal-diagonal multiply.
    Diagonal { inv_diag: Vec<T> },
    /// Incomplete Cholesky triangular solves (preconditioner matrix `LLᵀ`).
    Ic { factor: CholeskyFactor<T> },
    /// Inner block-Jacobi preconditioned CG on `A_k`.
    InnerCg {
        ak: SparseMatrix<T>,
        jacobi: BlockJacobi<T>,
        tol: T,
        maxit: usize,
        breaches: Cell<usize>,
    },
}

impl<T: Scalar> LeadingSolver<T> {
    pub fn dim(&self) -> usize {
        match self {
            LeadingSolver::Exact { matrix, .. } => matrix.nrows(),
            LeadingSolver::Diagonal { inv_diag } => inv_diag.len(),
            LeadingSolver::Ic { factor } => factor.dim(),
            LeadingSolver::InnerCg { ak, .. } => ak.nrows(),
        }
    }

    pub fn is_flexible(&self) -> bool {
        matches!(self, LeadingSolver::InnerCg { .. })
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        match self {
            LeadingSolver::Exact { factor, .. } => factor.solve(v),
            LeadingSolver::Diagonal { inv_diag } => {
                inv_diag.iter().zip(v).map(|(&d, &x)| d * x).collect()
            }
            LeadingSolver::Ic { factor } => factor.solve(v),
            LeadingSolver::InnerCg {
                ak,
                jacobi,
                tol,
                maxit,
                breaches,
            } => {
                let rep = krylov::pcg(
                    |x: &[T]| ak.spmv(x),
                    |x: &[T]| jacobi.apply(x),
                    v,
                    *tol,
                    *maxit,
                )
                .expect("certified SPD leading block turned indefinite in inner CG");
                if !rep.converged {
                    // reported, not fatal: continue with the best iterate
                    breaches.set(breaches.get() + 1);
                }
                rep.solution
            }
        }
    }

    /// Stored entries of the incomplete factor, when one backs this solver.
    pub fn ic_nnz(&self) -> Option<usize> {
        match self {
            LeadingSolver::Ic { factor } => Some(factor.nnz()),
            _ => None,
        }
    }

    /// The SPD matrix this solver inverts (`A_k`, `diag(A_k)` or `LLᵀ`);
    /// flexible solvers have none.
    fn materialize(&self) -> Result<DenseMatrix<T>, PrecondError> {
        match self {
            LeadingSolver::Exact { matrix, .. } => Ok(matrix.clone()),
            LeadingSolver::Diagonal { inv_diag } => {
                let diag: Vec<T> = inv_diag.iter().map(|&d| T::one() / d).collect();
                Ok(DenseMatrix::from_diagonal(&diag))
            }
            LeadingSolver::Ic { factor } => Ok(factor.reconstruct()),
            LeadingSolver::InnerCg { .. } => Err(PrecondError::NotMaterializable),
        }
    }
}

/// Which leading-block approximation to pair with a Schur operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeadingKind<T> {
    Exact,
    Diagonal,
    Ic { droptol: T },
    InnerCg { tol: T, maxit: usize, split: usize },
}

/// Block-diagonal SPD preconditioner `blockdiag(leading, schur)`.
pub struct BlockDiagPrecond<T> {
    leading: LeadingSolver<T>,
    schur: SchurOperator<T>,
    flexible: bool,
}

impl<T: Scalar> BlockDiagPrecond<T> {
    pub fn new(leading: LeadingSolver<T>, schur: SchurOperator<T>) -> Self {
        let flexible = leading.is_flexible();
        Self {
            leading,
            schur,
            flexible,
        }
    }

    pub fn n(&self) -> usize {
        self.leading.dim()
    }

    pub fn m(&self) -> usize {
        self.schur.dim()
    }

    /// True iff the leading solver is an inner iteration, in which case the
    /// outer solver must be flexible (FGMRES).
    pub fn flexible(&self) -> bool {
        self.flexible
    }

    pub fn leading(&self) -> &LeadingSolver<T> {
        &self.leading
    }

    pub fn schur(&self) -> &SchurOperator<T> {
        &self.schur
    }

    /// Applies the inverse preconditioner blockwise.
    pub fn apply_inverse(&self, v: &BlockVector<T>) -> BlockVector<T> {
        assert_eq!(v.top.len(), self.n(), "top block length mismatch");
        assert_eq!(v.bottom.len(), self.m(), "bottom block length mismatch");
        BlockVector {
            top: self.leading.apply(&v.top),
            bottom: self.schur.apply_inverse(&v.bottom),
        }
    }

    /// Count of inner-CG iteration-cap breaches recorded so far.
    pub fn inner_breaches(&self) -> usize {
        match &self.leading {
            LeadingSolver::InnerCg { breaches, .. } => breaches.get(),
            _ => 0,
        }
    }

    /// Dense `(n+m) x (n+m)` preconditioner matrix for spectral analysis.
    pub fn materialize(&self) -> Result<DenseMatrix<T>, PrecondError> {
        if self.flexible {
            return Err(PrecondError::NotMaterializable);
        }
        let top = self.leading.materialize()?;
        let bottom = self.schur.precond_block()?;
        let n = top.nrows();
        let m = bottom.nrows();
        let mut out = DenseMatrix::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, top.get(i, j));
            }
        }
        for i in 0..m {
            for j in 0..m {
                out.set(n + i, n + j, bottom.get(i, j));
            }
        }
        Ok(out)
    }
}

/// The ideal preconditioner: exact solves with `A_k` and with
/// `S_k = B A_k⁻¹ Bᵀ`.
pub fn make_ideal<T: Scalar>(
    blk: &AugmentedBlock<T>,
    b: &SparseMatrix<T>,
) -> Result<BlockDiagPrecond<T>, PrecondError> {
    let matrix = blk.ak().to_dense();
    let factor = dense_cholesky(&matrix)?;
    let schur = exact_schur(blk, b)?;
    Ok(BlockDiagPrecond::new(
        LeadingSolver::Exact { factor, matrix },
        schur,
    ))
}

/// Diagonal approximation: reciprocal diagonal of `A_k` and an exact solve
/// with the materialized `B diag(A_k)⁻¹ Bᵀ`.
pub fn make_diagonal<T: Scalar>(
    blk: &AugmentedBlock<T>,
    b: &SparseMatrix<T>,
) -> Result<BlockDiagPrecond<T>, PrecondError> {
    let diag = blk.ak().diagonal();
    for (i, &d) in diag.iter().enumerate() {
        if d <= T::zero() {
            return Err(PrecondError::NonpositiveDiagonal(i));
        }
    }
    let inv_diag: Vec<T> = diag.iter().map(|&d| T::one() / d).collect();
    let schur = diag_schur(&diag, b)?;
    Ok(BlockDiagPrecond::new(
        LeadingSolver::Diagonal { inv_diag },
        schur,
    ))
}

/// Incomplete Cholesky leading block paired with the diagonal-based Schur
/// solve (deliberately mismatched: the IC factors stay out of the Schur
/// approximation to keep its cost down). Breakdown retries once with a
/// diagonal shift of `1e-8 * max diag`.
pub fn make_ic<T: Scalar>(
    blk: &AugmentedBlock<T>,
    b: &SparseMatrix<T>,
    droptol: T,
) -> Result<BlockDiagPrecond<T>, PrecondError> {
    let ak = blk.ak();
    let factor = match incomplete_cholesky(ak, droptol) {
        Ok(f) => f,
        Err(FactorError::BreakdownPivot(_)) => {
            let maxd = ak
                .diagonal()
                .iter()
                .fold(T::zero(), |acc, &d| acc.max(d.abs()));
            let shifted = ak.add_scaled_identity(cast::<T>(1e-8) * maxd);
            incomplete_cholesky(&shifted, droptol)?
        }
        Err(e) => return Err(e.into()),
    };
    let diag = ak.diagonal();
    for (i, &d) in diag.iter().enumerate() {
        if d <= T::zero() {
            return Err(PrecondError::NonpositiveDiagonal(i));
        }
    }
    let schur = diag_schur(&diag, b)?;
    Ok(BlockDiagPrecond::new(LeadingSolver::Ic { factor }, schur))
}

/// Combines any leading-block approximation with any Schur operator; this is
/// how the WkI and BFBT pairings are assembled.
pub fn make_with_schur<T: Scalar>(
    blk: &AugmentedBlock<T>,
    leading_kind: LeadingKind<T>,
    schur: SchurOperator<T>,
) -> Result<BlockDiagPrecond<T>, PrecondError> {
    assert!(
        schur.dim() <= blk.dim(),
        "Schur block larger than the system"
    );
    let leading = match leading_kind {
        LeadingKind::Exact => {
            let matrix = blk.ak().to_dense();
            let factor = dense_cholesky(&matrix)?;
            LeadingSolver::Exact { factor, matrix }
        }
        LeadingKind::Diagonal => {
            let diag = blk.ak().diagonal();
            for (i, &d) in diag.iter().enumerate() {
                if d <= T::zero() {
                    return Err(PrecondError::NonpositiveDiagonal(i));
                }
            }
            LeadingSolver::Diagonal {
                inv_diag: diag.iter().map(|&d| T::one() / d).collect(),
            }
        }
        LeadingKind::Ic { droptol } => {
            let factor = match incomplete_cholesky(blk.ak(), droptol) {
                Ok(f) => f,
                Err(FactorError::BreakdownPivot(_)) => {
                    let maxd = blk
                        .ak()
                        .diagonal()
                        .iter()
                        .fold(T::zero(), |acc, &d| acc.max(d.abs()));
                    let shifted = blk.ak().add_scaled_identity(cast::<T>(1e-8) * maxd);
                    incomplete_cholesky(&shifted, droptol)?
                }
                Err(e) => return Err(e.into()),
            };
            LeadingSolver::Ic { factor }
        }
        LeadingKind::InnerCg { tol, maxit, split } => {
            let jacobi = BlockJacobi::new(blk.ak(), split)?;
            LeadingSolver::InnerCg {
                ak: blk.ak().clone(),
                jacobi,
                tol,
                maxit,
                breaches: Cell::new(0),
            }
        }
    };
    Ok(BlockDiagPrecond::new(leading, schur))
}
