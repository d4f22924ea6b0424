//! Augmentation-based block-diagonal preconditioning for symmetric
//! saddle-point systems with singular leading blocks.
//!
//! The crate bundles:
//!
//! - sparse CSR kernels plus desk-scale dense factorizations and eigensolvers,
//! - weight-matrix selection by structural rank and the augmented leading
//!   block `A_k = A + BᵀW_kB`,
//! - exact and approximate Schur-complement operators (WkI, BFBT, the
//!   additive inverse formula),
//! - block-diagonal SPD preconditioners and the Krylov solvers that use them
//!   (MINRES, PCG, FGMRES),
//! - a Mehrotra predictor-corrector interior-point method whose KKT systems
//!   exercise the preconditioners on increasingly singular leading blocks,
//! - a spectral verification engine for the eigenvalue structure of the
//!   preconditioned operators, and
//! - seeded problem generators, Matrix Market I/O and an experiment runner.
//!
//! All numerical kernels are generic over the scalar type (`f32` or `f64`)
//! through [`scalar::Scalar`]; the aliases below fix `f64`, which is what the
//! command-line harness uses.

pub mod analysis;
pub mod augment;
pub mod chol;
pub mod dense;
pub mod experiment;
pub mod generate;
pub mod ipm;
pub mod krylov;
pub mod mm;
pub mod precond;
pub mod saddle;
pub mod scalar;
pub mod schur;
pub mod sparse;

pub use scalar::Scalar;

/// Default scalar for the harness and CLI.
pub type Real = f64;

pub type SparseMatrixF64 = sparse::SparseMatrix<f64>;
pub type DenseMatrixF64 = dense::DenseMatrix<f64>;
pub type SaddleSystemF64 = saddle::SaddleSystem<f64>;
pub type BlockVectorF64 = saddle::BlockVector<f64>;
pub type WeightSelectionF64 = augment::WeightSelection<f64>;
pub type AugmentedBlockF64 = augment::AugmentedBlock<f64>;
pub type SchurOperatorF64 = schur::SchurOperator<f64>;
pub type BlockDiagPrecondF64 = precond::BlockDiagPrecond<f64>;
pub type QpProblemF64 = ipm::QpProblem<f64>;
