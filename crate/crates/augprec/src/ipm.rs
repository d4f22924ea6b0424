//! Mehrotra predictor-corrector interior-point method for LPs and QPs in
//! standard form. Each iteration solves one KKT saddle-point system twice
//! (predictor and corrector share the matrix and the preconditioner), either
//! directly or with preconditioned MINRES under the augmentation policy:
//! while the leading block `H + X⁻¹Z` is numerically nonsingular the plain
//! block-diagonal preconditioner is used (exact diagonal solve for LPs,
//! incomplete Cholesky for QPs); once it turns numerically singular the
//! leading block is partially augmented and approximated by its diagonal.

use thiserror::Error;

use crate::augment::{augment_spd, select_weight_rows, AugmentError, WeightSelection};
use crate::dense::{jacobi_eigen, lu_factor, DenseError};
use crate::krylov::{minres, SolveReport};
use crate::precond::{make_diagonal, make_ic, PrecondError};
use crate::saddle::{BlockVector, SaddleError, SaddleSystem};
use crate::scalar::{cast, Scalar};
use crate::sparse::SparseMatrix;

/// Mehrotra constants: fraction-to-boundary factor and the iteration limit.
pub const BOUNDARY_FACTOR: f64 = 0.995;
pub const ITERATION_LIMIT: usize = 100;
/// Iteration cap for one inner MINRES solve.
pub const INNER_MAXIT: usize = 500;
/// ICT drop tolerance used for QP leading blocks.
pub const QP_IC_DROPTOL: f64 = 0.01;

#[derive(Debug, Error)]
pub enum IpmError<T> {
    #[error("x has a nonpositive entry at {0}; the iterate left the interior")]
    NonpositiveEntry(usize),
    #[error("iteration limit {limit} reached with duality gap {gap}")]
    IterationLimit {
        limit: usize,
        gap: f64,
        trace: IpmTrace<T>,
    },
    #[error("cannot build an interior starting point: {0}")]
    InfeasibleStart(String),
    #[error(transparent)]
    Saddle(#[from] SaddleError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Dense(#[from] DenseError),
}

/// Convex QP in standard form: `min cᵀx + ½xᵀHx` s.t. `Jx = b`, `x >= 0`.
/// `H = 0` gives an LP.
#[derive(Debug, Clone)]
pub struct QpProblem<T> {
    pub h: SparseMatrix<T>,
    pub j: SparseMatrix<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> QpProblem<T> {
    pub fn new(h: SparseMatrix<T>, j: SparseMatrix<T>, b: Vec<T>, c: Vec<T>) -> Self {
        assert_eq!(h.nrows(), h.ncols(), "H must be square");
        assert_eq!(h.nrows(), j.ncols(), "H and J disagree on n");
        assert_eq!(b.len(), j.nrows(), "b length must match rows of J");
        assert_eq!(c.len(), j.ncols(), "c length must match columns of J");
        Self { h, j, b, c }
    }

    pub fn lp(j: SparseMatrix<T>, b: Vec<T>, c: Vec<T>) -> Self {
        let n = j.ncols();
        Self::new(SparseMatrix::zeros(n, n), j, b, c)
    }

    pub fn n(&self) -> usize {
        self.j.ncols()
    }

    pub fn m(&self) -> usize {
        self.j.nrows()
    }

    pub fn is_lp(&self) -> bool {
        self.h.nnz() == 0
    }
}

/// Primal-dual iterate; `x` and `z` stay strictly positive.
#[derive(Debug, Clone)]
pub struct IpmState<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
    /// Duality measure `xᵀz / n`.
    pub tau: T,
    pub iteration: usize,
}

/// How the KKT systems are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolve {
    Direct,
    Minres,
}

/// Summary of one inner iterative solve.
#[derive(Debug, Clone)]
pub struct InnerSummary<T> {
    pub iterations: usize,
    pub converged: bool,
    pub true_residual: T,
}

impl<T: Scalar> InnerSummary<T> {
    fn from_report(rep: &SolveReport<BlockVector<T>, T>) -> Self {
        Self {
            iterations: rep.iterations,
            converged: rep.converged,
            true_residual: rep.true_residual,
        }
    }
}

/// Per-iteration inner-solve record.
#[derive(Debug, Clone)]
pub enum InnerRecord<T> {
    Direct,
    Minres {
        predictor: InnerSummary<T>,
        corrector: InnerSummary<T>,
        /// True when the augmentation policy was active for this iteration.
        augmented: bool,
    },
}

/// One row of the IPM trace.
#[derive(Debug, Clone)]
pub struct IterRecord<T> {
    pub duality_gap: T,
    pub leading_singular: bool,
    pub inner: InnerRecord<T>,
    pub step_lengths: (T, T),
}

/// Full per-iteration history of a run.
#[derive(Debug, Clone)]
pub struct IpmTrace<T> {
    pub records: Vec<IterRecord<T>>,
}

impl<T> Default for IpmTrace<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
        }
    }
}

impl<T: Scalar> IpmTrace<T> {
    /// Count of iterations where any inner MINRES solve missed its tolerance.
    pub fn inner_failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| match &r.inner {
                InnerRecord::Minres {
                    predictor,
                    corrector,
                    ..
                } => !predictor.converged || !corrector.converged,
                InnerRecord::Direct => false,
            })
            .count()
    }

    pub fn any_augmented(&self) -> bool {
        self.records.iter().any(|r| {
            matches!(
                r.inner,
                InnerRecord::Minres {
                    augmented: true,
                    ..
                }
            ) || (r.leading_singular && matches!(r.inner, InnerRecord::Direct))
        })
    }

    pub fn any_singular(&self) -> bool {
        self.records.iter().any(|r| r.leading_singular)
    }
}

/// Final iterate and convergence data.
#[derive(Debug, Clone)]
pub struct IpmSolution<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
    pub duality_gap: T,
    pub objective: T,
    pub iterations: usize,
}

/// Assembles the KKT saddle system `[[H + X⁻¹Z, Jᵀ], [J, 0]]`.
pub fn build_kkt<T: Scalar>(
    prob: &QpProblem<T>,
    state: &IpmState<T>,
) -> Result<SaddleSystem<T>, IpmError<T>> {
    for (i, &xi) in state.x.iter().enumerate() {
        if xi <= T::zero() {
            return Err(IpmError::NonpositiveEntry(i));
        }
    }
    let diag: Vec<T> = state
        .x
        .iter()
        .zip(&state.z)
        .map(|(&x, &z)| z / x)
        .collect();
    let mut trip: Vec<(usize, usize, T)> = Vec::with_capacity(prob.h.nnz() + diag.len());
    for i in 0..prob.h.nrows() {
        for (j, v) in prob.h.row(i) {
            trip.push((i, j, v));
        }
    }
    for (i, &d) in diag.iter().enumerate() {
        trip.push((i, i, d));
    }
    let a = SparseMatrix::from_triplets(prob.n(), prob.n(), &trip).expect("triplets in range");
    Ok(SaddleSystem::new(a, prob.j.clone())?)
}

/// Numerical-singularity test for the leading block: smallest eigenvalue
/// below `n * eps * max diag`.
pub fn detect_singular_leading<T: Scalar>(a: &SparseMatrix<T>) -> bool {
    let n = a.nrows();
    if n == 0 {
        return false;
    }
    let (evals, _) = jacobi_eigen(&a.to_dense());
    let max_diag = a
        .diagonal()
        .iter()
        .fold(T::zero(), |acc, &d| acc.max(d.abs()));
    let threshold = T::from_usize(n).unwrap() * T::epsilon() * max_diag;
    evals[0] < threshold
}

fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Least-squares starting point with `x` and `z` clamped to at least one.
fn initial_state<T: Scalar>(prob: &QpProblem<T>) -> Result<IpmState<T>, IpmError<T>> {
    let n = prob.n();
    // JJᵀ Cholesky for the two least-squares solves
    let jd = prob.j.to_dense();
    let jjt = jd.matmul(&jd.transpose()).symmetrize();
    let factor = crate::chol::dense_cholesky(&jjt)
        .map_err(|_| IpmError::InfeasibleStart("J is rank deficient".into()))?;

    // x = Jᵀ (JJᵀ)⁻¹ b: minimum-norm solution of Jx = b
    let t = factor.solve(&prob.b);
    let x_ls = prob.j.spmv_transpose(&t);
    // y = (JJᵀ)⁻¹ J (c + H x): least-squares dual, z = c + Hx - Jᵀy
    let hx = prob.h.spmv(&x_ls);
    let rhs: Vec<T> = prob.c.iter().zip(&hx).map(|(&c, &h)| c + h).collect();
    let jt = prob.j.spmv(&rhs);
    let y = factor.solve(&jt);
    let jty = prob.j.spmv_transpose(&y);
    let z_ls: Vec<T> = rhs.iter().zip(&jty).map(|(&r, &v)| r - v).collect();

    let one = T::one();
    let x: Vec<T> = x_ls.iter().map(|&v| v.max(one)).collect();
    let z: Vec<T> = z_ls.iter().map(|&v| v.max(one)).collect();
    let tau = x.iter().zip(&z).map(|(&a, &b)| a * b).sum::<T>() / T::from_usize(n).unwrap();
    Ok(IpmState {
        x,
        y,
        z,
        tau,
        iteration: 0,
    })
}

fn step_to_boundary<T: Scalar>(v: &[T], dv: &[T]) -> T {
    let mut alpha = T::infinity();
    for (&vi, &di) in v.iter().zip(dv) {
        if di < T::zero() {
            alpha = alpha.min(-vi / di);
        }
    }
    alpha
}

struct KktSolver<T> {
    sys: SaddleSystem<T>,
    inner: InnerImp<T>,
    leading_singular: bool,
    augmented: bool,
}

enum InnerImp<T> {
    Direct(crate::dense::LuFactor<T>),
    Minres {
        precond: crate::precond::BlockDiagPrecond<T>,
        tol: T,
    },
}

impl<T: Scalar> KktSolver<T> {
    fn build(
        prob: &QpProblem<T>,
        state: &IpmState<T>,
        inner: InnerSolve,
        inner_tol: T,
    ) -> Result<Self, IpmError<T>> {
        let sys = build_kkt(prob, state)?;
        let leading_singular = detect_singular_leading(sys.a());
        match inner {
            InnerSolve::Direct => {
                let lu = lu_factor(&sys.assemble_dense())?;
                Ok(Self {
                    sys,
                    inner: InnerImp::Direct(lu),
                    leading_singular,
                    augmented: false,
                })
            }
            InnerSolve::Minres => {
                let (precond, augmented) = if leading_singular {
                    // augmentation policy: partial selection, diagonal blocks
                    let sel = select_weight_rows(sys.a(), sys.b())?;
                    let blk = augment_spd(sys.a(), sys.b(), &sel)?;
                    (make_diagonal(&blk, sys.b())?, true)
                } else {
                    let sel = WeightSelection::partial(vec![]);
                    let blk = augment_spd(sys.a(), sys.b(), &sel)?;
                    let p = if prob.is_lp() {
                        // the LP leading block is diagonal, so the diagonal
                        // solve is the exact ideal preconditioner
                        make_diagonal(&blk, sys.b())?
                    } else {
                        make_ic(&blk, sys.b(), cast::<T>(QP_IC_DROPTOL))?
                    };
                    (p, false)
                };
                Ok(Self {
                    sys,
                    inner: InnerImp::Minres {
                        precond,
                        tol: inner_tol,
                    },
                    leading_singular,
                    augmented,
                })
            }
        }
    }

    fn solve(&self, rhs: &BlockVector<T>) -> (BlockVector<T>, Option<InnerSummary<T>>) {
        match &self.inner {
            InnerImp::Direct(lu) => {
                let x = lu.solve(&rhs.to_flat());
                (BlockVector::from_flat(&x, self.sys.n()), None)
            }
            InnerImp::Minres { precond, tol } => {
                let rep = minres(
                    |v: &BlockVector<T>| self.sys.apply_k(v),
                    precond,
                    rhs,
                    *tol,
                    INNER_MAXIT,
                );
                let summary = InnerSummary::from_report(&rep);
                (rep.solution, Some(summary))
            }
        }
    }
}

/// Runs the Mehrotra predictor-corrector loop to the duality-gap tolerance.
///
/// The centering parameter is `sigma = (gap_aff / gap)³` and steps use the
/// 0.995 fraction-to-boundary rule. Inner-solve failures are recorded in the
/// trace and the iteration continues with the best iterate available.
pub fn mehrotra_solve<T: Scalar>(
    prob: &QpProblem<T>,
    inner: InnerSolve,
    gap_tol: T,
    inner_tol: T,
) -> Result<(IpmSolution<T>, IpmTrace<T>), IpmError<T>> {
    mehrotra_driver(prob, inner, gap_tol, inner_tol, &mut |_, _| {})
}

/// Runs the direct-inner loop and returns the first KKT system whose leading
/// block is numerically singular (how the experiment matrices are picked),
/// falling back to the last system generated when none turns singular.
pub fn first_singular_kkt<T: Scalar>(
    prob: &QpProblem<T>,
    gap_tol: T,
) -> Result<SaddleSystem<T>, IpmError<T>> {
    let mut singular: Option<SaddleSystem<T>> = None;
    let mut last: Option<SaddleSystem<T>> = None;
    let result = mehrotra_driver(prob, InnerSolve::Direct, gap_tol, cast::<T>(1e-7), &mut |sys,
           is_singular| {
        if is_singular && singular.is_none() {
            singular = Some(sys.clone());
        }
        last = Some(sys.clone());
    });
    match result {
        Ok(_) | Err(IpmError::IterationLimit { .. }) => singular
            .or(last)
            .ok_or_else(|| IpmError::InfeasibleStart("no KKT system was generated".into())),
        Err(e) => Err(e),
    }
}

fn mehrotra_driver<T: Scalar>(
    prob: &QpProblem<T>,
    inner: InnerSolve,
    gap_tol: T,
    inner_tol: T,
    observer: &mut dyn FnMut(&SaddleSystem<T>, bool),
) -> Result<(IpmSolution<T>, IpmTrace<T>), IpmError<T>> {
    let n = prob.n();
    let nf = T::from_usize(n).unwrap();
    let boundary = cast::<T>(BOUNDARY_FACTOR);
    let mut state = initial_state(prob)?;
    let mut trace = IpmTrace::default();

    let b_scale = T::one() + norm2(&prob.b);
    let c_scale = T::one() + norm2(&prob.c);

    for iteration in 1..=ITERATION_LIMIT {
        state.iteration = iteration;
        let mu = state
            .x
            .iter()
            .zip(&state.z)
            .map(|(&a, &b)| a * b)
            .sum::<T>()
            / nf;
        state.tau = mu;

        // residuals r_p = Jx - b, r_d = Jᵀy + z - Hx - c
        let jx = prob.j.spmv(&state.x);
        let r_p: Vec<T> = jx.iter().zip(&prob.b).map(|(&a, &b)| a - b).collect();
        let jty = prob.j.spmv_transpose(&state.y);
        let hx = prob.h.spmv(&state.x);
        let r_d: Vec<T> = (0..n)
            .map(|i| jty[i] + state.z[i] - hx[i] - prob.c[i])
            .collect();

        if mu <= gap_tol
            && norm2(&r_p) / b_scale <= gap_tol
            && norm2(&r_d) / c_scale <= gap_tol
        {
            let objective = state
                .x
                .iter()
                .zip(&prob.c)
                .map(|(&x, &c)| x * c)
                .sum::<T>()
                + cast::<T>(0.5)
                    * state
                        .x
                        .iter()
                        .zip(&prob.h.spmv(&state.x))
                        .map(|(&x, &hx)| x * hx)
                        .sum::<T>();
            return Ok((
                IpmSolution {
                    x: state.x,
                    y: state.y,
                    z: state.z,
                    duality_gap: mu,
                    objective,
                    iterations: iteration - 1,
                },
                trace,
            ));
        }

        let solver = KktSolver::build(prob, &state, inner, inner_tol)?;
        observer(&solver.sys, solver.leading_singular);

        // predictor: affine scaling direction
        let rc_aff: Vec<T> = state
            .x
            .iter()
            .zip(&state.z)
            .map(|(&x, &z)| -(x * z))
            .collect();
        let rhs_aff = kkt_rhs(&state, &r_p, &r_d, &rc_aff);
        let (dir_aff, rep_aff) = solver.solve(&rhs_aff);
        let (dx_aff, dz_aff) = recover_dz(&state, &dir_aff, &rc_aff);

        let alpha_aff_p = step_to_boundary(&state.x, &dx_aff).min(T::one());
        let alpha_aff_d = step_to_boundary(&state.z, &dz_aff).min(T::one());
        let mu_aff = (0..n)
            .map(|i| {
                (state.x[i] + alpha_aff_p * dx_aff[i]) * (state.z[i] + alpha_aff_d * dz_aff[i])
            })
            .sum::<T>()
            / nf;
        let ratio = (mu_aff / mu).max(T::zero());
        let sigma = ratio * ratio * ratio;

        // corrector: centering plus second-order correction, same matrix
        let rc: Vec<T> = (0..n)
            .map(|i| -(state.x[i] * state.z[i]) + sigma * mu - dx_aff[i] * dz_aff[i])
            .collect();
        let rhs_cor = kkt_rhs(&state, &r_p, &r_d, &rc);
        let (dir, rep_cor) = solver.solve(&rhs_cor);
        let (dx, dz) = recover_dz(&state, &dir, &rc);
        let dy: Vec<T> = dir.bottom.iter().map(|&v| -v).collect();

        let alpha_p = (boundary * step_to_boundary(&state.x, &dx)).min(T::one());
        let alpha_d = (boundary * step_to_boundary(&state.z, &dz)).min(T::one());

        for i in 0..n {
            state.x[i] += alpha_p * dx[i];
            state.z[i] += alpha_d * dz[i];
        }
        for (yi, &di) in state.y.iter_mut().zip(&dy) {
            *yi += alpha_d * di;
        }
        debug_assert!(state.x.iter().all(|&v| v > T::zero()));
        debug_assert!(state.z.iter().all(|&v| v > T::zero()));

        trace.records.push(IterRecord {
            duality_gap: mu,
            leading_singular: solver.leading_singular,
            inner: match (rep_aff, rep_cor) {
                (Some(p), Some(c)) => InnerRecord::Minres {
                    predictor: p,
                    corrector: c,
                    augmented: solver.augmented,
                },
                _ => InnerRecord::Direct,
            },
            step_lengths: (alpha_p, alpha_d),
        });
    }

    let gap = state.tau.to_f64().unwrap_or(f64::NAN);
    Err(IpmError::IterationLimit {
        limit: ITERATION_LIMIT,
        gap,
        trace,
    })
}

/// Saddle right-hand side `(r_d + X⁻¹ rc, b - Jx) = (r_d + X⁻¹ rc, -r_p)`.
fn kkt_rhs<T: Scalar>(state: &IpmState<T>, r_p: &[T], r_d: &[T], rc: &[T]) -> BlockVector<T> {
    let top: Vec<T> = (0..state.x.len())
        .map(|i| r_d[i] + rc[i] / state.x[i])
        .collect();
    let bottom: Vec<T> = r_p.iter().map(|&v| -v).collect();
    BlockVector::new(top, bottom)
}

/// Recovers `dz = X⁻¹(rc - Z dx)` from the saddle solution.
fn recover_dz<T: Scalar>(
    state: &IpmState<T>,
    dir: &BlockVector<T>,
    rc: &[T],
) -> (Vec<T>, Vec<T>) {
    let dx = dir.top.clone();
    let dz: Vec<T> = (0..dx.len())
        .map(|i| (rc[i] - state.z[i] * dx[i]) / state.x[i])
        .collect();
    (dx, dz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn trivial_lp() -> QpProblem<f64> {
        // min x1 + x2  s.t.  x1 = 1, x >= 0: optimum (1, 0)
        let j = SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap();
        QpProblem::lp(j, vec![1.0], vec![1.0, 1.0])
    }

    #[test]
    fn build_kkt_unit_state() {
        let prob = trivial_lp();
        let state = IpmState {
            x: vec![1.0, 1.0],
            y: vec![0.0],
            z: vec![1.0, 1.0],
            tau: 1.0,
            iteration: 0,
        };
        let sys = build_kkt(&prob, &state).unwrap();
        assert_eq!(sys.a(), &SparseMatrix::identity(2));
    }

    #[test]
    fn build_kkt_ratio_diagonal() {
        let prob = trivial_lp();
        let state = IpmState {
            x: vec![1.0, 2.0],
            y: vec![0.0],
            z: vec![2.0, 2.0],
            tau: 1.0,
            iteration: 0,
        };
        let sys = build_kkt(&prob, &state).unwrap();
        assert_eq!(sys.a(), &SparseMatrix::from_diagonal(&[2.0, 1.0]));
    }

    #[test]
    fn build_kkt_matches_dense_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let m = 2;
        let d = crate::dense::DenseMatrix::from_fn(3, n, |_, _| rng.random_range(-1.0f64..1.0));
        let h = SparseMatrix::from_dense(&d.transpose().matmul(&d));
        let j = SparseMatrix::from_dense(&crate::dense::DenseMatrix::from_fn(m, n, |_, _| {
            rng.random_range(-1.0..1.0)
        }));
        let prob = QpProblem::new(h.clone(), j, vec![0.0; m], vec![0.0; n]);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let state = IpmState {
            x: x.clone(),
            y: vec![0.0; m],
            z: z.clone(),
            tau: 1.0,
            iteration: 0,
        };
        let sys = build_kkt(&prob, &state).unwrap();
        for i in 0..n {
            for jc in 0..n {
                let want = h.get(i, jc) + if i == jc { z[i] / x[i] } else { 0.0 };
                assert!((sys.a().get(i, jc) - want).abs() <= 1e-14 * want.abs().max(1.0));
            }
        }
        assert!(sys.check_wellposed().b_full_rank);
    }

    #[test]
    fn build_kkt_rejects_nonpositive_x() {
        let prob = trivial_lp();
        let state = IpmState {
            x: vec![1.0, 0.0],
            y: vec![0.0],
            z: vec![1.0, 1.0],
            tau: 1.0,
            iteration: 0,
        };
        assert!(matches!(
            build_kkt(&prob, &state),
            Err(IpmError::NonpositiveEntry(1))
        ));
    }

    #[test]
    fn detect_singular_identity_false() {
        assert!(!detect_singular_leading(&SparseMatrix::<f64>::identity(4)));
    }

    #[test]
    fn detect_singular_tiny_entry_true() {
        let a = SparseMatrix::from_diagonal(&[1.0, 1e-18]);
        assert!(detect_singular_leading(&a));
    }

    #[test]
    fn trivial_lp_solves_to_optimum() {
        let prob = trivial_lp();
        let (sol, _) = mehrotra_solve(&prob, InnerSolve::Direct, 1e-8, 1e-7).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-6);
        assert!(sol.x[1] < 1e-6);
        assert!(sol.duality_gap <= 1e-8);
    }

    #[test]
    fn interior_preserved_and_gap_descends() {
        let prob = trivial_lp();
        let (sol, trace) = mehrotra_solve(&prob, InnerSolve::Direct, 1e-8, 1e-7).unwrap();
        assert!(sol.x.iter().all(|&v| v > 0.0));
        assert!(sol.z.iter().all(|&v| v > 0.0));
        // monotone-ish descent over 3-iteration windows
        let gaps: Vec<f64> = trace.records.iter().map(|r| r.duality_gap).collect();
        for w in gaps.windows(4) {
            assert!(w[3] <= w[0], "gap rose over a 3-iteration window: {:?}", w);
        }
    }

    #[test]
    fn minres_inner_agrees_with_direct() {
        let prob = crate::generate::generate_lp::<f64>(12, 4, 99, false);
        let (sol_d, _) = mehrotra_solve(&prob, InnerSolve::Direct, 1e-8, 1e-7).unwrap();
        let (sol_m, trace) = mehrotra_solve(&prob, InnerSolve::Minres, 1e-8, 1e-7).unwrap();
        assert!((sol_d.objective - sol_m.objective).abs() <= 1e-5 * sol_d.objective.abs().max(1.0));
        assert!(sol_m.iterations >= sol_d.iterations);
        assert!(!trace.records.is_empty());
    }

    #[test]
    fn degenerate_lp_hits_singular_leading() {
        let prob = crate::generate::generate_lp::<f64>(12, 4, 7, true);
        let (_, trace) = mehrotra_solve(&prob, InnerSolve::Minres, 1e-7, 1e-7).unwrap();
        assert!(trace.any_singular(), "no singular leading block detected");
        assert!(trace.any_augmented(), "augmentation policy never activated");
    }
}
