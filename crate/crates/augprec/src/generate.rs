//! Seeded, deterministic problem generators: random saddle systems with a
//! prescribed leading-block nullity, banded synthetic systems with the
//! geophysics block structure, and LP instances for the interior-point
//! harness.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dense::{mgs_orthonormal_columns, DenseMatrix};
use crate::ipm::QpProblem;
use crate::saddle::{SaddleError, SaddleSystem};
use crate::scalar::{cast, Scalar};
use crate::schur::nullspace_basis;
use crate::sparse::SparseMatrix;

/// Name of the PRNG recorded in experiment metadata.
pub const GENERATOR_NAME: &str = "chacha8";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("could not generate a well-posed system in {0} attempts")]
    GenerationFailure(usize),
    #[error("infeasible generator parameters: {0}")]
    Infeasible(&'static str),
    #[error(transparent)]
    Saddle(#[from] SaddleError),
}

/// What to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    RandomSaddle,
    DegenerateLp,
    BandedGeo,
}

/// Generator parameters; `k` is the leading-block nullity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub kind: GeneratorKind,
    pub bandwidth: usize,
}

impl GeneratorSpec {
    pub fn random_saddle(n: usize, m: usize, k: usize) -> Self {
        Self {
            n,
            m,
            k,
            kind: GeneratorKind::RandomSaddle,
            bandwidth: 0,
        }
    }

    pub fn banded_geo(n: usize, m: usize, bandwidth: usize) -> Self {
        Self {
            n,
            m,
            k: m,
            kind: GeneratorKind::BandedGeo,
            bandwidth,
        }
    }

    pub fn degenerate_lp(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            k: 0,
            kind: GeneratorKind::DegenerateLp,
            bandwidth: 0,
        }
    }

    fn validate(&self) -> Result<(), GenerateError> {
        if !(self.k <= self.m && self.m < self.n) {
            return Err(GenerateError::Infeasible("need k <= m < n"));
        }
        if self.kind == GeneratorKind::BandedGeo
            && (self.bandwidth >= self.n - self.m || self.bandwidth >= self.m || self.bandwidth == 0)
        {
            return Err(GenerateError::Infeasible(
                "banded generator needs 0 < bandwidth < min(m, n - m)",
            ));
        }
        Ok(())
    }
}

fn gaussian<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    // Box-Muller on the unit square
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    cast::<T>((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos())
}

/// Random saddle system with `nullity(A) = k`: `A = Q diag(d) Qᵀ` with `Q`
/// orthonormal from the QR of a seeded Gaussian matrix and `d` holding
/// exactly `k` zeros, the rest log-uniform in `[0.1, 10]`; `B` is a dense
/// seeded Gaussian. Regenerates with a derived seed until the well-posedness
/// certificate passes. Deterministic in `seed`.
pub fn generate_random_saddle<T: Scalar>(
    spec: &GeneratorSpec,
    seed: u64,
) -> Result<SaddleSystem<T>, GenerateError> {
    spec.validate()?;
    let (n, m, k) = (spec.n, spec.m, spec.k);
    const RETRIES: usize = 20;
    for attempt in 0..RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64 * 0x9e37_79b9));
        let g = DenseMatrix::from_fn(n, n, |_, _| gaussian::<T>(&mut rng));
        let q = mgs_orthonormal_columns(&g);
        let mut d = vec![T::zero(); n];
        for v in d.iter_mut().skip(k) {
            let u: f64 = rng.random_range(0.0..1.0);
            *v = cast::<T>(10f64.powf(2.0 * u - 1.0));
        }
        let mut a = DenseMatrix::zeros(n, n);
        for t in 0..n {
            if d[t] == T::zero() {
                continue;
            }
            for i in 0..n {
                let qit = q.get(i, t) * d[t];
                for j in 0..n {
                    let v = a.get(i, j) + qit * q.get(j, t);
                    a.set(i, j, v);
                }
            }
        }
        let b = DenseMatrix::from_fn(m, n, |_, _| gaussian::<T>(&mut rng));
        let sys = SaddleSystem::new(
            SparseMatrix::from_dense(&a.symmetrize()),
            SparseMatrix::from_dense(&b),
        )?;
        let report = sys.check_wellposed();
        if report.is_wellposed() && report.nullity_a == k {
            return Ok(sys);
        }
    }
    Err(GenerateError::GenerationFailure(RETRIES))
}

/// Maximal-nullity system with `range(A)` orthogonal to `range(Bᵀ)`:
/// `A = Z D Zᵀ` over an orthonormal basis `Z` of `ker(B)`. On these systems
/// `A - AVA = 0` and `ABᵀ = 0`, the regime where the BFBT approximation
/// coincides with the additive inverse formula.
pub fn generate_kernel_aligned<T: Scalar>(
    n: usize,
    m: usize,
    seed: u64,
) -> Result<SaddleSystem<T>, GenerateError> {
    if m >= n {
        return Err(GenerateError::Infeasible("need m < n"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bd = DenseMatrix::from_fn(m, n, |_, _| gaussian::<T>(&mut rng));
    let b = SparseMatrix::from_dense(&bd);
    let basis =
        nullspace_basis(&b).map_err(|_| GenerateError::Infeasible("generated B rank deficient"))?;
    let z = basis.z();
    let mut a = DenseMatrix::zeros(n, n);
    for t in 0..n - m {
        let u: f64 = rng.random_range(0.0..1.0);
        let d = cast::<T>(10f64.powf(2.0 * u - 1.0));
        for i in 0..n {
            let zit = z.get(i, t) * d;
            for j in 0..n {
                let v = a.get(i, j) + zit * z.get(j, t);
                a.set(i, j, v);
            }
        }
    }
    Ok(SaddleSystem::new(
        SparseMatrix::from_dense(&a.symmetrize()),
        b,
    )?)
}

/// Maximal-nullity system in which every kernel operation is exact in
/// floating point: `A` is diagonal with power-of-two entries and `m` zeros,
/// and each row of `B` is a single signed power of two on one of the zero
/// positions. The exact Schur complement of the fully augmented block is the
/// identity, bit for bit.
pub fn generate_dyadic_maximal<T: Scalar>(n: usize, m: usize, seed: u64) -> SaddleSystem<T> {
    assert!(m < n, "need m < n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = (0..n).collect();
    // Fisher-Yates with the seeded stream
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        positions.swap(i, j);
    }
    let zero_pos = &positions[..m];
    let mut diag = vec![T::zero(); n];
    for (i, d) in diag.iter_mut().enumerate() {
        if zero_pos.contains(&i) {
            continue;
        }
        let e: i32 = rng.random_range(-2..=3);
        *d = cast::<T>(2f64.powi(e));
    }
    let a = SparseMatrix::from_diagonal(&diag);
    let mut trip = Vec::new();
    for (row, &col) in zero_pos.iter().enumerate() {
        let e: i32 = rng.random_range(-1..=2);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        trip.push((row, col, cast::<T>(sign * 2f64.powi(e))));
    }
    let b = SparseMatrix::from_triplets(m, n, &trip).unwrap();
    SaddleSystem::new(a, b).expect("dyadic construction is well posed")
}

/// Synthetic stand-in for the geophysics structure: `B = [T | E]` with `T`
/// lower-banded and `E` rectangular-diagonal, `A = blockdiag(0, M₂)` with a
/// tridiagonal SPD `M₂`. Consequences: `BBᵀ` is banded with bandwidth at
/// most `spec.bandwidth`, `A` has maximal nullity, and the fully augmented
/// `A + BᵀB` has banded `(1,1)` (size `m`) and `(2,2)` (size `n - m`)
/// diagonal blocks, which is what the block-Jacobi inner solver exploits.
pub fn generate_banded_geo<T: Scalar>(
    spec: &GeneratorSpec,
    seed: u64,
) -> Result<SaddleSystem<T>, GenerateError> {
    spec.validate()?;
    let (n, m, bw) = (spec.n, spec.m, spec.bandwidth);
    let p = n - m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // T: lower-triangular, lower bandwidth bw, dominant positive diagonal
    let mut trip_b: Vec<(usize, usize, T)> = Vec::new();
    for i in 0..m {
        trip_b.push((i, i, cast::<T>(rng.random_range(1.0..2.0))));
        for off in 1..=bw.min(i) {
            let v: f64 = rng.random_range(-0.4..0.4);
            if v.abs() > 0.05 {
                trip_b.push((i, i - off, cast::<T>(v)));
            }
        }
    }
    // E: rectangular diagonal coupling into the second block
    for i in 0..m.min(p) {
        trip_b.push((i, m + i, cast::<T>(rng.random_range(0.15..0.35))));
    }
    let b = SparseMatrix::from_triplets(m, n, &trip_b).unwrap();

    // A = blockdiag(0_m, M2), M2 tridiagonal SPD
    let mut trip_a: Vec<(usize, usize, T)> = Vec::new();
    for i in 0..p {
        trip_a.push((m + i, m + i, cast::<T>(rng.random_range(2.0..3.0))));
        if i + 1 < p {
            let v = cast::<T>(-1.0);
            trip_a.push((m + i, m + i + 1, v));
            trip_a.push((m + i + 1, m + i, v));
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &trip_a).unwrap();
    Ok(SaddleSystem::new(a, b)?)
}

/// Seeded LP with strictly feasible primal and dual points (bounded optimum
/// guaranteed). With `degenerate` a block of duplicated columns is appended,
/// producing a degenerate optimal face and numerically singular late-stage
/// KKT leading blocks.
pub fn generate_lp<T: Scalar>(n: usize, m: usize, seed: u64, degenerate: bool) -> QpProblem<T> {
    assert!(m < n, "need m < n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jd = DenseMatrix::from_fn(m, n, |_, _| gaussian::<T>(&mut rng));
    let x_int: Vec<T> = (0..n)
        .map(|_| cast::<T>(rng.random_range(0.5..2.0)))
        .collect();
    let y: Vec<T> = (0..m)
        .map(|_| cast::<T>(rng.random_range(-1.0..1.0)))
        .collect();
    let z: Vec<T> = (0..n)
        .map(|_| cast::<T>(rng.random_range(0.1..1.0)))
        .collect();

    if degenerate {
        // duplicate a block of columns (and matching objective entries)
        let dup = (n / 5).max(2).min(n - 1);
        for t in 0..dup {
            let src = t;
            let dst = n - dup + t;
            for i in 0..m {
                jd.set(i, dst, jd.get(i, src));
            }
        }
    }
    let j = SparseMatrix::from_dense(&jd);
    let b = j.spmv(&x_int);
    let jty = j.spmv_transpose(&y);
    let mut c: Vec<T> = jty.iter().zip(&z).map(|(&a, &s)| a + s).collect();
    if degenerate {
        let dup = (n / 5).max(2).min(n - 1);
        for t in 0..dup {
            c[n - dup + t] = c[t];
        }
    }
    QpProblem::lp(j, b, c)
}

/// Seeded convex QP with a singular PSD Hessian (`H = DᵀD`, `D` short and
/// wide) plus the same feasibility construction as [`generate_lp`].
pub fn generate_qp<T: Scalar>(n: usize, m: usize, seed: u64) -> QpProblem<T> {
    assert!(m < n, "need m < n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = (n / 2).max(1);
    let d = DenseMatrix::from_fn(rank, n, |_, _| {
        let v = gaussian::<T>(&mut rng);
        v * cast::<T>(0.4)
    });
    let h = SparseMatrix::from_dense(&d.transpose().matmul(&d));
    let jd = DenseMatrix::from_fn(m, n, |_, _| gaussian::<T>(&mut rng));
    let j = SparseMatrix::from_dense(&jd);
    let x_int: Vec<T> = (0..n)
        .map(|_| cast::<T>(rng.random_range(0.5..2.0)))
        .collect();
    let y: Vec<T> = (0..m)
        .map(|_| cast::<T>(rng.random_range(-1.0..1.0)))
        .collect();
    let z: Vec<T> = (0..n)
        .map(|_| cast::<T>(rng.random_range(0.1..1.0)))
        .collect();
    let b = j.spmv(&x_int);
    // dual feasibility J'y + z - Hx = c at the chosen interior point
    let jty = j.spmv_transpose(&y);
    let hx = h.spmv(&x_int);
    let c: Vec<T> = (0..n).map(|i| jty[i] + z[i] - hx[i]).collect();
    QpProblem::new(h, j, b, c)
}
