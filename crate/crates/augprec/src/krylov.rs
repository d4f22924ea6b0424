//! Iterative solvers: preconditioned MINRES for the symmetric saddle
//! systems, PCG for SPD inner solves, and FGMRES(restart) when the
//! preconditioner action varies between iterations (inner CG solves).
//!
//! All solvers start from the zero initial guess and record the per-step
//! recurrence residual estimates; the true residual is recomputed at exit so
//! a drifting recurrence cannot fake convergence.

use std::time::Instant;

use thiserror::Error;

use crate::precond::BlockDiagPrecond;
use crate::saddle::BlockVector;
use crate::scalar::{cast, Scalar};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KrylovError {
    #[error("operator is not positive definite (p'Mp <= 0 at iteration {0})")]
    IndefiniteOperator(usize),
}

/// Outcome of an iterative solve.
///
/// Both residual conventions are recorded: `true_residual` is the
/// recomputed 2-norm `||b - K x|| / ||b||`, and `metric_residual` is the
/// recomputed residual in the norm the solver actually minimizes (the
/// `M⁻¹`-norm for preconditioned MINRES; the 2-norm for PCG and FGMRES).
/// `converged` keys on `metric_residual` with a 10x slack over `tol`, so a
/// drifting recurrence cannot fake convergence.
#[derive(Debug, Clone)]
pub struct SolveReport<S, T> {
    pub solution: S,
    pub iterations: usize,
    /// Recurrence estimates of the relative residual, one entry per
    /// iteration plus the initial value.
    pub relative_residuals: Vec<T>,
    /// True relative residual `||b - K x|| / ||b||` recomputed at exit.
    pub true_residual: T,
    /// Recomputed relative residual in the solver's own convergence norm.
    pub metric_residual: T,
    pub converged: bool,
    pub seconds: f64,
}

impl<S, T: Scalar> SolveReport<S, T> {
    fn map<S2>(self, f: impl FnOnce(S) -> S2) -> SolveReport<S2, T> {
        SolveReport {
            solution: f(self.solution),
            iterations: self.iterations,
            relative_residuals: self.relative_residuals,
            true_residual: self.true_residual,
            metric_residual: self.metric_residual,
            converged: self.converged,
            seconds: self.seconds,
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Preconditioned MINRES on the flattened saddle system.
///
/// `apply_k` must be symmetric and the preconditioner SPD and non-flexible.
/// Stops on the preconditioned residual-norm estimate; `converged` reflects
/// the recomputed true residual with the 10x slack backstop.
pub fn minres<T, F>(
    apply_k: F,
    p: &BlockDiagPrecond<T>,
    b: &BlockVector<T>,
    tol: T,
    maxit: usize,
) -> SolveReport<BlockVector<T>, T>
where
    T: Scalar,
    F: Fn(&BlockVector<T>) -> BlockVector<T>,
{
    assert!(
        !p.flexible(),
        "MINRES requires a fixed preconditioner; use FGMRES for inner-CG leading solvers"
    );
    let n = b.top.len();
    let flat_b = b.to_flat();
    let apply = |v: &[T]| apply_k(&BlockVector::from_flat(v, n)).to_flat();
    let prec = |v: &[T]| p.apply_inverse(&BlockVector::from_flat(v, n)).to_flat();
    minres_flat(&apply, &prec, &flat_b, tol, maxit).map(|x| BlockVector::from_flat(&x, n))
}

fn minres_flat<T: Scalar>(
    apply: &dyn Fn(&[T]) -> Vec<T>,
    prec: &dyn Fn(&[T]) -> Vec<T>,
    b: &[T],
    tol: T,
    maxit: usize,
) -> SolveReport<Vec<T>, T> {
    let start = Instant::now();
    let size = b.len();
    let b_norm = norm2(b);
    let mut x = vec![T::zero(); size];

    if b_norm == T::zero() {
        return SolveReport {
            solution: x,
            iterations: 0,
            relative_residuals: vec![T::zero()],
            true_residual: T::zero(),
            metric_residual: T::zero(),
            converged: true,
            seconds: start.elapsed().as_secs_f64(),
        };
    }

    let mut v_old = vec![T::zero(); size];
    let mut v = b.to_vec();
    let mut z = prec(&v);
    let gamma_init = dot(&z, &v).max(T::zero()).sqrt();
    let mut gamma = gamma_init;
    let mut gamma_old = T::one();
    let mut eta = gamma;
    let (mut c0, mut c1) = (T::one(), T::one());
    let (mut s0, mut s1) = (T::zero(), T::zero());
    let mut w = vec![T::zero(); size];
    let mut w_old = vec![T::zero(); size];

    let mut residuals = vec![T::one()];
    let mut iterations = 0;
    let tiny = T::epsilon() * gamma_init;

    if gamma > tiny {
        for _j in 1..=maxit {
            iterations += 1;
            let z_tilde: Vec<T> = z.iter().map(|&zi| zi / gamma).collect();
            let az = apply(&z_tilde);
            let delta = dot(&z_tilde, &az);

            let mut v_next = az;
            for i in 0..size {
                v_next[i] = v_next[i] - (delta / gamma) * v[i] - (gamma / gamma_old) * v_old[i];
            }
            let z_next = prec(&v_next);
            let gamma_next = dot(&z_next, &v_next).max(T::zero()).sqrt();

            let alpha0 = c1 * delta - c0 * s1 * gamma;
            let alpha1 = (alpha0 * alpha0 + gamma_next * gamma_next).sqrt();
            let alpha2 = s1 * delta + c0 * c1 * gamma;
            let alpha3 = s0 * gamma;
            c0 = c1;
            s0 = s1;
            c1 = alpha0 / alpha1;
            s1 = gamma_next / alpha1;

            let mut w_next = z_tilde;
            for i in 0..size {
                w_next[i] = (w_next[i] - alpha3 * w_old[i] - alpha2 * w[i]) / alpha1;
                x[i] += c1 * eta * w_next[i];
            }
            eta = -s1 * eta;

            w_old = std::mem::replace(&mut w, w_next);
            v_old = std::mem::replace(&mut v, v_next);
            z = z_next;
            gamma_old = std::mem::replace(&mut gamma, gamma_next);

            residuals.push(eta.abs() / gamma_init);
            if gamma <= tiny {
                // lucky breakdown: the Krylov space is invariant and the
                // current iterate solves the projected system exactly
                break;
            }
            if eta.abs() <= tol * gamma_init {
                break;
            }
        }
    }

    let kx = apply(&x);
    let r: Vec<T> = b.iter().zip(&kx).map(|(&bi, &ri)| bi - ri).collect();
    let true_res = norm2(&r) / b_norm;
    // recheck in the minimized norm: ||r||_{M^-1} relative to the initial
    let zr = prec(&r);
    let metric_res = dot(&r, &zr).max(T::zero()).sqrt() / gamma_init;
    let converged = metric_res <= cast::<T>(10.0) * tol;
    SolveReport {
        solution: x,
        iterations,
        relative_residuals: residuals,
        true_residual: true_res,
        metric_residual: metric_res,
        converged,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Preconditioned conjugate gradients for SPD operators. Aborts with
/// [`KrylovError::IndefiniteOperator`] when nonpositive curvature
/// `pᵀMp <= 0` shows the operator is not SPD.
pub fn pcg<T, F, P>(
    apply_m: F,
    precond: P,
    b: &[T],
    tol: T,
    maxit: usize,
) -> Result<SolveReport<Vec<T>, T>, KrylovError>
where
    T: Scalar,
    F: Fn(&[T]) -> Vec<T>,
    P: Fn(&[T]) -> Vec<T>,
{
    let start = Instant::now();
    let size = b.len();
    let b_norm = norm2(b);
    let mut x = vec![T::zero(); size];
    if b_norm == T::zero() {
        return Ok(SolveReport {
            solution: x,
            iterations: 0,
            relative_residuals: vec![T::zero()],
            true_residual: T::zero(),
            metric_residual: T::zero(),
            converged: true,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residuals = vec![T::one()];
    let mut iterations = 0;

    for it in 1..=maxit {
        iterations = it;
        let ap = apply_m(&p);
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            return Err(KrylovError::IndefiniteOperator(it));
        }
        let alpha = rz / pap;
        for i in 0..size {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / b_norm;
        residuals.push(rel);
        if rel <= tol {
            break;
        }
        z = precond(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..size {
            p[i] = z[i] + beta * p[i];
        }
    }

    let mr = apply_m(&x);
    let true_res = b
        .iter()
        .zip(&mr)
        .map(|(&bi, &ri)| {
            let d = bi - ri;
            d * d
        })
        .sum::<T>()
        .sqrt()
        / b_norm;
    let converged = true_res <= cast::<T>(10.0) * tol;
    Ok(SolveReport {
        solution: x,
        iterations,
        relative_residuals: residuals,
        true_residual: true_res,
        metric_residual: true_res,
        converged,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Right-preconditioned flexible GMRES with restart cycles.
///
/// The preconditioner may change between iterations (inner CG solves); the
/// preconditioned basis vectors are stored per cycle, which is what makes
/// that flexibility sound.
pub fn fgmres<T, F>(
    apply_k: F,
    p: &BlockDiagPrecond<T>,
    b: &BlockVector<T>,
    tol: T,
    restart: usize,
    maxit: usize,
) -> SolveReport<BlockVector<T>, T>
where
    T: Scalar,
    F: Fn(&BlockVector<T>) -> BlockVector<T>,
{
    fgmres_with(apply_k, |v| p.apply_inverse(v), b, tol, restart, maxit)
}

/// FGMRES with an arbitrary (possibly nonlinear-in-iteration) preconditioner
/// action, e.g. a wrapper around exact solves of the whole system.
pub fn fgmres_with<T, F, P>(
    apply_k: F,
    precond: P,
    b: &BlockVector<T>,
    tol: T,
    restart: usize,
    maxit: usize,
) -> SolveReport<BlockVector<T>, T>
where
    T: Scalar,
    F: Fn(&BlockVector<T>) -> BlockVector<T>,
    P: Fn(&BlockVector<T>) -> BlockVector<T>,
{
    let n = b.top.len();
    let flat_b = b.to_flat();
    let apply = |v: &[T]| apply_k(&BlockVector::from_flat(v, n)).to_flat();
    let prec = |v: &[T]| precond(&BlockVector::from_flat(v, n)).to_flat();
    fgmres_flat(&apply, &prec, &flat_b, tol, restart.max(1), maxit)
        .map(|x| BlockVector::from_flat(&x, n))
}

fn fgmres_flat<T: Scalar>(
    apply: &dyn Fn(&[T]) -> Vec<T>,
    prec: &dyn Fn(&[T]) -> Vec<T>,
    b: &[T],
    tol: T,
    restart: usize,
    maxit: usize,
) -> SolveReport<Vec<T>, T> {
    let start = Instant::now();
    let size = b.len();
    let b_norm = norm2(b);
    let mut x = vec![T::zero(); size];
    if b_norm == T::zero() {
        return SolveReport {
            solution: x,
            iterations: 0,
            relative_residuals: vec![T::zero()],
            true_residual: T::zero(),
            metric_residual: T::zero(),
            converged: true,
            seconds: start.elapsed().as_secs_f64(),
        };
    }

    let mut residuals = vec![T::one()];
    let mut iterations = 0;

    loop {
        let kx = apply(&x);
        let mut r: Vec<T> = b.iter().zip(&kx).map(|(&bi, &ki)| bi - ki).collect();
        let beta = norm2(&r);
        if beta <= tol * b_norm || iterations >= maxit {
            break;
        }
        for v in r.iter_mut() {
            *v /= beta;
        }
        let mut basis: Vec<Vec<T>> = vec![r];
        let mut z_basis: Vec<Vec<T>> = Vec::new();
        let mut h: Vec<Vec<T>> = Vec::new(); // column j stored with j+2 rows
        let mut giv: Vec<(T, T)> = Vec::new();
        let mut g = vec![T::zero(); restart + 1];
        g[0] = beta;

        let mut cols = 0;
        for j in 0..restart {
            if iterations >= maxit {
                break;
            }
            iterations += 1;
            let zj = prec(&basis[j]);
            let mut w = apply(&zj);
            z_basis.push(zj);
            let mut hj = vec![T::zero(); j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(&w, vi);
                hj[i] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * *vk;
                }
            }
            let hlast = norm2(&w);
            hj[j + 1] = hlast;

            for (i, &(c, s)) in giv.iter().enumerate() {
                let t0 = c * hj[i] + s * hj[i + 1];
                let t1 = -s * hj[i] + c * hj[i + 1];
                hj[i] = t0;
                hj[i + 1] = t1;
            }
            let (c, s) = {
                let denom = (hj[j] * hj[j] + hj[j + 1] * hj[j + 1]).sqrt();
                if denom == T::zero() {
                    (T::one(), T::zero())
                } else {
                    (hj[j] / denom, hj[j + 1] / denom)
                }
            };
            hj[j] = c * hj[j] + s * hj[j + 1];
            hj[j + 1] = T::zero();
            let gj = g[j];
            g[j] = c * gj;
            g[j + 1] = -s * gj;
            giv.push((c, s));
            h.push(hj);
            cols = j + 1;

            let est = g[j + 1].abs() / b_norm;
            residuals.push(est);

            // happy breakdown: the basis is exhausted and the projected
            // solution is exact
            let happy = hlast <= T::epsilon() * b_norm;
            if est <= tol || happy {
                break;
            }
            let vnext: Vec<T> = w.iter().map(|&v| v / hlast).collect();
            basis.push(vnext);
        }

        if cols == 0 {
            break;
        }
        let mut y = vec![T::zero(); cols];
        for i in (0..cols).rev() {
            let mut acc = g[i];
            for k in (i + 1)..cols {
                acc -= h[k][i] * y[k];
            }
            y[i] = acc / h[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for i in 0..size {
                x[i] += *yk * z_basis[k][i];
            }
        }
        if residuals.last().copied().unwrap_or(T::one()) <= tol || iterations >= maxit {
            break;
        }
    }

    let kx = apply(&x);
    let true_res = b
        .iter()
        .zip(&kx)
        .map(|(&bi, &ki)| {
            let d = bi - ki;
            d * d
        })
        .sum::<T>()
        .sqrt()
        / b_norm;
    let converged = true_res <= cast::<T>(10.0) * tol;
    SolveReport {
        solution: x,
        iterations,
        relative_residuals: residuals,
        true_residual: true_res,
        metric_residual: true_res,
        converged,
        seconds: start.elapsed().as_secs_f64(),
    }
}
