//! Experiment runner: configuration parsing, the build-precondition-solve
//! pipeline, sweeps and CSV report rows.
//!
//! The flat key-value config format accepts comma-separated lists for the
//! `augmentation`, `leading`, `schur` and `solver` keys; a sweep is the
//! cartesian product of the lists. Row output is deterministic for a fixed
//! config and seed except for the timing columns.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::augment::{augment_spd, select_weight_rows, AugmentError, WeightSelection};
use crate::generate::{
    generate_banded_geo, generate_lp, generate_random_saddle, GenerateError, GeneratorKind,
    GeneratorSpec, GENERATOR_NAME,
};
use crate::ipm::{first_singular_kkt, IpmError};
use crate::krylov::{fgmres, minres};
use crate::mm::{read_matrix_market, MmError};
use crate::precond::{
    make_with_schur, LeadingKind, PrecondError, INNER_CG_MAXIT, INNER_CG_TOL,
};
use crate::saddle::{BlockVector, SaddleError, SaddleSystem};
use crate::schur::{bfbt_operator, diag_schur, exact_schur, wki_operator, SchurError};

/// Solver defaults surfaced as config defaults.
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAXIT: usize = 2000;
pub const DEFAULT_RESTART: usize = 30;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Schur(#[from] SchurError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Saddle(#[from] SaddleError),
    #[error(transparent)]
    Mm(#[from] MmError),
    #[error("interior point run failed: {0}")]
    Ipm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl<T: fmt::Debug> From<IpmError<T>> for ExperimentError {
    fn from(e: IpmError<T>) -> Self {
        ExperimentError::Ipm(format!("{:?}", e))
    }
}

/// Where the saddle system comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    /// Matrix Market files for `A` and `B`.
    MatrixMarket { a: PathBuf, b: PathBuf },
    /// Seeded generator.
    Generator(GeneratorSpec),
    /// First numerically singular KKT system of a seeded interior-point run.
    IpmKkt {
        n: usize,
        m: usize,
        degenerate: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Augmentation {
    Partial,
    Full,
    Identity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeadingApprox {
    Exact,
    Diagonal,
    Ic(f64),
    InnerCg(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchurApprox {
    Exact,
    DiagBased,
    Wki(f64),
    Bfbt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverChoice {
    Minres,
    Fgmres(usize),
}

/// One experiment: problem, augmentation, block approximations, solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub augmentation: Augmentation,
    pub leading: LeadingApprox,
    pub schur: SchurApprox,
    pub solver: SolverChoice,
    pub tol: f64,
    pub maxit: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Enforces the cross-field invariants: positive tolerances and the
    /// flexible-preconditioner rule (inner CG forces FGMRES).
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.tol <= 0.0 {
            return Err(ExperimentError::Config("tol must be > 0".into()));
        }
        if matches!(self.leading, LeadingApprox::InnerCg(_))
            && !matches!(self.solver, SolverChoice::Fgmres(_))
        {
            return Err(ExperimentError::Config(
                "inner_cg leading solver requires solver = fgmres".into(),
            ));
        }
        if let LeadingApprox::InnerCg(t) = self.leading {
            if t <= 0.0 {
                return Err(ExperimentError::Config("inner_cg tol must be > 0".into()));
            }
        }
        if let Augmentation::Identity(rho) = self.augmentation {
            if rho <= 0.0 {
                return Err(ExperimentError::Config("identity rho must be > 0".into()));
            }
        }
        Ok(())
    }

    fn problem_label(&self) -> String {
        match &self.problem {
            ProblemSource::MatrixMarket { a, .. } => a
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "mm".into()),
            ProblemSource::Generator(spec) => match spec.kind {
                GeneratorKind::RandomSaddle => {
                    format!("random-saddle-n{}-m{}-k{}", spec.n, spec.m, spec.k)
                }
                GeneratorKind::BandedGeo => {
                    format!("banded-geo-n{}-m{}-bw{}", spec.n, spec.m, spec.bandwidth)
                }
                GeneratorKind::DegenerateLp => {
                    format!("degenerate-lp-n{}-m{}", spec.n, spec.m)
                }
            },
            ProblemSource::IpmKkt { n, m, degenerate } => {
                format!(
                    "ipm-kkt-n{}-m{}{}",
                    n,
                    m,
                    if *degenerate { "-degenerate" } else { "" }
                )
            }
        }
    }
}

/// One CSV row. The timing columns are the only nondeterministic fields.
#[derive(Debug, Clone)]
pub struct ExperimentRow {
    pub problem: String,
    pub augmentation: String,
    pub leading: String,
    pub schur: String,
    pub solver: String,
    pub rank_w: usize,
    pub nnz_ak: usize,
    pub nnz_ic: Option<usize>,
    pub iterations: usize,
    pub seconds_per_iteration: f64,
    pub seconds_total: f64,
    pub converged: bool,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "problem,augmentation,leading,schur,solver,rank_w,nnz_ak,nnz_ic,iterations,seconds_per_iter,seconds_total,converged,error";

impl ExperimentRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3e},{:.3e},{},{}",
            self.problem,
            self.augmentation,
            self.leading,
            self.schur,
            self.solver,
            self.rank_w,
            self.nnz_ak,
            self.nnz_ic.map_or(String::new(), |v| v.to_string()),
            self.iterations,
            self.seconds_per_iteration,
            self.seconds_total,
            self.converged,
            self.error.clone().unwrap_or_default(),
        )
    }

    /// The row with timing fields blanked; used by the determinism checks.
    pub fn deterministic_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.problem,
            self.augmentation,
            self.leading,
            self.schur,
            self.solver,
            self.rank_w,
            self.nnz_ak,
            self.nnz_ic.map_or(String::new(), |v| v.to_string()),
            self.iterations,
            self.converged,
            self.error.clone().unwrap_or_default(),
        )
    }
}

fn aug_label(a: &Augmentation) -> String {
    match a {
        Augmentation::Partial => "partial".into(),
        Augmentation::Full => "full".into(),
        Augmentation::Identity(rho) => format!("identity:{}", rho),
    }
}

fn leading_label(l: &LeadingApprox) -> String {
    match l {
        LeadingApprox::Exact => "exact".into(),
        LeadingApprox::Diagonal => "diagonal".into(),
        LeadingApprox::Ic(d) => format!("ic:{}", d),
        LeadingApprox::InnerCg(t) => format!("inner_cg:{}", t),
    }
}

fn schur_label(s: &SchurApprox) -> String {
    match s {
        SchurApprox::Exact => "exact".into(),
        SchurApprox::DiagBased => "diag".into(),
        SchurApprox::Wki(b) => format!("wki:{}", b),
        SchurApprox::Bfbt => "bfbt".into(),
    }
}

fn solver_label(s: &SolverChoice) -> String {
    match s {
        SolverChoice::Minres => "minres".into(),
        SolverChoice::Fgmres(r) => format!("fgmres:{}", r),
    }
}

/// Loads or generates the saddle system named by the config.
pub fn load_problem(cfg: &ExperimentConfig) -> Result<SaddleSystem<f64>, ExperimentError> {
    match &cfg.problem {
        ProblemSource::MatrixMarket { a, b } => {
            let a = read_matrix_market::<f64>(a)?;
            let b = read_matrix_market::<f64>(b)?;
            Ok(SaddleSystem::new(a, b)?)
        }
        ProblemSource::Generator(spec) => match spec.kind {
            GeneratorKind::RandomSaddle => Ok(generate_random_saddle(spec, cfg.seed)?),
            GeneratorKind::BandedGeo => Ok(generate_banded_geo(spec, cfg.seed)?),
            GeneratorKind::DegenerateLp => {
                let prob = generate_lp::<f64>(spec.n, spec.m, cfg.seed, true);
                Ok(first_singular_kkt(&prob, 1e-9)?)
            }
        },
        ProblemSource::IpmKkt { n, m, degenerate } => {
            let prob = generate_lp::<f64>(*n, *m, cfg.seed, *degenerate);
            let gap = if *degenerate { 1e-9 } else { 1e-8 };
            Ok(first_singular_kkt(&prob, gap)?)
        }
    }
}

/// Runs one experiment: system, weight selection, augmented block,
/// preconditioner, Krylov solve. The right-hand side is `K x` for a seeded
/// random solution `x`, so the solve has a known answer.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRow, ExperimentError> {
    cfg.validate()?;
    let sys = load_problem(cfg)?;
    run_on_system(cfg, &sys)
}

/// The pipeline on an already-built system (shared by `run_experiment` and
/// the CLI paths that load systems themselves).
pub fn run_on_system(
    cfg: &ExperimentConfig,
    sys: &SaddleSystem<f64>,
) -> Result<ExperimentRow, ExperimentError> {
    let (n, m) = (sys.n(), sys.m());
    let requested: WeightSelection<f64> = match cfg.augmentation {
        Augmentation::Partial => select_weight_rows(sys.a(), sys.b())?,
        Augmentation::Full => WeightSelection::full(m),
        Augmentation::Identity(rho) => WeightSelection::identity(rho)?,
    };
    let blk = augment_spd(sys.a(), sys.b(), &requested)?;
    // the numerical phase may have enlarged the selection; the Schur
    // operators must see the weight matrix that actually augments A
    let sel = blk.selection().clone();

    let schur_op = match cfg.schur {
        SchurApprox::Exact => exact_schur(&blk, sys.b())?,
        SchurApprox::DiagBased => diag_schur(&blk.ak().diagonal(), sys.b())?,
        SchurApprox::Wki(beta) => wki_operator(&sel, beta, m)?,
        SchurApprox::Bfbt => bfbt_operator(sys.a(), sys.b(), &sel)?,
    };
    let leading_kind = match cfg.leading {
        LeadingApprox::Exact => LeadingKind::Exact,
        LeadingApprox::Diagonal => LeadingKind::Diagonal,
        LeadingApprox::Ic(droptol) => LeadingKind::Ic { droptol },
        LeadingApprox::InnerCg(tol) => LeadingKind::InnerCg {
            tol,
            maxit: INNER_CG_MAXIT,
            split: m,
        },
    };
    let p = make_with_schur(&blk, leading_kind, schur_op)?;

    // seeded right-hand side with a known solution
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let x_true = BlockVector::new(
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
    );
    let rhs = sys.apply_k(&x_true);

    let report = match cfg.solver {
        SolverChoice::Minres => minres(|v| sys.apply_k(v), &p, &rhs, cfg.tol, cfg.maxit),
        SolverChoice::Fgmres(restart) => {
            fgmres(|v| sys.apply_k(v), &p, &rhs, cfg.tol, restart, cfg.maxit)
        }
    };

    let iterations = report.iterations;
    let seconds_total = report.seconds;
    Ok(ExperimentRow {
        problem: cfg.problem_label(),
        augmentation: aug_label(&cfg.augmentation),
        leading: leading_label(&cfg.leading),
        schur: schur_label(&cfg.schur),
        solver: solver_label(&cfg.solver),
        rank_w: sel.rank(),
        nnz_ak: blk.ak().nnz(),
        nnz_ic: p.leading().ic_nnz(),
        iterations,
        seconds_per_iteration: if iterations > 0 {
            seconds_total / iterations as f64
        } else {
            0.0
        },
        seconds_total,
        converged: report.converged,
        error: None,
    })
}

/// Runs a batch; failures become rows with the error column set and the run
/// continues. Experiments run on worker threads, rows come back in config
/// order so output is deterministic.
pub fn run_sweep(configs: &[ExperimentConfig], threads: usize) -> Vec<ExperimentRow> {
    let threads = threads.max(1);
    let mut rows: Vec<Option<ExperimentRow>> = vec![None; configs.len()];
    let next = std::sync::atomic::AtomicUsize::new(0);
    let rows_mutex = std::sync::Mutex::new(&mut rows);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(configs.len().max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if idx >= configs.len() {
                    break;
                }
                let cfg = &configs[idx];
                let row = run_experiment(cfg).unwrap_or_else(|e| ExperimentRow {
                    problem: cfg.problem_label(),
                    augmentation: aug_label(&cfg.augmentation),
                    leading: leading_label(&cfg.leading),
                    schur: schur_label(&cfg.schur),
                    solver: solver_label(&cfg.solver),
                    rank_w: 0,
                    nnz_ak: 0,
                    nnz_ic: None,
                    iterations: 0,
                    seconds_per_iteration: 0.0,
                    seconds_total: 0.0,
                    converged: false,
                    error: Some(e.to_string()),
                });
                rows_mutex.lock().unwrap()[idx] = Some(row);
            });
        }
    });
    rows.into_iter().map(|r| r.expect("row filled")).collect()
}

/// Writes metadata comments, the header and the rows.
pub fn write_csv<W: Write>(
    w: &mut W,
    rows: &[ExperimentRow],
    seed: u64,
) -> Result<(), std::io::Error> {
    writeln!(w, "# generator={} seed={}", GENERATOR_NAME, seed)?;
    writeln!(w, "{}", CSV_HEADER)?;
    for row in rows {
        writeln!(w, "{}", row.to_csv_line())?;
    }
    Ok(())
}

/// Parses the flat key-value config format. Lists in `augmentation`,
/// `leading`, `schur` and `solver` expand to a cartesian product.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>, ExperimentError> {
    let mut problem: Option<ProblemSource> = None;
    let mut n = 0usize;
    let mut m = 0usize;
    let mut k = 0usize;
    let mut bandwidth = 0usize;
    let mut problem_kind: Option<String> = None;
    let mut augmentations = vec![Augmentation::Partial];
    let mut leadings = vec![LeadingApprox::Exact];
    let mut schurs = vec![SchurApprox::Exact];
    let mut solvers = vec![SolverChoice::Minres];
    let mut tol = DEFAULT_TOL;
    let mut maxit = DEFAULT_MAXIT;
    let mut seed = 0u64;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ExperimentError::Config(format!("line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |msg: &str| ExperimentError::Config(format!("line {}: {}", lineno + 1, msg));
        match key {
            "problem" => problem_kind = Some(value.to_string()),
            "a" | "b" => {
                let (a_path, b_path) = match &problem {
                    Some(ProblemSource::MatrixMarket { a, b }) => (a.clone(), b.clone()),
                    _ => (PathBuf::new(), PathBuf::new()),
                };
                let (a_path, b_path) = if key == "a" {
                    (PathBuf::from(value), b_path)
                } else {
                    (a_path, PathBuf::from(value))
                };
                problem = Some(ProblemSource::MatrixMarket {
                    a: a_path,
                    b: b_path,
                });
            }
            "n" => n = value.parse().map_err(|_| bad("bad n"))?,
            "m" => m = value.parse().map_err(|_| bad("bad m"))?,
            "k" => k = value.parse().map_err(|_| bad("bad k"))?,
            "bandwidth" => bandwidth = value.parse().map_err(|_| bad("bad bandwidth"))?,
            "augmentation" => {
                augmentations = value
                    .split(',')
                    .map(|tok| parse_augmentation(tok.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "leading" => {
                leadings = value
                    .split(',')
                    .map(|tok| parse_leading(tok.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "schur" => {
                schurs = value
                    .split(',')
                    .map(|tok| parse_schur(tok.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "solver" => {
                solvers = value
                    .split(',')
                    .map(|tok| parse_solver(tok.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "tol" => tol = value.parse().map_err(|_| bad("bad tol"))?,
            "maxit" => maxit = value.parse().map_err(|_| bad("bad maxit"))?,
            "seed" => seed = value.parse().map_err(|_| bad("bad seed"))?,
            other => return Err(bad(&format!("unknown key `{}`", other))),
        }
    }

    let problem = match problem_kind.as_deref() {
        Some("random-saddle") => {
            ProblemSource::Generator(GeneratorSpec::random_saddle(n, m, k))
        }
        Some("banded-geo") => ProblemSource::Generator(GeneratorSpec::banded_geo(n, m, bandwidth)),
        Some("degenerate-lp") => ProblemSource::IpmKkt {
            n,
            m,
            degenerate: true,
        },
        Some("lp") => ProblemSource::IpmKkt {
            n,
            m,
            degenerate: false,
        },
        Some("mm") | None => problem.ok_or_else(|| {
            ExperimentError::Config("problem source missing (set `problem` or `a`/`b`)".into())
        })?,
        Some(other) => {
            return Err(ExperimentError::Config(format!(
                "unknown problem kind `{}`",
                other
            )))
        }
    };

    let mut configs = Vec::new();
    for aug in &augmentations {
        for lead in &leadings {
            for schur in &schurs {
                for solver in &solvers {
                    configs.push(ExperimentConfig {
                        problem: problem.clone(),
                        augmentation: *aug,
                        leading: *lead,
                        schur: *schur,
                        solver: *solver,
                        tol,
                        maxit,
                        seed,
                    });
                }
            }
        }
    }
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}

pub fn parse_augmentation(tok: &str) -> Result<Augmentation, ExperimentError> {
    match tok.split_once(':') {
        None => match tok {
            "partial" => Ok(Augmentation::Partial),
            "full" => Ok(Augmentation::Full),
            other => Err(ExperimentError::Config(format!(
                "unknown augmentation `{}`",
                other
            ))),
        },
        Some(("identity", rho)) => rho
            .parse()
            .map(Augmentation::Identity)
            .map_err(|_| ExperimentError::Config("bad identity rho".into())),
        Some(_) => Err(ExperimentError::Config(format!(
            "unknown augmentation `{}`",
            tok
        ))),
    }
}

pub fn parse_leading(tok: &str) -> Result<LeadingApprox, ExperimentError> {
    match tok.split_once(':') {
        None => match tok {
            "exact" => Ok(LeadingApprox::Exact),
            "diagonal" => Ok(LeadingApprox::Diagonal),
            "ic" => Ok(LeadingApprox::Ic(0.01)),
            "inner_cg" => Ok(LeadingApprox::InnerCg(INNER_CG_TOL)),
            other => Err(ExperimentError::Config(format!(
                "unknown leading approximation `{}`",
                other
            ))),
        },
        Some(("ic", d)) => d
            .parse()
            .map(LeadingApprox::Ic)
            .map_err(|_| ExperimentError::Config("bad ic droptol".into())),
        Some(("inner_cg", t)) => t
            .parse()
            .map(LeadingApprox::InnerCg)
            .map_err(|_| ExperimentError::Config("bad inner_cg tol".into())),
        Some(_) => Err(ExperimentError::Config(format!(
            "unknown leading approximation `{}`",
            tok
        ))),
    }
}

pub fn parse_schur(tok: &str) -> Result<SchurApprox, ExperimentError> {
    match tok.split_once(':') {
        None => match tok {
            "exact" => Ok(SchurApprox::Exact),
            "diag" => Ok(SchurApprox::DiagBased),
            "bfbt" => Ok(SchurApprox::Bfbt),
            "wki" => Ok(SchurApprox::Wki(0.5)),
            other => Err(ExperimentError::Config(format!(
                "unknown Schur approximation `{}`",
                other
            ))),
        },
        Some(("wki", b)) => b
            .parse()
            .map(SchurApprox::Wki)
            .map_err(|_| ExperimentError::Config("bad wki beta".into())),
        Some(_) => Err(ExperimentError::Config(format!(
            "unknown Schur approximation `{}`",
            tok
        ))),
    }
}

pub fn parse_solver(tok: &str) -> Result<SolverChoice, ExperimentError> {
    match tok.split_once(':') {
        None => match tok {
            "minres" => Ok(SolverChoice::Minres),
            "fgmres" => Ok(SolverChoice::Fgmres(DEFAULT_RESTART)),
            other => Err(ExperimentError::Config(format!(
                "unknown solver `{}`",
                other
            ))),
        },
        Some(("fgmres", r)) => r
            .parse()
            .map(SolverChoice::Fgmres)
            .map_err(|_| ExperimentError::Config("bad fgmres restart".into())),
        Some(_) => Err(ExperimentError::Config(format!(
            "unknown solver `{}`",
            tok
        ))),
    }
}
