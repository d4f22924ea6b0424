//! Command-line harness: problem generation, spectral verification,
//! single-experiment solves, config-file sweeps and interior-point runs.
//!
//! Exit codes: 0 on success, 1 when any row failed or any theorem check
//! failed, 2 on usage errors.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use augprec::analysis::{
    preconditioned_spectrum, verify_four_eig, verify_identities, verify_interval_bounds,
    verify_lower_bound, verify_two_eig, TheoremVerdict, VerdictStatus,
};
use augprec::augment::{augment_spd, select_weight_rows, WeightSelection};
use augprec::experiment::{
    parse_augmentation, parse_config, parse_leading, parse_schur, parse_solver, run_experiment,
    run_sweep, write_csv, Augmentation, ExperimentConfig, ExperimentRow, ProblemSource,
    CSV_HEADER, DEFAULT_MAXIT, DEFAULT_TOL,
};
use augprec::generate::{
    generate_banded_geo, generate_lp, generate_random_saddle, GeneratorSpec,
};
use augprec::ipm::{mehrotra_solve, InnerRecord, InnerSolve, IpmError};
use augprec::mm::{read_matrix_market, write_matrix_market, write_vector};
use augprec::precond::make_ideal;
use augprec::saddle::SaddleSystem;

#[derive(Parser)]
#[command(
    name = "augprec",
    about = "Augmentation-based block-diagonal preconditioning for saddle-point systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded problem and write it as Matrix Market files.
    Gen(GenArgs),
    /// Run the spectral theorem checks on a system and report verdicts.
    EigVerify(EigVerifyArgs),
    /// Run a single preconditioned solve and emit one report row.
    Solve(SolveArgs),
    /// Run a batch of experiments from a config file.
    Sweep(SweepArgs),
    /// Run the Mehrotra interior-point method on a seeded LP.
    Ipm(IpmArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    RandomSaddle,
    BandedGeo,
    DegenerateLp,
    Lp,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Leading-block nullity (random-saddle only).
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Band width (banded-geo only).
    #[arg(long, default_value_t = 3)]
    bandwidth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the .mtx files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EigVerifyArgs {
    /// Matrix Market file for A (with --b-file), or use the generator flags.
    #[arg(long)]
    a_file: Option<PathBuf>,
    #[arg(long)]
    b_file: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weight selection for the checks: partial | full | identity:RHO.
    #[arg(long, default_value = "partial")]
    augmentation: String,
    /// Optional CSV output for the verdicts.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Config file; command-line flags below override its single experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    a_file: Option<PathBuf>,
    #[arg(long)]
    b_file: Option<PathBuf>,
    /// Generator problem kind when no files are given:
    /// random-saddle | banded-geo | lp | degenerate-lp.
    #[arg(long, default_value = "random-saddle")]
    problem: String,
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 12)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    bandwidth: usize,
    #[arg(long, default_value = "partial")]
    augmentation: String,
    #[arg(long, default_value = "exact")]
    leading: String,
    #[arg(long, default_value = "exact")]
    schur: String,
    #[arg(long, default_value = "minres")]
    solver: String,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAXIT)]
    maxit: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 4)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerKind {
    Direct,
    Minres,
}

#[derive(Args)]
struct IpmArgs {
    #[arg(long, default_value_t = 60)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Duplicate columns so late-stage leading blocks turn singular.
    #[arg(long, default_value_t = false)]
    degenerate: bool,
    #[arg(long, value_enum, default_value_t = InnerKind::Direct)]
    inner: InnerKind,
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    #[arg(long, default_value_t = 1e-7)]
    inner_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::EigVerify(args) => cmd_eig_verify(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Ipm(args) => cmd_ipm(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<bool> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    match args.kind {
        GenKind::RandomSaddle => {
            let spec = GeneratorSpec::random_saddle(args.n, args.m, args.k);
            let sys = generate_random_saddle::<f64>(&spec, args.seed)?;
            write_matrix_market(args.out.join("a.mtx"), sys.a())?;
            write_matrix_market(args.out.join("b.mtx"), sys.b())?;
            println!(
                "wrote a.mtx ({}x{}, {} nnz) and b.mtx ({}x{}, {} nnz) to {}",
                sys.n(),
                sys.n(),
                sys.a().nnz(),
                sys.m(),
                sys.n(),
                sys.b().nnz(),
                args.out.display()
            );
        }
        GenKind::BandedGeo => {
            let spec = GeneratorSpec::banded_geo(args.n, args.m, args.bandwidth);
            let sys = generate_banded_geo::<f64>(&spec, args.seed)?;
            write_matrix_market(args.out.join("a.mtx"), sys.a())?;
            write_matrix_market(args.out.join("b.mtx"), sys.b())?;
            println!(
                "wrote banded a.mtx / b.mtx (n = {}, m = {}, bandwidth {}) to {}",
                sys.n(),
                sys.m(),
                args.bandwidth,
                args.out.display()
            );
        }
        GenKind::DegenerateLp | GenKind::Lp => {
            let degenerate = matches!(args.kind, GenKind::DegenerateLp);
            let prob = generate_lp::<f64>(args.n, args.m, args.seed, degenerate);
            write_matrix_market(args.out.join("j.mtx"), &prob.j)?;
            write_vector(args.out.join("b.mtx"), &prob.b)?;
            write_vector(args.out.join("c.mtx"), &prob.c)?;
            println!(
                "wrote j.mtx, b.mtx, c.mtx (n = {}, m = {}{}) to {}",
                prob.n(),
                prob.m(),
                if degenerate { ", degenerate" } else { "" },
                args.out.display()
            );
        }
    }
    Ok(true)
}

fn load_system(
    a_file: &Option<PathBuf>,
    b_file: &Option<PathBuf>,
    n: usize,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<SaddleSystem<f64>> {
    match (a_file, b_file) {
        (Some(a), Some(b)) => {
            let a = read_matrix_market::<f64>(a)?;
            let b = read_matrix_market::<f64>(b)?;
            Ok(SaddleSystem::new(a, b)?)
        }
        (None, None) => {
            let spec = GeneratorSpec::random_saddle(n, m, k);
            Ok(generate_random_saddle::<f64>(&spec, seed)?)
        }
        _ => bail!("provide both --a-file and --b-file, or neither"),
    }
}

fn cmd_eig_verify(args: EigVerifyArgs) -> Result<bool> {
    let sys = load_system(&args.a_file, &args.b_file, args.n, args.m, args.k, args.seed)?;
    let requested: WeightSelection<f64> = match parse_augmentation(&args.augmentation)? {
        Augmentation::Partial => select_weight_rows(sys.a(), sys.b())?,
        Augmentation::Full => WeightSelection::full(sys.m()),
        Augmentation::Identity(rho) => WeightSelection::identity(rho)?,
    };
    // the numerical phase may enlarge the selection; verify what actually
    // gets used by the preconditioners
    let block = augment_spd(sys.a(), sys.b(), &requested).ok();
    let sel = block
        .as_ref()
        .map(|b| b.selection().clone())
        .unwrap_or(requested);

    let mut verdicts: Vec<TheoremVerdict<f64>> = vec![
        verify_four_eig(&sys, &sel),
        verify_two_eig(&sys),
        verify_interval_bounds(&sys, &sel),
    ];
    verdicts.extend(verify_identities(&sys, &sel));
    verdicts.push(verify_lower_bound(&sys));

    println!("selection: rank(W) = {}, rows {:?}", sel.rank(), sel.rows());
    if let Some(blk) = &block {
        if let Ok(p) = make_ideal(blk, sys.b()) {
            if let Ok(rep) = preconditioned_spectrum(&sys, &p, 1e-8) {
                print!("ideal spectrum clusters:");
                for c in &rep.clusters {
                    print!(" {:+.6}(x{})", c.center, c.multiplicity);
                }
                println!();
            }
        }
    }
    for v in &verdicts {
        println!(
            "{:<16} {:<12} max_deviation {:>10.3e}  {}",
            v.name.to_string(),
            v.status.to_string(),
            v.max_deviation,
            v.details
        );
    }

    if let Some(path) = &args.out {
        let mut w = fs::File::create(path)?;
        writeln!(w, "name,status,max_deviation,tolerance,details")?;
        for v in &verdicts {
            writeln!(
                w,
                "{},{},{:e},{:e},\"{}\"",
                v.name, v.status, v.max_deviation, v.tolerance, v.details
            )?;
        }
    }
    Ok(verdicts.iter().all(|v| v.status != VerdictStatus::Failed))
}

fn solve_config(args: &SolveArgs) -> Result<ExperimentConfig> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut configs = parse_config(&text)?;
        if configs.len() != 1 {
            bail!(
                "solve expects a single-experiment config, found {} combinations (use sweep)",
                configs.len()
            );
        }
        return Ok(configs.remove(0));
    }
    let problem = match (&args.a_file, &args.b_file) {
        (Some(a), Some(b)) => ProblemSource::MatrixMarket {
            a: a.clone(),
            b: b.clone(),
        },
        (None, None) => match args.problem.as_str() {
            "random-saddle" => {
                ProblemSource::Generator(GeneratorSpec::random_saddle(args.n, args.m, args.k))
            }
            "banded-geo" => ProblemSource::Generator(GeneratorSpec::banded_geo(
                args.n,
                args.m,
                args.bandwidth,
            )),
            "lp" => ProblemSource::IpmKkt {
                n: args.n,
                m: args.m,
                degenerate: false,
            },
            "degenerate-lp" => ProblemSource::IpmKkt {
                n: args.n,
                m: args.m,
                degenerate: true,
            },
            other => bail!("unknown problem kind `{}`", other),
        },
        _ => bail!("provide both --a-file and --b-file, or neither"),
    };
    Ok(ExperimentConfig {
        problem,
        augmentation: parse_augmentation(&args.augmentation)?,
        leading: parse_leading(&args.leading)?,
        schur: parse_schur(&args.schur)?,
        solver: parse_solver(&args.solver)?,
        tol: args.tol,
        maxit: args.maxit,
        seed: args.seed,
    })
}

fn emit_rows(rows: &[ExperimentRow], seed: u64, out: &Option<PathBuf>) -> Result<()> {
    println!("{}", CSV_HEADER);
    for row in rows {
        println!("{}", row.to_csv_line());
    }
    if let Some(path) = out {
        let mut w = fs::File::create(path)?;
        write_csv(&mut w, rows, seed)?;
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<bool> {
    let cfg = solve_config(&args)?;
    cfg.validate()?;
    let row = run_experiment(&cfg)?;
    let ok = row.converged && row.error.is_none();
    emit_rows(&[row], cfg.seed, &args.out)?;
    Ok(ok)
}

fn cmd_sweep(args: SweepArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let configs = parse_config(&text)?;
    let seed = configs.first().map(|c| c.seed).unwrap_or(0);
    let rows = run_sweep(&configs, args.threads);
    let ok = rows.iter().all(|r| r.converged && r.error.is_none());
    emit_rows(&rows, seed, &args.out)?;
    Ok(ok)
}

fn cmd_ipm(args: IpmArgs) -> Result<bool> {
    let prob = generate_lp::<f64>(args.n, args.m, args.seed, args.degenerate);
    let inner = match args.inner {
        InnerKind::Direct => InnerSolve::Direct,
        InnerKind::Minres => InnerSolve::Minres,
    };
    let outcome = mehrotra_solve(&prob, inner, args.gap_tol, args.inner_tol);
    let (trace, solved) = match &outcome {
        Ok((sol, trace)) => {
            println!(
                "converged in {} iterations: objective {:.6e}, duality gap {:.3e}",
                sol.iterations, sol.objective, sol.duality_gap
            );
            (trace.clone(), true)
        }
        Err(IpmError::IterationLimit { limit, gap, trace }) => {
            println!("iteration limit {} reached, duality gap {:.3e}", limit, gap);
            (trace.clone(), false)
        }
        Err(e) => bail!("interior point run failed: {}", e),
    };

    println!("iter,duality_gap,leading_singular,augmented,inner_pred,inner_corr,alpha_p,alpha_d");
    let mut lines = Vec::new();
    for (i, rec) in trace.records.iter().enumerate() {
        let (pred, corr, aug) = match &rec.inner {
            InnerRecord::Direct => (String::from(""), String::from(""), false),
            InnerRecord::Minres {
                predictor,
                corrector,
                augmented,
            } => (
                predictor.iterations.to_string(),
                corrector.iterations.to_string(),
                *augmented,
            ),
        };
        let line = format!(
            "{},{:.6e},{},{},{},{},{:.4},{:.4}",
            i + 1,
            rec.duality_gap,
            rec.leading_singular,
            aug,
            pred,
            corr,
            rec.step_lengths.0,
            rec.step_lengths.1
        );
        println!("{}", line);
        lines.push(line);
    }
    if let Some(path) = &args.out {
        let mut w = fs::File::create(path)?;
        writeln!(
            w,
            "iter,duality_gap,leading_singular,augmented,inner_pred,inner_corr,alpha_p,alpha_d"
        )?;
        for line in &lines {
            writeln!(w, "{}", line)?;
        }
    }
    Ok(solved)
}
