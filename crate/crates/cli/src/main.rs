//! `sparserec`: sparse recovery from nonadaptive random measurements.
//!
//! Machine-readable CSV goes to stdout (or `--out`); human summaries go to
//! stderr so pipelines stay clean. Every subcommand is byte-deterministic
//! for a fixed `--seed`.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 numerical degeneracy,
//! 5 solver failure.

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use sparserec_core::error::Error as CoreError;
use sparserec_core::experiment::{
    load_wav_segment, run_recovery, sweep, synth_compressible, ExperimentConfig, SignalSource,
    SolverChoice,
};
use sparserec_core::rng::derive_seed;
use sparserec_core::sensing::{
    estimate_rip, exact_rip, generate_matrix, max_column_correlation, measurement_bound,
    mutual_coherence, MatrixKind,
};
use sparserec_core::solvers::SolverConfig;
use sparserec_core::transforms::{dct_analysis_matrix, dct_forward, fit_power_law, Signal};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;
const EXIT_SOLVER: u8 = 5;

#[derive(Parser)]
#[command(
    name = "sparserec",
    about = "Sparse signal recovery from nonadaptive random measurements",
    version
)]
struct Cli {
    /// Seed for all randomness; SPARSEREC_SEED overrides the default when
    /// the flag is absent.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the primary CSV/report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sorted DCT magnitudes and their power-law fit.
    Analyze {
        #[command(flatten)]
        source: SourceArgs,
        /// Rank range for the fit, as LO:HI (1-based, default 1:n).
        #[arg(long)]
        fit_range: Option<String>,
    },
    /// Sense a signal and recover it with the chosen solver.
    Recover {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        sensing: SensingArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Number of measurements.
        #[arg(long, default_value_t = 512)]
        m: usize,
    },
    /// Sweep m over multiples of k and report per-trial MSE rows.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        sensing: SensingArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Comma-separated multiples of k to use as m values.
        #[arg(long, default_value = "1,2,3,4,5,6")]
        m_multiples: String,
        /// Trials per m value.
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Generate and analyze a sensing matrix (coherence, RIP, bound).
    Matrix {
        /// gaussian | bernoulli | subsampled | dct-vs-spike
        #[arg(long)]
        kind: String,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Entry scale; defaults to 1/sqrt(m) (unit-norm columns in
        /// expectation, matching the RIP convention).
        #[arg(long)]
        scale: Option<f64>,
        /// Monte-Carlo RIP order to estimate.
        #[arg(long)]
        rip_k: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        rip_trials: usize,
        /// Also compute the exact RIP constant by enumeration (small
        /// instances only).
        #[arg(long, default_value_t = false)]
        rip_exact: bool,
        /// Measurement bound query, e.g. mu=1,k=128,n=2048,c=1.
        #[arg(long)]
        bound: Option<String>,
        /// Report the max column correlation against this basis (only
        /// "dct" is supported).
        #[arg(long)]
        coherence_with: Option<String>,
        /// Dump the generated matrix in the flat binary layout.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SourceArgs {
    /// Load the signal from a PCM-16 WAV file.
    #[arg(long, conflicts_with = "synth")]
    wav: Option<PathBuf>,
    /// Sample offset into the WAV file.
    #[arg(long, default_value_t = 0)]
    offset: usize,
    /// Use the synthetic power-law compressible signal.
    #[arg(long, default_value_t = false)]
    synth: bool,
    /// Signal length.
    #[arg(long, default_value_t = 2048)]
    n: usize,
    /// Synthetic magnitude scale.
    #[arg(long, default_value_t = 46.97)]
    c: f64,
    /// Synthetic decay exponent.
    #[arg(long, default_value_t = 1.45)]
    q: f64,
}

#[derive(Args)]
struct SensingArgs {
    /// gaussian | bernoulli | subsampled
    #[arg(long, default_value = "gaussian")]
    matrix: String,
    /// Entry scale (standard deviation for gaussian); default sqrt(0.02).
    #[arg(long)]
    scale: Option<f64>,
}

#[derive(Args)]
struct SolverArgs {
    /// bp | omp | rw | l0
    #[arg(long, default_value = "bp")]
    solver: String,
    /// Sparsity level k.
    #[arg(long, default_value_t = 128)]
    k: usize,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    abs_tol: f64,
    #[arg(long, default_value_t = 1e-5)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1.0)]
    penalty: f64,
    #[arg(long, default_value_t = 1e-6)]
    support_tol: f64,
    /// Reweighting rounds (rw solver).
    #[arg(long, default_value_t = 4)]
    rounds: usize,
    /// Reweighting epsilon (rw solver); adaptive when absent.
    #[arg(long)]
    epsilon: Option<f64>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Self {
        let code = match &err {
            CoreError::InvalidInput(_)
            | CoreError::InvalidArgument(_)
            | CoreError::InstanceTooLarge(_) => EXIT_USAGE,
            CoreError::Io(_) | CoreError::Format(_) => EXIT_IO,
            CoreError::DegenerateFit(_) => EXIT_DEGENERATE,
            CoreError::InfeasibleFactorization(_) => EXIT_SOLVER,
        };
        Failure { code, message: err.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure { code: EXIT_IO, message: err.to_string() }
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("SPARSEREC_SEED") {
        Ok(raw) => raw
            .parse::<u64>()
            .map_err(|_| Failure::usage(format!("SPARSEREC_SEED is not a u64: '{raw}'"))),
        Err(_) => Ok(42),
    }
}

fn write_output(out: &Option<PathBuf>, contents: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, contents)?,
        None => std::io::stdout().write_all(contents.as_bytes())?,
    }
    Ok(())
}

fn build_signal(source: &SourceArgs, seed: u64, require_explicit: bool) -> Result<Signal, Failure> {
    match (&source.wav, source.synth) {
        (Some(path), false) => Ok(load_wav_segment(path, source.offset, source.n)?),
        (None, true) => Ok(synth_compressible(source.n, source.c, source.q, seed)?),
        (None, false) if !require_explicit => {
            Ok(synth_compressible(source.n, source.c, source.q, seed)?)
        }
        (None, false) => Err(Failure::usage("give exactly one signal source: --wav or --synth")),
        (Some(_), true) => unreachable!("clap rejects the conflict"),
    }
}

fn signal_source(source: &SourceArgs, seed: u64) -> SignalSource {
    match &source.wav {
        Some(path) => {
            SignalSource::WavSegment { path: path.clone(), offset_samples: source.offset }
        }
        None => SignalSource::Synthetic { c: source.c, q: source.q, seed },
    }
}

fn parse_solver(args: &SolverArgs) -> Result<(SolverChoice, SolverConfig), Failure> {
    let cfg = SolverConfig {
        max_iters: args.max_iters,
        abs_tol: args.abs_tol,
        rel_tol: args.rel_tol,
        penalty: args.penalty,
        support_tol: args.support_tol,
    };
    let choice = match args.solver.as_str() {
        "bp" => SolverChoice::BasisPursuit,
        "omp" => SolverChoice::Omp,
        "rw" => SolverChoice::Reweighted { rounds: args.rounds, epsilon: args.epsilon },
        "l0" => SolverChoice::L0Oracle,
        other => return Err(Failure::usage(format!("unknown solver '{other}'"))),
    };
    Ok((choice, cfg))
}

fn parse_multiples(raw: &str) -> Result<Vec<usize>, Failure> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Failure::usage(format!("bad m multiple '{tok}'")))
        })
        .collect()
}

fn parse_fit_range(raw: &str, n: usize) -> Result<(usize, usize), Failure> {
    let (lo, hi) = raw
        .split_once(':')
        .ok_or_else(|| Failure::usage(format!("--fit-range wants LO:HI, got '{raw}'")))?;
    let lo = lo.parse::<usize>().map_err(|_| Failure::usage("bad fit range low"))?;
    let hi = match hi {
        "n" | "" => n,
        other => other.parse::<usize>().map_err(|_| Failure::usage("bad fit range high"))?,
    };
    Ok((lo, hi))
}

fn cmd_analyze(
    source: &SourceArgs,
    fit_range: Option<&str>,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let signal = build_signal(source, seed, true)?;
    let theta = dct_forward(&signal);
    let n = theta.len();
    let range = match fit_range {
        Some(raw) => parse_fit_range(raw, n)?,
        None => (1, n),
    };
    let fit = fit_power_law(&theta, range)?;

    let mut mags: Vec<f64> = theta.coeffs().iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("finite coefficients"));
    let mut csv = String::from("rank,magnitude\n");
    for (i, mag) in mags.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, fmt17(*mag)));
    }
    write_output(out, &csv)?;
    eprintln!(
        "fit: c={} q={} residual_rms={} ranks={}:{}",
        fmt17(fit.c),
        fmt17(fit.q),
        fmt17(fit.residual_rms),
        range.0,
        range.1
    );
    Ok(())
}

fn cmd_recover(
    source: &SourceArgs,
    sensing: &SensingArgs,
    solver: &SolverArgs,
    m: usize,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let signal = build_signal(source, seed, false)?;
    let (choice, solver_cfg) = parse_solver(solver)?;
    let cfg = ExperimentConfig {
        n: source.n,
        k: solver.k,
        m_multiples: vec![1],
        matrix_kind: sensing.matrix.parse::<MatrixKind>()?,
        scale: sensing.scale.unwrap_or_else(|| 0.02f64.sqrt()),
        base_seed: seed,
        solver: choice,
        solver_cfg,
        trials_per_m: 1,
        source: signal_source(source, seed),
    };
    let trial_seed = derive_seed(seed, m as u64, 0);
    let (mse_cs, mse_tc, result) = run_recovery(&signal, &cfg, m, trial_seed)?;

    let recovered = dct_analysis_matrix(source.n).transpose() * result.theta_hat.coeffs();
    let mut csv = String::from("index,original,recovered\n");
    for i in 0..source.n {
        csv.push_str(&format!(
            "{},{},{}\n",
            i,
            fmt17(signal.samples()[i]),
            fmt17(recovered[i])
        ));
    }
    write_output(out, &csv)?;
    eprintln!(
        "recover: mse_cs={} mse_tc={} iterations={} residual={} status={}",
        fmt17(mse_cs),
        fmt17(mse_tc),
        result.iterations,
        fmt17(result.primal_residual),
        result.status.as_str()
    );
    Ok(())
}

fn cmd_sweep(
    source: &SourceArgs,
    sensing: &SensingArgs,
    solver: &SolverArgs,
    multiples: &str,
    trials: usize,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let signal = build_signal(source, seed, false)?;
    let (choice, solver_cfg) = parse_solver(solver)?;
    let cfg = ExperimentConfig {
        n: source.n,
        k: solver.k,
        m_multiples: parse_multiples(multiples)?,
        matrix_kind: sensing.matrix.parse::<MatrixKind>()?,
        scale: sensing.scale.unwrap_or_else(|| 0.02f64.sqrt()),
        base_seed: seed,
        solver: choice,
        solver_cfg,
        trials_per_m: trials,
        source: signal_source(source, seed),
    };
    let report = sweep(&signal, &cfg)?;
    write_output(out, &report.to_csv())?;
    if let Some(path) = out {
        let mut meta_path = path.clone().into_os_string();
        meta_path.push(".meta");
        std::fs::write(meta_path, report.metadata())?;
    }
    for (m, cs, tc) in &report.medians {
        eprintln!("m={m} median_mse_cs={} median_mse_tc={}", fmt17(*cs), fmt17(*tc));
    }
    Ok(())
}

fn parse_bound_query(raw: &str) -> Result<(f64, usize, usize, f64), Failure> {
    let (mut mu, mut k, mut n, mut c) = (None, None, None, 1.0f64);
    for tok in raw.split(',') {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--bound wants key=value pairs, got '{tok}'")))?;
        match key.trim() {
            "mu" => mu = Some(value.parse::<f64>().map_err(|_| Failure::usage("bad mu"))?),
            "k" => k = Some(value.parse::<usize>().map_err(|_| Failure::usage("bad k"))?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| Failure::usage("bad n"))?),
            "c" => c = value.parse::<f64>().map_err(|_| Failure::usage("bad c"))?,
            other => return Err(Failure::usage(format!("unknown bound key '{other}'"))),
        }
    }
    match (mu, k, n) {
        (Some(mu), Some(k), Some(n)) => Ok((mu, k, n, c)),
        _ => Err(Failure::usage("--bound needs mu=, k= and n=")),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_matrix(
    kind: &str,
    m: Option<usize>,
    n: Option<usize>,
    scale: Option<f64>,
    rip_k: Option<usize>,
    rip_trials: usize,
    rip_exact: bool,
    bound: Option<&str>,
    coherence_with: Option<&str>,
    dump: Option<&PathBuf>,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let mut report = String::new();

    if kind == "dct-vs-spike" {
        let n = n.ok_or_else(|| Failure::usage("dct-vs-spike needs --n"))?;
        let spike = DMatrix::<f64>::identity(n, n);
        let psi = dct_analysis_matrix(n).transpose();
        let res = mutual_coherence(&spike, &psi)?;
        report.push_str(&format!("mu={}\n", fmt17(res.mu)));
        report.push_str(&format!(
            "argmax_pair={},{}\n",
            res.argmax_pair.0, res.argmax_pair.1
        ));
        report.push_str(&format!("sqrt_n={}\n", fmt17((n as f64).sqrt())));
    } else {
        let kind: MatrixKind = kind.parse()?;
        let m = m.ok_or_else(|| Failure::usage("matrix generation needs --m"))?;
        let n = n.ok_or_else(|| Failure::usage("matrix generation needs --n"))?;
        let scale = scale.unwrap_or(1.0 / (m as f64).sqrt());
        let phi = generate_matrix(kind, m, n, seed, scale)?;
        report.push_str(&format!("kind={}\n", kind.as_str()));
        report.push_str(&format!("m={m}\nn={n}\n"));
        report.push_str(&format!("scale={}\n", fmt17(scale)));
        report.push_str(&format!("seed={seed}\n"));

        if let Some(k) = rip_k {
            let est = estimate_rip(&phi, k, rip_trials, seed)?;
            report.push_str(&format!("rip_k={k}\nrip_trials={rip_trials}\n"));
            report.push_str(&format!("delta_lower={}\n", fmt17(est.delta_lower)));
            if rip_exact {
                let exact = exact_rip(&phi, k)?;
                report.push_str(&format!("delta_exact={}\n", fmt17(exact)));
            }
        }
        if let Some(with) = coherence_with {
            if with != "dct" {
                return Err(Failure::usage(format!("--coherence-with supports only 'dct', got '{with}'")));
            }
            let psi = dct_analysis_matrix(n).transpose();
            let res = max_column_correlation(phi.entries(), &psi)?;
            report.push_str(&format!("max_col_correlation={}\n", fmt17(res.mu)));
        }
        if let Some(path) = dump {
            let mut file = std::fs::File::create(path)?;
            phi.write_to(&mut file)?;
            report.push_str(&format!("dumped={}\n", path.display()));
        }
    }

    if let Some(raw) = bound {
        let (mu, k, n, c) = parse_bound_query(raw)?;
        let bound = measurement_bound(mu, k, n, c)?;
        report.push_str(&format!("bound={bound}\n"));
    }

    write_output(out, &report)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = resolve_seed(cli.seed)?;
    match &cli.command {
        Command::Analyze { source, fit_range } => {
            cmd_analyze(source, fit_range.as_deref(), seed, &cli.out)
        }
        Command::Recover { source, sensing, solver, m } => {
            cmd_recover(source, sensing, solver, *m, seed, &cli.out)
        }
        Command::Sweep { source, sensing, solver, m_multiples, trials } => {
            cmd_sweep(source, sensing, solver, m_multiples, *trials, seed, &cli.out)
        }
        Command::Matrix {
            kind,
            m,
            n,
            scale,
            rip_k,
            rip_trials,
            rip_exact,
            bound,
            coherence_with,
            dump,
        } => cmd_matrix(
            kind,
            *m,
            *n,
            *scale,
            *rip_k,
            *rip_trials,
            *rip_exact,
            bound.as_deref(),
            coherence_with.as_deref(),
            dump.as_ref(),
            seed,
            &cli.out,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let is_help = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if is_help { ExitCode::SUCCESS } else { ExitCode::from(EXIT_USAGE) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
