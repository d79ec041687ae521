//! End-to-end recovery experiment: ingest or synthesize a compressible
//! signal, run the sensing -> recovery pipeline, sweep the measurement
//! count over multiples of the sparsity level, and compare transform-coding
//! against compressed-sensing reconstruction error.
//!
//! Sweep trials are independent; each derives its own seed from
//! `(base_seed, m, trial)` so results are identical whether trials run
//! sequentially or on a rayon pool, and rows are always ordered by
//! `(m, trial)`.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeedStream};
use crate::sensing::{generate_matrix, MatrixKind};
use crate::solvers::{
    basis_pursuit, omp, reweighted_l1, reweighted_l1_auto, l0_oracle, RecoveryProblem,
    RecoveryResult, SolverConfig, SolverStatus,
};
use crate::transforms::{
    dct_analysis_matrix, dct_forward, dct_inverse, hard_threshold, CoefficientVector, Signal,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Where the experiment signal comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    /// Power-law compressible synthetic signal with magnitude scale `c`
    /// and decay exponent `q`.
    Synthetic { c: f64, q: f64, seed: u64 },
    /// Segment of a PCM-16 WAV file starting at `offset_samples`.
    WavSegment { path: PathBuf, offset_samples: usize },
}

/// Which recovery algorithm the experiment runs.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    BasisPursuit,
    /// OMP with `k_max` equal to the experiment sparsity level k.
    Omp,
    /// Reweighted l1; `epsilon: None` uses the adaptive default
    /// (0.1 times the largest round-1 coefficient magnitude).
    Reweighted { rounds: usize, epsilon: Option<f64> },
    /// Exhaustive search; only sensible for tiny configurations.
    L0Oracle,
}

impl SolverChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverChoice::BasisPursuit => "bp",
            SolverChoice::Omp => "omp",
            SolverChoice::Reweighted { .. } => "rw",
            SolverChoice::L0Oracle => "l0",
        }
    }
}

/// Full experiment configuration; echoed into every report.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    /// Measurement counts are `multiple * k` for each entry.
    pub m_multiples: Vec<usize>,
    pub matrix_kind: MatrixKind,
    pub scale: f64,
    pub base_seed: u64,
    pub solver: SolverChoice,
    pub solver_cfg: SolverConfig,
    pub trials_per_m: usize,
    pub source: SignalSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 2048,
            k: 128,
            m_multiples: (1..=6).collect(),
            matrix_kind: MatrixKind::Gaussian,
            // The reference experiment draws gaussian entries with
            // variance 0.02; basis pursuit is scale invariant, so this
            // only sets the reported measurement magnitudes.
            scale: 0.02f64.sqrt(),
            base_seed: 42,
            solver: SolverChoice::BasisPursuit,
            solver_cfg: SolverConfig::default(),
            trials_per_m: 10,
            source: SignalSource::Synthetic { c: 46.97, q: 1.45, seed: 42 },
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::InvalidArgument(format!(
                "k must satisfy 1 <= k <= n, got k={}, n={}",
                self.k, self.n
            )));
        }
        if self.m_multiples.is_empty() || self.trials_per_m == 0 {
            return Err(Error::InvalidArgument(
                "m_multiples and trials_per_m must be nonempty/positive".into(),
            ));
        }
        for &mult in &self.m_multiples {
            let m = mult * self.k;
            if mult == 0 || m > self.n {
                return Err(Error::InvalidArgument(format!(
                    "m = {mult} * k = {m} must satisfy 1 <= m <= n = {}",
                    self.n
                )));
            }
        }
        if !(self.scale > 0.0) {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        Ok(())
    }

    /// Materializes the configured signal source.
    pub fn build_signal(&self) -> Result<Signal> {
        match &self.source {
            SignalSource::Synthetic { c, q, seed } => synth_compressible(self.n, *c, *q, *seed),
            SignalSource::WavSegment { path, offset_samples } => {
                load_wav_segment(path, *offset_samples, self.n)
            }
        }
    }
}

/// One (m, trial) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub trial: usize,
    pub mse_cs: f64,
    pub mse_tc: f64,
    pub iterations: usize,
    pub residual: f64,
    pub status: SolverStatus,
}

/// Sweep outcome: one row per (m, trial) plus per-m medians and the full
/// configuration echo.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    /// `(m, median mse_cs, median mse_tc)` in ascending m.
    pub medians: Vec<(usize, f64, f64)>,
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

impl SweepReport {
    /// CSV with a fixed header; floats carry 17 significant digits so
    /// reruns compare byte for byte.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,trial,mse_cs,mse_tc,iterations,residual,status\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.m,
                row.trial,
                fmt17(row.mse_cs),
                fmt17(row.mse_tc),
                row.iterations,
                fmt17(row.residual),
                row.status.as_str()
            );
        }
        out
    }

    /// Sidecar metadata: key=value lines capturing the full configuration
    /// and seeds.
    pub fn metadata(&self) -> String {
        let cfg = &self.config;
        let mut out = String::from("format=sparserec-sweep-meta-v1\n");
        let _ = writeln!(out, "n={}", cfg.n);
        let _ = writeln!(out, "k={}", cfg.k);
        let multiples: Vec<String> = cfg.m_multiples.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(out, "m_multiples={}", multiples.join(","));
        let _ = writeln!(out, "matrix_kind={}", cfg.matrix_kind.as_str());
        let _ = writeln!(out, "matrix_scale={}", fmt17(cfg.scale));
        let _ = writeln!(out, "base_seed={}", cfg.base_seed);
        let _ = writeln!(out, "trials_per_m={}", cfg.trials_per_m);
        let _ = writeln!(out, "solver={}", cfg.solver.as_str());
        if let SolverChoice::Reweighted { rounds, epsilon } = &cfg.solver {
            let _ = writeln!(out, "solver_rounds={rounds}");
            match epsilon {
                Some(e) => {
                    let _ = writeln!(out, "solver_epsilon={}", fmt17(*e));
                }
                None => {
                    let _ = writeln!(out, "solver_epsilon=auto");
                }
            }
        }
        let sc = &cfg.solver_cfg;
        let _ = writeln!(out, "max_iters={}", sc.max_iters);
        let _ = writeln!(out, "abs_tol={}", fmt17(sc.abs_tol));
        let _ = writeln!(out, "rel_tol={}", fmt17(sc.rel_tol));
        let _ = writeln!(out, "penalty={}", fmt17(sc.penalty));
        let _ = writeln!(out, "support_tol={}", fmt17(sc.support_tol));
        match &cfg.source {
            SignalSource::Synthetic { c, q, seed } => {
                let _ = writeln!(out, "source=synthetic");
                let _ = writeln!(out, "source_c={}", fmt17(*c));
                let _ = writeln!(out, "source_q={}", fmt17(*q));
                let _ = writeln!(out, "source_seed={seed}");
            }
            SignalSource::WavSegment { path, offset_samples } => {
                let _ = writeln!(out, "source=wav");
                let _ = writeln!(out, "source_path={}", path.display());
                let _ = writeln!(out, "source_offset={offset_samples}");
            }
        }
        out
    }

    pub fn median_mse_cs(&self, m: usize) -> Option<f64> {
        self.medians.iter().find(|(mm, _, _)| *mm == m).map(|(_, cs, _)| *cs)
    }
}

/// Builds a compressible signal whose sorted DCT magnitudes are exactly
/// `c * i^(-q)` for ranks i = 1..n, with seeded random coefficient
/// positions and signs.
pub fn synth_compressible(n: usize, c: f64, q: f64, seed: u64) -> Result<Signal> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if !(c > 0.0) || !c.is_finite() || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("need finite c > 0 and finite q, got c={c}, q={q}")));
    }
    let mut stream = SeedStream::new(seed);
    let positions = stream.permutation(n);
    let mut coeffs = DVector::zeros(n);
    for rank in 1..=n {
        let magnitude = c * (rank as f64).powf(-q);
        coeffs[positions[rank - 1]] = stream.sign() * magnitude;
    }
    Ok(dct_inverse(&CoefficientVector::new(coeffs)?))
}

// ---------------------------------------------------------------------------
// WAV ingestion (RIFF, PCM 16-bit little-endian; other chunks skipped)
// ---------------------------------------------------------------------------

struct WavData {
    sample_rate: u32,
    channels: usize,
    /// Raw PCM payload of the data chunk.
    payload: Vec<u8>,
}

fn parse_wav(bytes: &[u8]) -> Result<WavData> {
    let need = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Format(format!("malformed WAV: {what}")))
        }
    };
    need(bytes.len() >= 12, "shorter than the RIFF header")?;
    need(&bytes[0..4] == b"RIFF", "missing RIFF tag")?;
    need(&bytes[8..12] == b"WAVE", "missing WAVE tag")?;

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut payload: Option<Vec<u8>> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        need(body_start + size <= bytes.len(), "chunk overruns file")?;
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                need(size >= 16, "fmt chunk too small")?;
                let audio_format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((audio_format, channels, sample_rate, bits));
            }
            b"data" => {
                payload = Some(body.to_vec());
            }
            _ => {} // skip LIST, fact, cue, ...
        }
        // Chunks are word aligned.
        pos = body_start + size + (size & 1);
    }

    let (audio_format, channels, sample_rate, bits) =
        fmt.ok_or_else(|| Error::Format("malformed WAV: no fmt chunk".into()))?;
    if audio_format != 1 || bits != 16 {
        return Err(Error::Format(format!(
            "unsupported WAV encoding: format tag {audio_format}, {bits} bits (need PCM 16)"
        )));
    }
    need(channels >= 1, "zero channels")?;
    let payload = payload.ok_or_else(|| Error::Format("malformed WAV: no data chunk".into()))?;
    Ok(WavData { sample_rate, channels: channels as usize, payload })
}

/// Loads `n` samples starting at `offset_samples` from a PCM-16 WAV file.
/// Multichannel files contribute their first channel; values are scaled to
/// [-1, 1) by division by 32768.
pub fn load_wav_segment(path: &Path, offset_samples: usize, n: usize) -> Result<Signal> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let bytes = std::fs::read(path)?;
    let wav = parse_wav(&bytes)?;
    let frame_bytes = 2 * wav.channels;
    let frames = wav.payload.len() / frame_bytes;
    if offset_samples + n > frames {
        return Err(Error::Format(format!(
            "segment [{offset_samples}, {}) out of range: file has {frames} frames",
            offset_samples + n
        )));
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let at = (offset_samples + i) * frame_bytes;
        let raw = i16::from_le_bytes(wav.payload[at..at + 2].try_into().unwrap());
        samples.push(raw as f64 / 32768.0);
    }
    Signal::new(samples, Some(wav.sample_rate))
}

// ---------------------------------------------------------------------------
// Recovery pipeline
// ---------------------------------------------------------------------------

fn mse(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm_squared() / a.len() as f64
}

fn dispatch_solver(
    choice: &SolverChoice,
    problem: &RecoveryProblem,
    k: usize,
    cfg: &SolverConfig,
) -> Result<RecoveryResult> {
    match choice {
        SolverChoice::BasisPursuit => basis_pursuit(problem, cfg),
        SolverChoice::Omp => omp(problem, k.min(problem.m()), cfg),
        SolverChoice::Reweighted { rounds, epsilon } => match epsilon {
            Some(e) => reweighted_l1(problem, *rounds, *e, cfg),
            None => reweighted_l1_auto(problem, *rounds, cfg),
        },
        SolverChoice::L0Oracle => l0_oracle(problem, k.min(problem.m()), cfg),
    }
}

fn run_recovery_with(
    x: &Signal,
    cfg: &ExperimentConfig,
    m: usize,
    trial_seed: u64,
    synthesis: &DMatrix<f64>,
    theta_x: &CoefficientVector,
) -> Result<(f64, f64, RecoveryResult)> {
    let n = x.len();
    let phi = generate_matrix(cfg.matrix_kind, m, n, trial_seed, cfg.scale)?;
    let a = phi.entries() * synthesis;
    let y = phi.entries() * x.samples();
    let problem = RecoveryProblem::new(a, y)?;
    let result = dispatch_solver(&cfg.solver, &problem, cfg.k, &cfg.solver_cfg)?;

    let x_cs = synthesis * result.theta_hat.coeffs();
    let kept = hard_threshold(theta_x, cfg.k)?;
    let x_tc = synthesis * kept.coeffs();
    Ok((mse(x.samples(), &x_cs), mse(x.samples(), &x_tc), result))
}

/// Runs one sensing/recovery trial at measurement count m and returns the
/// compressed-sensing and transform-coding mean squared errors together
/// with the solver diagnostics.
pub fn run_recovery(
    x: &Signal,
    cfg: &ExperimentConfig,
    m: usize,
    trial_seed: u64,
) -> Result<(f64, f64, RecoveryResult)> {
    if x.len() != cfg.n {
        return Err(Error::InvalidArgument(format!(
            "signal length {} does not match configured n={}",
            x.len(),
            cfg.n
        )));
    }
    if m == 0 || m > cfg.n {
        return Err(Error::InvalidArgument(format!(
            "m must satisfy 1 <= m <= n, got m={m}, n={}",
            cfg.n
        )));
    }
    let synthesis = dct_analysis_matrix(cfg.n).transpose();
    let theta_x = dct_forward(x);
    run_recovery_with(x, cfg, m, trial_seed, &synthesis, &theta_x)
}

/// Runs the full (m multiple, trial) grid. Trials execute on the rayon
/// pool; per-trial seeds make the report independent of thread count.
pub fn sweep(x: &Signal, cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if x.len() != cfg.n {
        return Err(Error::InvalidArgument(format!(
            "signal length {} does not match configured n={}",
            x.len(),
            cfg.n
        )));
    }
    let synthesis = dct_analysis_matrix(cfg.n).transpose();
    let theta_x = dct_forward(x);
    let zero_estimate_mse = x.samples().norm_squared() / cfg.n as f64;

    let mut grid: Vec<(usize, usize)> = Vec::new();
    for &mult in &cfg.m_multiples {
        for trial in 0..cfg.trials_per_m {
            grid.push((mult * cfg.k, trial));
        }
    }

    let outcomes: Vec<Result<SweepRow>> = grid
        .par_iter()
        .map(|&(m, trial)| {
            let trial_seed = derive_seed(cfg.base_seed, m as u64, trial as u64);
            match run_recovery_with(x, cfg, m, trial_seed, &synthesis, &theta_x) {
                Ok((mse_cs, mse_tc, result)) => Ok(SweepRow {
                    m,
                    trial,
                    mse_cs,
                    mse_tc,
                    iterations: result.iterations,
                    residual: result.primal_residual,
                    status: result.status,
                }),
                // A failed factorization is recorded, not dropped: the row
                // carries the MSE of the zero estimate.
                Err(Error::InfeasibleFactorization(_)) => Ok(SweepRow {
                    m,
                    trial,
                    mse_cs: zero_estimate_mse,
                    mse_tc: {
                        let kept = hard_threshold(&theta_x, cfg.k)?;
                        mse(x.samples(), &(&synthesis * kept.coeffs()))
                    },
                    iterations: 0,
                    residual: f64::INFINITY,
                    status: SolverStatus::Infeasible,
                }),
                Err(other) => Err(other),
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        rows.push(outcome?);
    }
    rows.sort_by_key(|row| (row.m, row.trial));

    let mut medians = Vec::new();
    let mut ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
    ms.dedup();
    for m in ms {
        let cs: Vec<f64> = rows.iter().filter(|r| r.m == m).map(|r| r.mse_cs).collect();
        let tc: Vec<f64> = rows.iter().filter(|r| r.m == m).map(|r| r.mse_tc).collect();
        medians.push((m, median(cs), median(tc)));
    }

    Ok(SweepReport { config: cfg.clone(), rows, medians })
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite mse"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
