//! Orthonormal DCT analysis/synthesis, k-term hard thresholding, and
//! power-law compressibility fitting.
//!
//! The transform pair is the orthonormal DCT-II/DCT-III convention: the
//! analysis matrix has entries `s_j * cos(pi*(2t+1)*j / (2n))` with
//! `s_0 = sqrt(1/n)` and `s_j = sqrt(2/n)` otherwise, so analysis is the
//! transpose of synthesis and Parseval holds exactly. Transforms are plain
//! O(n^2) summations over a precomputed cosine table; n stays at desk scale
//! (<= 4096) throughout the crate.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Magnitudes at or below this are treated as zero when fitting logs.
const FIT_FLOOR: f64 = 1e-12;

/// Time-domain real signal with optional sample-rate metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: DVector<f64>,
    sample_rate_hz: Option<u32>,
}

impl Signal {
    /// Builds a signal, rejecting empty or non-finite data.
    pub fn new(samples: impl Into<DVector<f64>>, sample_rate_hz: Option<u32>) -> Result<Self> {
        let samples = samples.into();
        if samples.is_empty() {
            return Err(Error::InvalidInput("signal must have n >= 1 samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        if sample_rate_hz == Some(0) {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        Ok(Signal { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &DVector<f64> {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees n >= 1
    }

    pub fn sample_rate_hz(&self) -> Option<u32> {
        self.sample_rate_hz
    }
}

/// Transform-domain coefficient vector theta.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    coeffs: DVector<f64>,
}

impl CoefficientVector {
    pub fn new(coeffs: impl Into<DVector<f64>>) -> Result<Self> {
        let coeffs = coeffs.into();
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("coefficient vector must have n >= 1 entries".into()));
        }
        if let Some(i) = coeffs.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coefficient at index {i}")));
        }
        Ok(CoefficientVector { coeffs })
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of entries with magnitude above `tol` (the l0 count).
    pub fn sparsity(&self, tol: f64) -> usize {
        self.coeffs.iter().filter(|v| v.abs() > tol).count()
    }

    /// Indices of entries with magnitude above `tol`, ascending.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.coeffs[i].abs() > tol).collect()
    }
}

/// Fitted power-law decay of sorted coefficient magnitudes:
/// predicted magnitude at rank i is `c * i^(-q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub c: f64,
    pub q: f64,
    /// RMS of log-magnitude residuals over the fitted ranks.
    pub residual_rms: f64,
}

/// Cosine table over one full period of the DCT kernel.
///
/// `value(r)` returns `cos(pi * r / (2n))`; callers reduce the integer
/// phase modulo 4n before indexing, which avoids the precision loss of
/// evaluating cosines at large arguments.
pub(crate) struct CosTable {
    n: usize,
    values: Vec<f64>,
}

impl CosTable {
    pub(crate) fn new(n: usize) -> Self {
        let period = 4 * n;
        let values = (0..period)
            .map(|r| (std::f64::consts::PI * r as f64 / (2 * n) as f64).cos())
            .collect();
        CosTable { n, values }
    }

    #[inline]
    pub(crate) fn kernel(&self, j: usize, t: usize) -> f64 {
        self.values[(j * (2 * t + 1)) % (4 * self.n)]
    }
}

fn dct_scale(n: usize, j: usize) -> f64 {
    if j == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Analysis transform: theta = Psi^T x under the orthonormal DCT-II.
pub fn dct_forward(x: &Signal) -> CoefficientVector {
    let n = x.len();
    let table = CosTable::new(n);
    let samples = x.samples();
    let coeffs = DVector::from_fn(n, |j, _| {
        let mut acc = 0.0;
        for t in 0..n {
            acc += samples[t] * table.kernel(j, t);
        }
        acc * dct_scale(n, j)
    });
    CoefficientVector { coeffs }
}

/// Synthesis transform: x = Psi theta (orthonormal DCT-III).
pub fn dct_inverse(theta: &CoefficientVector) -> Signal {
    let n = theta.len();
    let table = CosTable::new(n);
    let coeffs = theta.coeffs();
    let samples = DVector::from_fn(n, |t, _| {
        let mut acc = 0.0;
        for j in 0..n {
            acc += dct_scale(n, j) * coeffs[j] * table.kernel(j, t);
        }
        acc
    });
    Signal { samples, sample_rate_hz: None }
}

/// The n-by-n orthonormal DCT analysis matrix; row j holds the j-th
/// analysis functional, so `C * x = dct_forward(x)` and `C^T` is the
/// synthesis basis Psi.
pub fn dct_analysis_matrix(n: usize) -> DMatrix<f64> {
    let table = CosTable::new(n);
    DMatrix::from_fn(n, n, |j, t| dct_scale(n, j) * table.kernel(j, t))
}

/// Keeps the k largest-magnitude entries at their positions and zeroes the
/// rest. Ties are broken toward the lower index.
pub fn hard_threshold(theta: &CoefficientVector, k: usize) -> Result<CoefficientVector> {
    let n = theta.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let coeffs = theta.coeffs();
    let mut order: Vec<usize> = (0..n).collect();
    // Descending magnitude; equal magnitudes stay in index order.
    order.sort_by(|&a, &b| {
        coeffs[b]
            .abs()
            .partial_cmp(&coeffs[a].abs())
            .expect("finite by construction")
            .then(a.cmp(&b))
    });
    let mut kept = DVector::zeros(n);
    for &i in order.iter().take(k) {
        kept[i] = coeffs[i];
    }
    Ok(CoefficientVector { coeffs: kept })
}

/// Least-squares line fit of log sorted magnitude against log rank over the
/// 1-based rank range `[lo, hi]`; returns `c = exp(intercept)` and
/// `q = -slope`.
///
/// Trailing ranks whose magnitude falls at or below 1e-12 are excluded from
/// the fit (with a warning) rather than failing; the fit degenerates only
/// when fewer than two usable ranks remain.
pub fn fit_power_law(theta: &CoefficientVector, rank_range: (usize, usize)) -> Result<PowerLawFit> {
    let n = theta.len();
    let (lo, hi) = rank_range;
    if lo < 1 || lo > hi || hi > n {
        return Err(Error::InvalidArgument(format!(
            "rank range [{lo}, {hi}] invalid for n={n}"
        )));
    }
    let mut mags: Vec<f64> = theta.coeffs().iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("finite by construction"));

    // After the descending sort, sub-floor magnitudes form a suffix of the
    // range; drop them.
    let mut usable = hi;
    while usable >= lo && mags[usable - 1] <= FIT_FLOOR {
        usable -= 1;
    }
    if usable < hi {
        log::warn!(
            "power-law fit: dropped ranks {}..={} with magnitude <= {FIT_FLOOR:e}",
            usable + 1,
            hi
        );
    }
    if usable < lo || usable - lo + 1 < 2 {
        return Err(Error::DegenerateFit(format!(
            "fewer than two ranks with magnitude above {FIT_FLOOR:e} in [{lo}, {hi}]"
        )));
    }

    let points = (lo..=usable).map(|rank| ((rank as f64).ln(), mags[rank - 1].ln()));
    let count = (usable - lo + 1) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in points.clone() {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = count * sxx - sx * sx;
    if det.abs() < f64::EPSILON * count * sxx.max(1.0) {
        return Err(Error::DegenerateFit("collinear log-rank abscissae".into()));
    }
    let slope = (count * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / count;
    let residual_ss: f64 = points.map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();

    Ok(PowerLawFit {
        c: intercept.exp(),
        q: -slope,
        residual_rms: (residual_ss / count).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force DCT-II by direct cosine summation, independent of the
    /// table-based implementation path.
    fn dct_oracle(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|j| {
                let s = if j == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                s * x
                    .iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        v * (std::f64::consts::PI * (2 * t + 1) as f64 * j as f64
                            / (2 * n) as f64)
                            .cos()
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    fn random_signal(n: usize, seed: u64) -> Signal {
        let mut s = crate::rng::SeedStream::new(seed);
        Signal::new((0..n).map(|_| s.normal()).collect::<Vec<_>>(), None).unwrap()
    }

    #[test]
    fn constant_signal_maps_to_dc() {
        let x = Signal::new(vec![1.0, 1.0, 1.0, 1.0], None).unwrap();
        let theta = dct_forward(&x);
        assert!((theta.coeffs()[0] - 2.0).abs() < 1e-12);
        for j in 1..4 {
            assert!(theta.coeffs()[j].abs() < 1e-12);
        }
    }

    #[test]
    fn unit_impulse_preserves_energy() {
        let x = Signal::new(vec![1.0, 0.0, 0.0, 0.0], None).unwrap();
        let theta = dct_forward(&x);
        assert!((theta.coeffs().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_matches_direct_summation_oracle() {
        for &n in &[4usize, 64, 256, 2048] {
            let x = random_signal(n, 1000 + n as u64);
            let theta = dct_forward(&x);
            let expected = dct_oracle(x.samples().as_slice());
            for j in 0..n {
                let err = (theta.coeffs()[j] - expected[j]).abs();
                assert!(err < 1e-10, "n={n} j={j} err={err}");
            }
        }
    }

    #[test]
    fn parseval_holds_to_1e10_relative() {
        for &n in &[4usize, 64, 256, 2048] {
            let x = random_signal(n, 77 + n as u64);
            let theta = dct_forward(&x);
            let rel = (theta.coeffs().norm() - x.samples().norm()).abs() / x.samples().norm();
            assert!(rel < 1e-10, "n={n} rel={rel}");
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for &n in &[4usize, 64, 256, 2048] {
            let x = random_signal(n, 9 + n as u64);
            let back = dct_inverse(&dct_forward(&x));
            let max_abs = x.samples().iter().map(|v| v.abs()).fold(0.0, f64::max);
            for t in 0..n {
                let err = (back.samples()[t] - x.samples()[t]).abs();
                assert!(err < 1e-10 * max_abs.max(1.0), "n={n} t={t} err={err}");
            }
        }
    }

    #[test]
    fn inverse_of_dc_is_constant() {
        let theta = CoefficientVector::new(vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        let x = dct_inverse(&theta);
        for t in 0..4 {
            assert!((x.samples()[t] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_zero_is_zero() {
        let theta = CoefficientVector::new(vec![0.0; 16]).unwrap();
        let x = dct_inverse(&theta);
        assert!(x.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn analysis_matrix_is_orthonormal() {
        let c = dct_analysis_matrix(16);
        let gram = &c * c.transpose();
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        assert!(matches!(
            Signal::new(vec![1.0, f64::NAN], None),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            CoefficientVector::new(vec![f64::INFINITY]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(Signal::new(Vec::<f64>::new(), None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hard_threshold_keeps_largest() {
        let theta = CoefficientVector::new(vec![5.0, -3.0, 1.0, 0.5]).unwrap();
        let kept = hard_threshold(&theta, 2).unwrap();
        assert_eq!(kept.coeffs().as_slice(), &[5.0, -3.0, 0.0, 0.0]);
    }

    #[test]
    fn hard_threshold_is_identity_on_sparse_input() {
        let theta = CoefficientVector::new(vec![0.0, 2.0, 0.0, -1.0]).unwrap();
        for k in 2..=4 {
            let kept = hard_threshold(&theta, k).unwrap();
            assert_eq!(kept.coeffs(), theta.coeffs());
        }
    }

    #[test]
    fn hard_threshold_tie_keeps_lower_index() {
        let theta = CoefficientVector::new(vec![2.0, -2.0, 1.0]).unwrap();
        let kept = hard_threshold(&theta, 1).unwrap();
        assert_eq!(kept.coeffs().as_slice(), &[2.0, 0.0, 0.0]);
    }

    #[test]
    fn hard_threshold_is_idempotent() {
        let x = random_signal(64, 5);
        let theta = dct_forward(&x);
        let once = hard_threshold(&theta, 10).unwrap();
        let twice = hard_threshold(&once, 10).unwrap();
        assert_eq!(once.coeffs(), twice.coeffs());
    }

    #[test]
    fn hard_threshold_rejects_bad_k() {
        let theta = CoefficientVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(hard_threshold(&theta, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(hard_threshold(&theta, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn k_term_error_equals_discarded_energy() {
        let x = random_signal(256, 21);
        let theta = dct_forward(&x);
        let k = 32;
        let kept = hard_threshold(&theta, k).unwrap();
        let approx = dct_inverse(&kept);
        let err2 = (x.samples() - approx.samples()).norm_squared();
        let discarded: f64 = theta
            .coeffs()
            .iter()
            .zip(kept.coeffs().iter())
            .filter(|(_, &kv)| kv == 0.0)
            .map(|(&tv, _)| tv * tv)
            .sum();
        assert!((err2 - discarded).abs() < 1e-10 * discarded.max(1.0));
    }

    #[test]
    fn fit_recovers_paper_power_law_exactly() {
        let n = 2048;
        let mags: Vec<f64> =
            (1..=n).map(|i| 46.97 * (i as f64).powf(-1.45)).collect();
        let theta = CoefficientVector::new(mags).unwrap();
        let fit = fit_power_law(&theta, (1, n)).unwrap();
        assert!((fit.c - 46.97).abs() < 1e-6, "c={}", fit.c);
        assert!((fit.q - 1.45).abs() < 1e-6, "q={}", fit.q);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn flat_magnitudes_fit_zero_decay() {
        let theta = CoefficientVector::new(vec![1.0; 8]).unwrap();
        let fit = fit_power_law(&theta, (1, 8)).unwrap();
        assert!(fit.c.abs() - 1.0 < 1e-12);
        assert!(fit.q.abs() < 1e-12);
    }

    #[test]
    fn fit_tolerates_one_percent_noise() {
        // Monte-Carlo over seeded multiplicative noise.
        let n = 2048;
        for seed in 0..10u64 {
            let mut s = crate::rng::SeedStream::new(900 + seed);
            let mags: Vec<f64> = (1..=n)
                .map(|i| {
                    46.97 * (i as f64).powf(-1.45) * (1.0 + 0.01 * (2.0 * s.uniform() - 1.0))
                })
                .collect();
            let theta = CoefficientVector::new(mags).unwrap();
            let fit = fit_power_law(&theta, (1, n)).unwrap();
            assert!((fit.q - 1.45).abs() < 0.05, "seed={seed} q={}", fit.q);
        }
    }

    #[test]
    fn fit_is_scale_equivariant() {
        let n = 512;
        let mut s = crate::rng::SeedStream::new(31);
        let mags: Vec<f64> = (1..=n)
            .map(|i| 3.0 * (i as f64).powf(-0.9) * (1.0 + 0.05 * s.uniform()))
            .collect();
        let theta = CoefficientVector::new(mags.clone()).unwrap();
        let scaled =
            CoefficientVector::new(mags.iter().map(|v| v * 7.5).collect::<Vec<_>>()).unwrap();
        let f1 = fit_power_law(&theta, (1, n)).unwrap();
        let f2 = fit_power_law(&scaled, (1, n)).unwrap();
        assert!((f2.c - 7.5 * f1.c).abs() < 1e-9 * f1.c.abs().max(1.0));
        assert!((f2.q - f1.q).abs() < 1e-9);
    }

    #[test]
    fn fit_drops_zero_tail_and_degenerates_on_zero_range() {
        let mut mags = vec![0.0; 16];
        for (i, m) in mags.iter_mut().enumerate().take(8) {
            *m = 2.0 * ((i + 1) as f64).powf(-1.0);
        }
        let theta = CoefficientVector::new(mags).unwrap();
        // Tail ranks 9..16 are zero: dropped, fit succeeds on 1..8.
        let fit = fit_power_law(&theta, (1, 16)).unwrap();
        assert!((fit.q - 1.0).abs() < 1e-9);
        // Entire requested range sits in the zero tail: degenerate.
        assert!(matches!(
            fit_power_law(&theta, (9, 16)),
            Err(Error::DegenerateFit(_))
        ));
    }
}
