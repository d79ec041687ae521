//! Nonadaptive sensing matrices and their analysis: mutual coherence,
//! Monte-Carlo lower bounds on the restricted isometry constant, and the
//! incoherent-sampling measurement bound.
//!
//! Generation is deterministic: the same `(kind, m, n, seed, scale)` always
//! reproduces the same entries bit for bit (entries are drawn row-major
//! from a [`SeedStream`] keyed by the seed).

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeedStream};
use crate::transforms::{dct_analysis_matrix, Signal};
use nalgebra::{DMatrix, DVector};
use std::io::{Read, Write};

const MAGIC: [u8; 4] = *b"CSMX";
const FORMAT_VERSION: u32 = 1;

/// Combinatorial budget for exhaustive RIP / l0 enumeration.
pub const ENUMERATION_BUDGET: u64 = 1_000_000;

/// Generator family for random sensing matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// I.i.d. normal entries, mean 0, standard deviation `scale`.
    Gaussian,
    /// I.i.d. entries `+scale` or `-scale` with equal probability.
    Bernoulli,
    /// `m` distinct rows of the n-by-n orthonormal DCT matrix, chosen
    /// uniformly without replacement and scaled by `sqrt(n/m)`.
    SubsampledOrthobasis,
}

impl MatrixKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MatrixKind::Gaussian => "gaussian",
            MatrixKind::Bernoulli => "bernoulli",
            MatrixKind::SubsampledOrthobasis => "subsampled_orthobasis",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(MatrixKind::Gaussian),
            "bernoulli" => Ok(MatrixKind::Bernoulli),
            "subsampled" | "subsampled_orthobasis" => Ok(MatrixKind::SubsampledOrthobasis),
            other => Err(Error::InvalidArgument(format!("unknown matrix kind '{other}'"))),
        }
    }
}

/// How a sensing matrix was generated; absent for matrices loaded from a
/// file or built from raw entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub kind: MatrixKind,
    pub seed: u64,
    pub scale: f64,
}

/// Dense m-by-n sensing matrix Phi.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    entries: DMatrix<f64>,
    provenance: Option<Provenance>,
}

impl SensingMatrix {
    /// Wraps explicit entries; `m <= n` and finiteness are enforced.
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidArgument("matrix must be at least 1x1".into()));
        }
        if entries.nrows() > entries.ncols() {
            return Err(Error::InvalidArgument(format!(
                "sensing requires m <= n, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(SensingMatrix { entries, provenance: None })
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Serializes to the flat binary layout: 16-byte header (magic "CSMX",
    /// version, m, n as little-endian u32) followed by row-major f64 LE.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.m() as u32).to_le_bytes())?;
        w.write_all(&(self.n() as u32).to_le_bytes())?;
        for r in 0..self.m() {
            for c in 0..self.n() {
                w.write_all(&self.entries[(r, c)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a matrix written by [`write_to`](Self::write_to). Provenance
    /// is not stored in the format, so the result carries none.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if header[0..4] != MAGIC {
            return Err(Error::Format("bad magic, expected CSMX".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let m = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let n = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let mut buf = vec![0u8; 8 * m * n];
        r.read_exact(&mut buf)?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::from_entries(DMatrix::from_row_slice(m, n, &values))
    }
}

/// Measurement vector y of length m.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    values: DVector<f64>,
}

impl MeasurementVector {
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Result of a coherence computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceResult {
    pub mu: f64,
    /// One maximizing (sensing row, representation column) pair; lowest
    /// indices win ties.
    pub argmax_pair: (usize, usize),
}

/// Monte-Carlo lower bound on the order-k restricted isometry constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipEstimate {
    pub k: usize,
    pub delta_lower: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Generates a seeded random sensing matrix.
pub fn generate_matrix(
    kind: MatrixKind,
    m: usize,
    n: usize,
    seed: u64,
    scale: f64,
) -> Result<SensingMatrix> {
    if m == 0 || n == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "dimensions must satisfy 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let mut stream = SeedStream::new(seed);
    let entries = match kind {
        MatrixKind::Gaussian => {
            let mut buf = Vec::with_capacity(m * n);
            for _ in 0..m * n {
                buf.push(scale * stream.normal());
            }
            DMatrix::from_row_slice(m, n, &buf)
        }
        MatrixKind::Bernoulli => {
            let mut buf = Vec::with_capacity(m * n);
            for _ in 0..m * n {
                buf.push(scale * stream.sign());
            }
            DMatrix::from_row_slice(m, n, &buf)
        }
        MatrixKind::SubsampledOrthobasis => {
            let basis = dct_analysis_matrix(n);
            let rows = stream.sample_distinct(m, n);
            let gain = (n as f64 / m as f64).sqrt();
            let mut out = DMatrix::zeros(m, n);
            for (r, &src) in rows.iter().enumerate() {
                out.row_mut(r).copy_from(&(basis.row(src) * gain));
            }
            out
        }
    };
    Ok(SensingMatrix {
        entries,
        provenance: Some(Provenance { kind, seed, scale }),
    })
}

/// Applies the sensing operator: y = Phi x.
pub fn measure(phi: &SensingMatrix, x: &Signal) -> Result<MeasurementVector> {
    if x.len() != phi.n() {
        return Err(Error::InvalidArgument(format!(
            "signal length {} does not match matrix columns {}",
            x.len(),
            phi.n()
        )));
    }
    Ok(MeasurementVector { values: phi.entries() * x.samples() })
}

fn check_unit_rows(mat: &DMatrix<f64>, name: &str) -> Result<()> {
    for i in 0..mat.nrows() {
        let norm = mat.row(i).norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "{name} row {i} has norm {norm}, expected 1"
            )));
        }
    }
    Ok(())
}

fn check_unit_cols(mat: &DMatrix<f64>, name: &str) -> Result<()> {
    for j in 0..mat.ncols() {
        let norm = mat.column(j).norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "{name} column {j} has norm {norm}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Mutual coherence of an orthobasis pair:
/// `mu = sqrt(n) * max |<phi_k, psi_j>|` where `phi_k` ranges over rows of
/// the sensing basis and `psi_j` over columns of the representation basis.
///
/// Both arguments must be square n-by-n with unit-norm rows (first) and
/// unit-norm columns (second), checked to 1e-8.
pub fn mutual_coherence(phi: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<CoherenceResult> {
    let n = phi.nrows();
    if phi.ncols() != n || psi.nrows() != n || psi.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "coherence needs square bases of equal size, got {}x{} and {}x{}",
            phi.nrows(),
            phi.ncols(),
            psi.nrows(),
            psi.ncols()
        )));
    }
    check_unit_rows(phi, "sensing basis")?;
    check_unit_cols(psi, "representation basis")?;
    let products = phi * psi;
    let mut best = (0usize, 0usize, -1.0f64);
    for k in 0..n {
        for j in 0..n {
            let v = products[(k, j)].abs();
            if v > best.2 {
                best = (k, j, v);
            }
        }
    }
    Ok(CoherenceResult {
        mu: (n as f64).sqrt() * best.2,
        argmax_pair: (best.0, best.1),
    })
}

/// Largest correlation between unit-normalized columns of two (possibly
/// rectangular) matrices with the same row count.
///
/// This extends coherence to rectangular sensing matrices; it omits the
/// sqrt(n) factor and the [1, sqrt(n)] guarantee of the orthobasis case.
pub fn max_column_correlation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<CoherenceResult> {
    if a.nrows() != b.nrows() {
        return Err(Error::InvalidArgument(format!(
            "row counts differ: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let norm_cols = |mat: &DMatrix<f64>, name: &str| -> Result<DMatrix<f64>> {
        let mut out = mat.clone();
        for j in 0..out.ncols() {
            let norm = out.column(j).norm();
            if norm == 0.0 {
                return Err(Error::InvalidArgument(format!("{name} column {j} is zero")));
            }
            out.column_mut(j).scale_mut(1.0 / norm);
        }
        Ok(out)
    };
    let an = norm_cols(a, "first matrix")?;
    let bn = norm_cols(b, "second matrix")?;
    let products = an.transpose() * bn;
    let mut best = (0usize, 0usize, -1.0f64);
    for i in 0..products.nrows() {
        for j in 0..products.ncols() {
            let v = products[(i, j)].abs();
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    Ok(CoherenceResult { mu: best.2, argmax_pair: (best.0, best.1) })
}

/// Monte-Carlo lower bound on the RIP constant delta_k.
///
/// Each trial draws a uniform random support of size k and a unit-norm
/// gaussian coefficient vector on it, then records `|  ||Phi x||^2 - 1 |`;
/// the running maximum only grows with more trials. Trial `i` uses the
/// stream keyed by `derive_seed(seed, i, 0)`, so the estimate is identical
/// whether trials run sequentially or in parallel.
pub fn estimate_rip(
    phi: &SensingMatrix,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<RipEstimate> {
    if k == 0 || k > phi.m() {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k <= m, got k={k}, m={}",
            phi.m()
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let entries = phi.entries();
    let (m, n) = (phi.m(), phi.n());
    let mut delta_lower: f64 = 0.0;
    for trial in 0..trials {
        let mut stream = SeedStream::new(derive_seed(seed, trial as u64, 0));
        let support = stream.sample_distinct(k, n);
        let mut coeff: Vec<f64> = (0..k).map(|_| stream.normal()).collect();
        let norm = coeff.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        coeff.iter_mut().for_each(|v| *v /= norm);
        let mut image_sq = 0.0;
        for r in 0..m {
            let mut acc = 0.0;
            for (i, &j) in support.iter().enumerate() {
                acc += entries[(r, j)] * coeff[i];
            }
            image_sq += acc * acc;
        }
        delta_lower = delta_lower.max((image_sq - 1.0).abs());
    }
    Ok(RipEstimate { k, delta_lower, trials, seed })
}

/// Exact RIP constant by exhaustive enumeration of all C(n, k) supports,
/// usable only while `C(n, k) <= 10^6`. For each support the extreme
/// singular values of the k-column submatrix give the distortion.
pub fn exact_rip(phi: &SensingMatrix, k: usize) -> Result<f64> {
    if k == 0 || k > phi.m() {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k <= m, got k={k}, m={}",
            phi.m()
        )));
    }
    let n = phi.n();
    let count = binomial_capped(n, k, ENUMERATION_BUDGET).ok_or_else(|| {
        Error::InstanceTooLarge(format!(
            "C({n}, {k}) exceeds the enumeration budget of {ENUMERATION_BUDGET}"
        ))
    })?;
    debug_assert!(count >= 1);
    let entries = phi.entries();
    let mut delta: f64 = 0.0;
    for_each_combination(n, k, |support| {
        let sub = entries.select_columns(support.iter());
        let sv = sub.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        delta = delta.max((smax * smax - 1.0).max(1.0 - smin * smin));
    });
    Ok(delta)
}

/// The incoherent-sampling measurement bound
/// `ceil(c * mu^2 * k * ln n)` (natural logarithm).
pub fn measurement_bound(mu: f64, k: usize, n: usize, c: f64) -> Result<u64> {
    if !(mu >= 1.0) {
        return Err(Error::InvalidArgument(format!("mu must be >= 1, got {mu}")));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    Ok((c * mu * mu * k as f64 * (n as f64).ln()).ceil() as u64)
}

/// C(n, k), or None once the value exceeds `cap`.
pub(crate) fn binomial_capped(n: usize, k: usize, cap: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Visits every k-subset of 0..n in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
