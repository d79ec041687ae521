//! Sparse recovery algorithms: equality-constrained l1 minimization
//! (basis pursuit) via alternating-direction operator splitting, orthogonal
//! matching pursuit, iteratively reweighted l1, and an exhaustive l0 oracle
//! for small instances.
//!
//! A single solve is sequential and deterministic: iteration order is fixed
//! and no data-dependent parallel reductions occur, so results reproduce
//! bit for bit across runs and thread counts.

use crate::error::{Error, Result};
use crate::sensing::{binomial_capped, for_each_combination, ENUMERATION_BUDGET};
use crate::transforms::CoefficientVector;
use nalgebra::linalg::PermutationSequence;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Recovery problem: find sparse theta with `A theta = y`, where A is the
/// composed operator Phi * Psi.
#[derive(Debug, Clone)]
pub struct RecoveryProblem {
    a: DMatrix<f64>,
    y: DVector<f64>,
}

impl RecoveryProblem {
    /// Validates dimensions and finiteness. Row rank of A is checked later,
    /// when the solver factorizes A A^T.
    pub fn new(a: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if m == 0 || n == 0 || m > n {
            return Err(Error::InvalidArgument(format!(
                "operator must satisfy 1 <= m <= n, got {m}x{n}"
            )));
        }
        if y.len() != m {
            return Err(Error::InvalidArgument(format!(
                "measurement length {} does not match m={m}",
                y.len()
            )));
        }
        if !a.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("operator and measurements must be finite".into()));
        }
        Ok(RecoveryProblem { a, y })
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn measurements(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }
}

/// Termination state of a recovery run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIters,
    /// No candidate met the feasibility tolerance (exhaustive search only).
    Infeasible,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIters => "max_iters",
            SolverStatus::Infeasible => "infeasible",
        }
    }
}

/// Stopping and reporting parameters shared by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Operator-splitting step parameter rho; the soft-threshold level of
    /// the splitting iteration is 1/rho (scaled per coordinate when
    /// reweighting).
    pub penalty: f64,
    /// Magnitudes at or below this count as zero for support and l0
    /// reporting.
    pub support_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 5000,
            abs_tol: 1e-7,
            rel_tol: 1e-5,
            penalty: 1.0,
            support_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.penalty > 0.0
            && self.support_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "solver tolerances, penalty and max_iters must be strictly positive".into(),
            ))
        }
    }

    /// Feasibility tolerance for a measurement vector of norm `y_norm`.
    pub fn feasibility_tol(&self, y_norm: f64) -> f64 {
        self.abs_tol + self.rel_tol * y_norm
    }
}

/// Recovered coefficients plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub theta_hat: CoefficientVector,
    pub status: SolverStatus,
    pub iterations: usize,
    /// Final `||A theta_hat - y||_2`.
    pub primal_residual: f64,
    /// Solver-internal change norm at termination (0 for direct solvers).
    pub dual_residual: f64,
    /// `||theta_hat||_1` for the l1 solvers, `||theta_hat||_0` for OMP and
    /// the l0 oracle.
    pub objective: f64,
}

// ---------------------------------------------------------------------------
// Affine projection onto {theta : A theta = y}
// ---------------------------------------------------------------------------

enum GramFactor {
    Chol(Cholesky<f64, Dyn>),
    /// Column-pivoted QR of A^T: A^T P = Q R, so A A^T = P R^T R P^T.
    Qr {
        r: DMatrix<f64>,
        p: PermutationSequence<Dyn>,
    },
}

struct AffineProjector {
    a: DMatrix<f64>,
    y: DVector<f64>,
    factor: GramFactor,
}

impl AffineProjector {
    fn new(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let m = a.nrows();
        let gram = a * a.transpose();
        let factor = match Cholesky::new(gram) {
            Some(chol) => GramFactor::Chol(chol),
            None => {
                // The Gram matrix is numerically indefinite: decide rank via
                // column-pivoted QR of A^T and fail hard when deficient.
                let (_, r, p) = a.transpose().col_piv_qr().unpack();
                let rmax = r.diagonal().amax();
                let tol = f64::EPSILON * (a.ncols().max(m) as f64) * rmax.max(1.0);
                let rank = r.diagonal().iter().filter(|d| d.abs() > tol).count();
                if rank < m {
                    return Err(Error::InfeasibleFactorization(format!(
                        "operator has numerical row rank {rank} < m = {m}"
                    )));
                }
                GramFactor::Qr { r, p }
            }
        };
        Ok(AffineProjector { a: a.clone(), y: y.clone(), factor })
    }

    /// Solves (A A^T) w = b.
    fn solve_gram(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            GramFactor::Chol(chol) => chol.solve(b),
            GramFactor::Qr { r, p } => {
                // A A^T = P R^T R P^T with P from the pivoted QR of A^T.
                let mut v = b.clone();
                p.permute_rows(&mut v); // v = P^T b
                let z = r
                    .tr_solve_upper_triangular(&v)
                    .expect("full-rank R by construction");
                let mut w = r.solve_upper_triangular(&z).expect("full-rank R by construction");
                p.inv_permute_rows(&mut w); // w = P w'
                w
            }
        }
    }

    /// Euclidean projection of v onto {theta : A theta = y}.
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let defect = &self.a * v - &self.y;
        v - self.a.tr_mul(&self.solve_gram(&defect))
    }
}

// ---------------------------------------------------------------------------
// Splitting solver for min sum w_i |theta_i|  s.t.  A theta = y
// ---------------------------------------------------------------------------

fn weighted_l1(v: &DVector<f64>, weights: Option<&DVector<f64>>) -> f64 {
    match weights {
        Some(w) => v.iter().zip(w.iter()).map(|(x, wi)| wi * x.abs()).sum(),
        None => v.iter().map(|x| x.abs()).sum(),
    }
}

fn soft_threshold_into(src: &DVector<f64>, thresholds: &DVector<f64>, out: &mut DVector<f64>) {
    for i in 0..src.len() {
        let v = src[i];
        let t = thresholds[i];
        out[i] = if v > t {
            v - t
        } else if v < -t {
            v + t
        } else {
            0.0
        };
    }
}

/// Least-squares fit of y on the given columns of A; QR with an SVD
/// fallback for numerically singular supports.
fn least_squares_on(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    support: &[usize],
) -> Option<(DVector<f64>, f64)> {
    let sub = a.select_columns(support.iter());
    let qr = sub.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    let tol = f64::EPSILON * (sub.nrows().max(sub.ncols()) as f64) * diag_max.max(1.0);
    let coef = if r.diagonal().iter().all(|d| d.abs() > tol) {
        let qt_y = qr.q().tr_mul(y);
        r.solve_upper_triangular(&qt_y)?
    } else {
        sub.clone().svd(true, true).solve(y, tol).ok()?
    };
    let residual = (&sub * &coef - y).norm();
    Some((coef, residual))
}

/// Core splitting iteration. Alternates (i) Euclidean projection onto the
/// affine constraint set, (ii) elementwise soft thresholding at w_i/rho,
/// (iii) scaled dual update; both residuals must fall below
/// `abs_tol + rel_tol * scale` to stop.
///
/// The thresholded iterate (exactly sparse) is returned. After the loop a
/// polishing step refits the detected support by least squares and accepts
/// the refit only when it is feasible and does not worsen the weighted
/// objective, which snaps near-converged iterates onto the exact optimum
/// for exactly sparse instances.
fn solve_splitting(
    projector: &AffineProjector,
    weights: Option<&DVector<f64>>,
    cfg: &SolverConfig,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    if let Some(w) = weights {
        if w.len() != projector.a.ncols() || !w.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite, nonnegative, of length n".into(),
            ));
        }
    }
    let n = projector.a.ncols();
    let m = projector.a.nrows();
    let rho = cfg.penalty;
    let thresholds = match weights {
        Some(w) => w / rho,
        None => DVector::from_element(n, 1.0 / rho),
    };
    let y_norm = projector.y.norm();
    let feas_tol = cfg.feasibility_tol(y_norm);

    let mut z = DVector::<f64>::zeros(n);
    let mut u = DVector::<f64>::zeros(n);
    let mut z_new = DVector::<f64>::zeros(n);
    let mut x_last = DVector::<f64>::zeros(n);
    let mut status = SolverStatus::MaxIters;
    let mut iterations = cfg.max_iters;
    let mut dual_residual = f64::INFINITY;
    let mut primal_residual;

    for iter in 1..=cfg.max_iters {
        let v = &z - &u;
        let x = projector.project(&v);
        let relaxed = &x + &u;
        soft_threshold_into(&relaxed, &thresholds, &mut z_new);
        u += &x - &z_new;

        dual_residual = rho * (&z_new - &z).norm();
        std::mem::swap(&mut z, &mut z_new);

        let mut done = false;
        let dual_ok = dual_residual <= cfg.abs_tol + cfg.rel_tol * rho * u.norm();
        if dual_ok {
            let split_gap = (&x - &z).norm();
            if split_gap <= cfg.abs_tol + cfg.rel_tol * x.norm().max(z.norm()) {
                // Cheap gates passed; confirm true feasibility of the
                // sparse iterate before declaring convergence.
                let primal = (&projector.a * &z - &projector.y).norm();
                if primal <= feas_tol {
                    status = SolverStatus::Converged;
                    iterations = iter;
                    done = true;
                }
            }
        }
        x_last = x;
        if done {
            break;
        }
    }

    primal_residual = (&projector.a * &z - &projector.y).norm();

    // Support polishing: refit the detected support by least squares. The
    // refit is accepted when it is feasible and its weighted objective is
    // no worse than the projected iterate's (the projected iterate is the
    // exactly feasible point the comparison must be made against; the
    // thresholded iterate trades a little feasibility for objective and
    // would under-count).
    let support: Vec<usize> =
        (0..n).filter(|&i| z[i].abs() > cfg.support_tol).collect();
    if !support.is_empty() && support.len() <= m {
        if let Some((coef, residual)) = least_squares_on(&projector.a, &projector.y, &support) {
            let mut candidate = DVector::zeros(n);
            for (i, &j) in support.iter().enumerate() {
                candidate[j] = coef[i];
            }
            let obj_c = weighted_l1(&candidate, weights);
            let obj_z = weighted_l1(&z, weights);
            let obj_x = weighted_l1(&x_last, weights);
            let bar = obj_z.max(obj_x);
            if residual <= feas_tol && obj_c <= bar + 1e-9 * (1.0 + bar) {
                z = candidate;
                primal_residual = residual;
                status = SolverStatus::Converged;
            }
        }
    }

    Ok(RecoveryResult {
        objective: z.iter().map(|v| v.abs()).sum(),
        theta_hat: CoefficientVector::new(z)?,
        status,
        iterations,
        primal_residual,
        dual_residual,
    })
}

/// Basis pursuit: `min ||theta||_1  s.t.  A theta = y`.
pub fn basis_pursuit(p: &RecoveryProblem, cfg: &SolverConfig) -> Result<RecoveryResult> {
    let projector = AffineProjector::new(&p.a, &p.y)?;
    solve_splitting(&projector, None, cfg)
}

/// Iteratively reweighted l1: round 1 is plain basis pursuit, each later
/// round solves `min sum w_i |theta_i|  s.t.  A theta = y` with
/// `w_i = 1 / (|theta_i^(prev)| + epsilon)`. Returns the final round.
///
/// With `rounds = 1` the output is bit-identical to [`basis_pursuit`].
pub fn reweighted_l1(
    p: &RecoveryProblem,
    rounds: usize,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<RecoveryResult> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("rounds must be >= 1".into()));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let projector = AffineProjector::new(&p.a, &p.y)?;
    let first = solve_splitting(&projector, None, cfg)?;
    reweight_rounds(&projector, first, rounds, epsilon, cfg)
}

/// Reweighted l1 with the documented default epsilon: fixed across rounds
/// at `0.1 * max |theta_i|` of the round-1 basis pursuit solution.
pub fn reweighted_l1_auto(
    p: &RecoveryProblem,
    rounds: usize,
    cfg: &SolverConfig,
) -> Result<RecoveryResult> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("rounds must be >= 1".into()));
    }
    let projector = AffineProjector::new(&p.a, &p.y)?;
    let first = solve_splitting(&projector, None, cfg)?;
    let epsilon = 0.1 * first.theta_hat.coeffs().amax();
    if epsilon == 0.0 {
        // Zero solution: nothing to reweight.
        return Ok(first);
    }
    reweight_rounds(&projector, first, rounds, epsilon, cfg)
}

fn reweight_rounds(
    projector: &AffineProjector,
    first: RecoveryResult,
    rounds: usize,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<RecoveryResult> {
    let mut current = first;
    for _ in 1..rounds {
        let weights = DVector::from_fn(current.theta_hat.len(), |i, _| {
            1.0 / (current.theta_hat.coeffs()[i].abs() + epsilon)
        });
        current = solve_splitting(projector, Some(&weights), cfg)?;
    }
    Ok(current)
}

/// Orthogonal matching pursuit: greedily selects the column most
/// correlated with the residual (normalized for selection), then refits y
/// by least squares on the selected support. Stops after `k_max`
/// selections or when the residual norm reaches `abs_tol`.
pub fn omp(p: &RecoveryProblem, k_max: usize, cfg: &SolverConfig) -> Result<RecoveryResult> {
    cfg.validate()?;
    if k_max == 0 || k_max > p.m() {
        return Err(Error::InvalidArgument(format!(
            "k_max must satisfy 1 <= k_max <= m, got k_max={k_max}, m={}",
            p.m()
        )));
    }
    let (a, y, n) = (&p.a, &p.y, p.n());
    let col_norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let norm_floor = f64::EPSILON * col_norms.iter().cloned().fold(1.0, f64::max);

    let mut support: Vec<usize> = Vec::new();
    let mut selected = vec![false; n];
    let mut coef = DVector::<f64>::zeros(0);
    let mut residual = y.clone();
    let mut status = SolverStatus::MaxIters;
    let mut iterations = 0;

    loop {
        if residual.norm() <= cfg.abs_tol {
            status = SolverStatus::Converged;
            break;
        }
        if support.len() == k_max {
            break;
        }
        let correlations = a.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if col_norms[j] <= norm_floor {
                continue;
            }
            let score = correlations[j].abs() / col_norms[j];
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let (pick, score) = match best {
            Some(b) => b,
            None => break,
        };
        if score == 0.0 || selected[pick] {
            // Degenerate re-selection or an orthogonal residual: stop
            // rather than loop.
            status = SolverStatus::Converged;
            break;
        }
        selected[pick] = true;
        support.push(pick);
        match least_squares_on(a, y, &support) {
            Some((c, _)) => {
                residual = y - a.select_columns(support.iter()) * &c;
                coef = c;
            }
            None => {
                support.pop();
                selected[pick] = false;
                status = SolverStatus::Converged;
                break;
            }
        }
        iterations += 1;
    }

    let mut theta = DVector::zeros(n);
    for (i, &j) in support.iter().enumerate() {
        theta[j] = coef[i];
    }
    Ok(RecoveryResult {
        objective: theta.iter().filter(|v| v.abs() > cfg.support_tol).count() as f64,
        theta_hat: CoefficientVector::new(theta)?,
        status,
        iterations,
        primal_residual: residual.norm(),
        dual_residual: 0.0,
    })
}

/// Exhaustive l0 solver: enumerates every size-k support in lexicographic
/// order, least-squares fits y on each, and returns the support with the
/// smallest residual (earliest support wins ties). Guarded by the
/// combinatorial budget `C(n, k) <= 10^6`.
pub fn l0_oracle(p: &RecoveryProblem, k: usize, cfg: &SolverConfig) -> Result<RecoveryResult> {
    cfg.validate()?;
    if k == 0 || k > p.m() {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k <= m, got k={k}, m={}",
            p.m()
        )));
    }
    let n = p.n();
    let count = binomial_capped(n, k, ENUMERATION_BUDGET).ok_or_else(|| {
        Error::InstanceTooLarge(format!(
            "C({n}, {k}) exceeds the enumeration budget of {ENUMERATION_BUDGET}"
        ))
    })?;
    let mut best: Option<(f64, Vec<usize>, DVector<f64>)> = None;
    for_each_combination(n, k, |support| {
        if let Some((coef, residual)) = least_squares_on(&p.a, &p.y, support) {
            let better = best.as_ref().map_or(true, |(r, _, _)| residual < *r);
            if better {
                best = Some((residual, support.to_vec(), coef));
            }
        }
    });
    let (residual, support, coef) = best.ok_or_else(|| {
        Error::InfeasibleFactorization("every candidate support was numerically singular".into())
    })?;
    let mut theta = DVector::zeros(n);
    for (i, &j) in support.iter().enumerate() {
        theta[j] = coef[i];
    }
    let status = if residual <= cfg.abs_tol {
        SolverStatus::Converged
    } else {
        SolverStatus::Infeasible
    };
    Ok(RecoveryResult {
        objective: theta.iter().filter(|v| v.abs() > cfg.support_tol).count() as f64,
        theta_hat: CoefficientVector::new(theta)?,
        status,
        iterations: count as usize,
        primal_residual: residual,
        dual_residual: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use crate::sensing::{generate_matrix, MatrixKind};

    fn gaussian_problem(
        n: usize,
        m: usize,
        k: usize,
        seed: u64,
    ) -> (RecoveryProblem, DVector<f64>) {
        let mut stream = SeedStream::new(seed);
        let phi = generate_matrix(MatrixKind::Gaussian, m, n, stream.next_u64(), 1.0 / (m as f64).sqrt())
            .unwrap();
        let support = stream.sample_distinct(k, n);
        let mut theta = DVector::zeros(n);
        for &j in &support {
            theta[j] = stream.sign() * (1.0 + stream.uniform());
        }
        let y = phi.entries() * &theta;
        (RecoveryProblem::new(phi.entries().clone(), y).unwrap(), theta)
    }

    #[test]
    fn determined_system_recovers_unique_point() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![4.0, 3.0]);
        let p = RecoveryProblem::new(a, y).unwrap();
        let res = basis_pursuit(&p, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolverStatus::Converged);
        assert!((res.theta_hat.coeffs()[0] - 2.0).abs() < 1e-9);
        assert!((res.theta_hat.coeffs()[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_measurements_give_zero_solution() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 0.0, 2.0]);
        let y = DVector::zeros(2);
        let p = RecoveryProblem::new(a, y).unwrap();
        let res = basis_pursuit(&p, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolverStatus::Converged);
        assert_eq!(res.iterations, 1);
        assert!(res.theta_hat.coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn basis_pursuit_matches_l0_oracle_on_seeded_instance() {
        let cfg = SolverConfig::default();
        let (p, theta_true) = gaussian_problem(20, 10, 3, 102);
        let bp = basis_pursuit(&p, &cfg).unwrap();
        let l0 = l0_oracle(&p, 3, &cfg).unwrap();
        assert_eq!(bp.status, SolverStatus::Converged);
        assert_eq!(l0.status, SolverStatus::Converged);
        assert_eq!(
            bp.theta_hat.support(cfg.support_tol),
            l0.theta_hat.support(cfg.support_tol)
        );
        let diff = (bp.theta_hat.coeffs() - l0.theta_hat.coeffs()).amax();
        assert!(diff < 1e-5, "diff {diff}");
        assert!((bp.theta_hat.coeffs() - &theta_true).amax() < 1e-6);
    }

    #[test]
    fn converged_results_are_feasible() {
        let cfg = SolverConfig::default();
        for seed in 0..20u64 {
            let (p, _) = gaussian_problem(32, 12, 4, 7000 + seed);
            let res = basis_pursuit(&p, &cfg).unwrap();
            if res.status == SolverStatus::Converged {
                let tol = cfg.feasibility_tol(p.measurements().norm());
                assert!(res.primal_residual <= tol, "seed {seed}: {}", res.primal_residual);
            }
        }
    }

    #[test]
    fn l1_objective_is_locally_optimal_under_null_space_moves() {
        let cfg = SolverConfig::default();
        let (p, _) = gaussian_problem(24, 10, 3, 5150);
        let res = basis_pursuit(&p, &cfg).unwrap();
        assert_eq!(res.status, SolverStatus::Converged);
        let projector = AffineProjector::new(&p.a, &DVector::zeros(p.m())).unwrap();
        let mut stream = SeedStream::new(99);
        for trial in 0..1000 {
            let g = DVector::from_fn(p.n(), |_, _| stream.normal());
            let null_dir = projector.project(&g);
            let scale = 10f64.powf(-3.0 + 3.0 * stream.uniform());
            let candidate = res.theta_hat.coeffs() + scale * null_dir;
            let cand_l1: f64 = candidate.iter().map(|v| v.abs()).sum();
            assert!(
                cand_l1 >= res.objective - 1e-5,
                "trial {trial}: candidate l1 {cand_l1} beats {}",
                res.objective
            );
        }
    }

    #[test]
    fn basis_pursuit_is_scale_equivariant() {
        let cfg = SolverConfig::default();
        let (p, _) = gaussian_problem(30, 12, 4, 321);
        let base = basis_pursuit(&p, &cfg).unwrap();
        let scaled_problem =
            RecoveryProblem::new(7.0 * p.a.clone(), 7.0 * p.y.clone()).unwrap();
        let scaled = basis_pursuit(&scaled_problem, &cfg).unwrap();
        let diff = (base.theta_hat.coeffs() - scaled.theta_hat.coeffs()).amax();
        assert!(diff < 1e-8, "diff {diff}");
    }

    #[test]
    fn rank_deficient_operator_is_a_hard_error() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let p = RecoveryProblem::new(a, y).unwrap();
        assert!(matches!(
            basis_pursuit(&p, &SolverConfig::default()),
            Err(Error::InfeasibleFactorization(_))
        ));
    }

    #[test]
    fn qr_gram_fallback_matches_cholesky() {
        let (p, _) = gaussian_problem(16, 6, 2, 88);
        let chol_proj = AffineProjector::new(&p.a, &p.y).unwrap();
        assert!(matches!(chol_proj.factor, GramFactor::Chol(_)));
        // Force the QR path and compare gram solves.
        let (_, r, perm) = p.a.transpose().col_piv_qr().unpack();
        let qr_proj = AffineProjector {
            a: p.a.clone(),
            y: p.y.clone(),
            factor: GramFactor::Qr { r, p: perm },
        };
        let mut stream = SeedStream::new(13);
        for _ in 0..5 {
            let b = DVector::from_fn(p.m(), |_, _| stream.normal());
            let diff = (chol_proj.solve_gram(&b) - qr_proj.solve_gram(&b)).amax();
            assert!(diff < 1e-9, "gram solve mismatch {diff}");
        }
    }

    #[test]
    fn max_iters_is_reported_not_errored() {
        let cfg = SolverConfig { max_iters: 3, ..SolverConfig::default() };
        let (p, _) = gaussian_problem(40, 12, 4, 9);
        let res = basis_pursuit(&p, &cfg).unwrap();
        assert_eq!(res.status, SolverStatus::MaxIters);
        assert_eq!(res.iterations, 3);
    }

    #[test]
    fn reweighted_single_round_is_bitwise_basis_pursuit() {
        let cfg = SolverConfig::default();
        let (p, _) = gaussian_problem(24, 10, 3, 17);
        let bp = basis_pursuit(&p, &cfg).unwrap();
        let rw = reweighted_l1(&p, 1, 0.1, &cfg).unwrap();
        assert_eq!(bp.theta_hat.coeffs(), rw.theta_hat.coeffs());
        assert_eq!(bp.iterations, rw.iterations);
        assert_eq!(bp.primal_residual.to_bits(), rw.primal_residual.to_bits());
    }

    #[test]
    fn reweighting_preserves_easy_k1_solutions() {
        let cfg = SolverConfig::default();
        for seed in 0..5u64 {
            let (p, _) = gaussian_problem(16, 8, 1, 400 + seed);
            let bp = basis_pursuit(&p, &cfg).unwrap();
            let rw = reweighted_l1_auto(&p, 4, &cfg).unwrap();
            let diff = (bp.theta_hat.coeffs() - rw.theta_hat.coeffs()).amax();
            assert!(diff < 1e-6, "seed {seed} diff {diff}");
        }
    }

    #[test]
    fn reweighting_matches_or_beats_basis_pursuit_recovery_rate() {
        // Paired Monte-Carlo in the regime where plain l1 starts failing.
        let cfg = SolverConfig::default();
        let mut bp_hits = 0usize;
        let mut rw_hits = 0usize;
        for trial in 0..200u64 {
            let (p, theta_true) = gaussian_problem(64, 20, 8, 20_000 + trial);
            let bp = basis_pursuit(&p, &cfg).unwrap();
            let rw = reweighted_l1_auto(&p, 4, &cfg).unwrap();
            let bp_exact = bp
                .theta_hat
                .support(cfg.support_tol)
                .eq(&CoefficientVector::new(theta_true.clone()).unwrap().support(cfg.support_tol))
                && (bp.theta_hat.coeffs() - &theta_true).amax() < 1e-4;
            let rw_exact = rw
                .theta_hat
                .support(cfg.support_tol)
                .eq(&CoefficientVector::new(theta_true.clone()).unwrap().support(cfg.support_tol))
                && (rw.theta_hat.coeffs() - &theta_true).amax() < 1e-4;
            bp_hits += bp_exact as usize;
            rw_hits += rw_exact as usize;
        }
        assert!(
            rw_hits >= bp_hits,
            "reweighting recovered {rw_hits}/200 vs basis pursuit {bp_hits}/200"
        );
    }

    #[test]
    fn omp_on_orthogonal_columns_is_exact_greedy() {
        let a = DMatrix::<f64>::identity(4, 4);
        let y = DVector::from_vec(vec![0.0, 7.0, 0.0, -2.0]);
        let p = RecoveryProblem::new(a, y).unwrap();
        let res = omp(&p, 2, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolverStatus::Converged);
        assert_eq!(res.iterations, 2);
        let expected = DVector::from_vec(vec![0.0, 7.0, 0.0, -2.0]);
        assert!((res.theta_hat.coeffs() - expected).amax() < 1e-12);
        assert_eq!(res.theta_hat.support(1e-6), vec![1, 3]);
        assert_eq!(res.objective, 2.0);
    }

    #[test]
    fn omp_recovers_separated_magnitudes_and_matches_l0() {
        let cfg = SolverConfig::default();
        let mut stream = SeedStream::new(2024);
        let phi = generate_matrix(MatrixKind::Gaussian, 12, 20, stream.next_u64(), 1.0).unwrap();
        let support = stream.sample_distinct(3, 20);
        let mut theta = DVector::zeros(20);
        // Consecutive magnitude ratio >= 10 keeps the greedy path safe.
        for (rank, &j) in support.iter().enumerate() {
            theta[j] = stream.sign() * 10f64.powi(2 - rank as i32);
        }
        let y = phi.entries() * &theta;
        let p = RecoveryProblem::new(phi.entries().clone(), y).unwrap();
        let greedy = omp(&p, 3, &cfg).unwrap();
        let oracle = l0_oracle(&p, 3, &cfg).unwrap();
        assert_eq!(
            greedy.theta_hat.support(cfg.support_tol),
            oracle.theta_hat.support(cfg.support_tol)
        );
        assert!((greedy.theta_hat.coeffs() - &theta).amax() < 1e-8);
    }

    #[test]
    fn omp_residual_is_orthogonal_to_selected_span() {
        let cfg = SolverConfig::default();
        let (p, _) = gaussian_problem(30, 14, 5, 808);
        let res = omp(&p, 5, &cfg).unwrap();
        let support = res.theta_hat.support(cfg.support_tol);
        let residual = p.measurements() - p.operator() * res.theta_hat.coeffs();
        for j in support {
            let dot = p.operator().column(j).dot(&residual);
            assert!(dot.abs() < 1e-8, "column {j} correlation {dot}");
        }
    }

    #[test]
    fn omp_residual_decreases_monotonically() {
        // 100 seeded random problems; re-run OMP step by step via k_max.
        let cfg = SolverConfig::default();
        for trial in 0..100u64 {
            let (p, _) = gaussian_problem(24, 10, 4, 31_000 + trial);
            let mut last = p.measurements().norm();
            for k in 1..=5usize {
                let res = omp(&p, k, &cfg).unwrap();
                assert!(
                    res.primal_residual < last + 1e-12,
                    "trial {trial} k={k}: {} !< {last}",
                    res.primal_residual
                );
                if res.iterations == k {
                    assert!(res.primal_residual < last - 1e-12 || last < 1e-9);
                }
                last = res.primal_residual;
            }
        }
    }

    #[test]
    fn l0_oracle_recovers_planted_support() {
        let cfg = SolverConfig::default();
        let (p, theta_true) = gaussian_problem(15, 8, 2, 55);
        let res = l0_oracle(&p, 2, &cfg).unwrap();
        assert_eq!(res.status, SolverStatus::Converged);
        assert!((res.theta_hat.coeffs() - &theta_true).amax() < 1e-8);
    }

    #[test]
    fn l0_oracle_full_support_solves_invertible_system() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, 0.5, 1.0, 0.0, 3.0]);
        let y = DVector::from_vec(vec![3.0, 1.5, 4.0]);
        let p = RecoveryProblem::new(a.clone(), y.clone()).unwrap();
        let res = l0_oracle(&p, 3, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolverStatus::Converged);
        assert!(res.primal_residual < 1e-10);
        let direct = a.lu().solve(&y).unwrap();
        assert!((res.theta_hat.coeffs() - direct).amax() < 1e-9);
    }

    #[test]
    fn l0_oracle_zero_measurements_pick_first_support() {
        let (p, _) = gaussian_problem(10, 5, 2, 3);
        let zero_p = RecoveryProblem::new(p.a.clone(), DVector::zeros(5)).unwrap();
        let res = l0_oracle(&zero_p, 2, &SolverConfig::default()).unwrap();
        assert_eq!(res.status, SolverStatus::Converged);
        assert!(res.theta_hat.coeffs().iter().all(|&v| v == 0.0));
        assert!(res.primal_residual < 1e-12);
    }

    #[test]
    fn l0_oracle_guards_budget_and_k() {
        let (p, _) = gaussian_problem(64, 32, 4, 4);
        assert!(matches!(
            l0_oracle(&p, 10, &SolverConfig::default()),
            Err(Error::InstanceTooLarge(_))
        ));
        let (small, _) = gaussian_problem(8, 4, 2, 4);
        assert!(matches!(
            l0_oracle(&small, 5, &SolverConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn problem_construction_validates() {
        assert!(RecoveryProblem::new(DMatrix::zeros(3, 2), DVector::zeros(3)).is_err());
        assert!(RecoveryProblem::new(DMatrix::zeros(2, 3), DVector::zeros(3)).is_err());
        let mut bad = DMatrix::<f64>::zeros(2, 3);
        bad[(0, 0)] = f64::NAN;
        assert!(RecoveryProblem::new(bad, DVector::zeros(2)).is_err());
    }
}

