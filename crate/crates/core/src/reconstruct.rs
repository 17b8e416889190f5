//! Recovering a signal from `b_n = |<x, phi_n>|^2` up to global phase and
//! conjugation.
//!
//! When `Omega` is injective the lift `Q = Re(xx*)` is the unique solution of
//! a linear system and `x` is read off a rank-2 factorization. Below that
//! size the affine solution set is intersected with the rank-2 PSD matrices
//! by alternating projections, followed by a Gauss-Newton polish on `x`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{canonical_rep, real_lift, ComplexSignal, SymmetricLift};
use crate::error::{Error, Result};
use crate::frames::RealFrame;
use crate::lift::{default_rank_tol, devectorize, lift_len, measure_clean, omega_matrix, vectorize, LiftVector, MeasurementVector};
use crate::linalg::{self, LeastSquares, LmOptions, LmWorkspace};
use crate::rng::{normal, stream_rng, streams};

/// Default relative tolerance on negative eigenvalues in [`factor_rank2`].
pub const PSD_TOL: f64 = 1e-8;
/// Tolerance passed to [`canonical_rep`] for estimates.
pub const CANON_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    /// Canonical representative of the recovered class.
    pub estimate: ComplexSignal,
    /// `||measure(estimate) - b|| / ||b||`.
    pub lift_residual: f64,
    /// Eigenvalue mass (relative, by absolute value) dropped when truncating
    /// the fitted lift to rank two.
    pub rank_excess: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Affine-set distances of the alternating projection run behind the
    /// estimate, when requested.
    pub distances: Vec<f64>,
}

/// Rank-2 PSD truncation: top two eigenpairs with eigenvalues clamped at 0.
/// Eigenvalues below `default_rank_tol(m)` relative to the largest count as
/// zero, so exactly real lifts factor into phased-real signals.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub lambda: [f64; 2],
    pub vectors: [DVector<f64>; 2],
    /// All eigenvalues except the two kept ones, descending.
    pub discarded: Vec<f64>,
    pub min_eig: f64,
}

pub fn truncate_rank2(q: &SymmetricLift) -> Truncation {
    let m = q.m();
    let eig = linalg::sym_eigen(&q.to_matrix());
    let col = |k: usize| {
        if k < m {
            eig.vectors.column(k).into_owned()
        } else {
            DVector::zeros(m)
        }
    };
    // eigenvalues at round-off level relative to the largest are zero
    let floor = default_rank_tol(m) * eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let lam = |k: usize| {
        let v = eig.values.get(k).copied().unwrap_or(0.0);
        if v > floor {
            v
        } else {
            0.0
        }
    };
    let mut discarded: Vec<f64> = eig.values.iter().skip(2).copied().collect();
    for k in 0..2.min(m) {
        if lam(k) == 0.0 {
            discarded.push(eig.values[k]);
        }
    }
    Truncation {
        lambda: [lam(0), lam(1)],
        vectors: [col(0), col(1)],
        discarded,
        min_eig: *eig.values.last().unwrap(),
    }
}

impl Truncation {
    pub fn signal(&self) -> ComplexSignal {
        let (r1, r2) = (self.lambda[0].sqrt(), self.lambda[1].sqrt());
        let entries = (0..self.vectors[0].len())
            .map(|t| Complex64::new(r1 * self.vectors[0][t], r2 * self.vectors[1][t]))
            .collect();
        ComplexSignal::new(entries).expect("finite eigenpairs")
    }

    /// `sum |discarded| / sum |lambda|`, zero for the zero matrix.
    pub fn excess(&self) -> f64 {
        let dropped: f64 = self.discarded.iter().map(|v| v.abs()).sum();
        let kept: f64 = self.lambda.iter().sum();
        let total = dropped + kept;
        if total == 0.0 {
            0.0
        } else {
            dropped / total
        }
    }
}

/// Factors a PSD matrix of rank at most two as `Re(xx*)`:
/// `x = sqrt(l1) u1 + i sqrt(l2) u2`. For other `Q` this gives the best
/// rank-2 PSD approximation. Eigenvalues below `-tol ||Q||_F` are an error.
pub fn factor_rank2(q: &SymmetricLift, tol: f64) -> Result<ComplexSignal> {
    let t = truncate_rank2(q);
    let bound = tol * q.frobenius_norm();
    if t.min_eig < -bound {
        return Err(Error::NotPsd {
            min_eig: t.min_eig,
            tol,
        });
    }
    Ok(t.signal())
}

/// `||measure(frame, xhat) - b|| / max(||b||, eps)`.
pub fn residual(frame: &RealFrame, xhat: &ComplexSignal, b: &MeasurementVector) -> Result<f64> {
    check_sizes(frame, b)?;
    let bx = measure_clean(frame, xhat)?;
    let diff: Vec<f64> = bx.values.iter().zip(&b.values).map(|(u, v)| u - v).collect();
    Ok(linalg::vec_norm(&diff) / b.norm().max(f64::EPSILON))
}

fn check_sizes(frame: &RealFrame, b: &MeasurementVector) -> Result<()> {
    if b.n() != frame.n() {
        return Err(Error::DimensionMismatch {
            what: "measurement count vs frame columns",
            expected: frame.n(),
            got: b.n(),
        });
    }
    b.validate()
}

/// Least-squares inversion of the lift.
///
/// The PSD check in [`factor_rank2`] uses `tol`, widened for noisy data to
/// three times the eigenvalue error expected from the recorded noise level:
/// `3 sqrt(2) sigma mean(b) sqrt(N) / (sigma_min(Omega) ||Q||_F)`.
pub fn reconstruct_linear(
    frame: &RealFrame,
    b: &MeasurementVector,
    tol: f64,
) -> Result<ReconstructionResult> {
    check_sizes(frame, b)?;
    let omega = omega_matrix(frame);
    let k = lift_len(frame.m());
    let sigmas = linalg::singular_values(omega.matrix());
    let rank = linalg::rank_from_singular_values(&sigmas, RANK_TOL);
    if rank < k {
        return Err(Error::Underdetermined { rank, unknowns: k });
    }
    let svd = omega.matrix().clone().svd(true, true);
    let v = svd
        .solve(&linalg::to_dvector(&b.values), 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let q = devectorize(&LiftVector::new(v.iter().copied().collect())?);

    let mut psd_tol = tol;
    if let Some(sigma) = b.noise_sigma.filter(|s| *s > 0.0) {
        let n = b.n() as f64;
        let mean = b.values.iter().sum::<f64>() / n;
        let smin = sigmas[k - 1];
        let qn = q.frobenius_norm().max(f64::MIN_POSITIVE);
        psd_tol = psd_tol.max(3.0 * 2f64.sqrt() * sigma * mean.abs() * n.sqrt() / (smin * qn));
    }
    let t = truncate_rank2(&q);
    if t.min_eig < -psd_tol * q.frobenius_norm() {
        return Err(Error::NotPsd {
            min_eig: t.min_eig,
            tol: psd_tol,
        });
    }
    let estimate = canonical_rep(&t.signal(), CANON_TOL);
    Ok(ReconstructionResult {
        lift_residual: residual(frame, &estimate, b)?,
        rank_excess: t.excess(),
        estimate,
        iterations: 0,
        converged: true,
        distances: Vec::new(),
    })
}

#[derive(Debug, Clone)]
pub struct AltProjOptions {
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Acceptance: relative lift residual and rank excess at most `tol`.
    pub tol: f64,
    /// Keep the per-iteration affine distances of the returned run.
    pub record_distances: bool,
}

impl Default for AltProjOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            restarts: 50,
            seed: 0,
            tol: 1e-9,
            record_distances: false,
        }
    }
}

/// Lift coordinates scaled so that the Euclidean norm is the Frobenius
/// norm: off-diagonal coefficients carry a factor `sqrt(2)`.
struct Isometric {
    m: usize,
    /// `B = Omega D^{-1}`.
    b_mat: DMatrix<f64>,
    b_pinv: DMatrix<f64>,
    b_ls: DVector<f64>,
}

impl Isometric {
    fn new(frame: &RealFrame, b: &[f64]) -> Self {
        let m = frame.m();
        let mut b_mat = omega_matrix(frame).matrix().clone();
        for mut col in b_mat.column_iter_mut().skip(m) {
            col /= 2f64.sqrt();
        }
        let b_pinv = linalg::pseudo_inverse(&b_mat, RANK_TOL);
        let b_vec = linalg::to_dvector(b);
        let b_ls = &b_mat * (&b_pinv * b_vec);
        Self { m, b_mat, b_pinv, b_ls }
    }

    fn to_lift(&self, u: &DVector<f64>) -> SymmetricLift {
        let mut c: Vec<f64> = u.iter().copied().collect();
        for v in c.iter_mut().skip(self.m) {
            *v /= 2f64.sqrt();
        }
        devectorize(&LiftVector::new(c).expect("lift length"))
    }

    fn from_lift(&self, q: &SymmetricLift) -> DVector<f64> {
        let mut c = vectorize(q).coeffs().to_vec();
        for v in c.iter_mut().skip(self.m) {
            *v *= 2f64.sqrt();
        }
        DVector::from_vec(c)
    }

    fn project_affine(&self, u: &DVector<f64>) -> DVector<f64> {
        u - &self.b_pinv * (&self.b_mat * u - &self.b_ls)
    }

    fn project_rank(&self, u: &DVector<f64>) -> (DVector<f64>, Truncation) {
        let t = truncate_rank2(&self.to_lift(u));
        (self.from_lift(&real_lift(&t.signal())), t)
    }
}

struct Polish<'a> {
    columns: Vec<&'a [f64]>,
    b: &'a [f64],
    scale: f64,
    m: usize,
}

impl LeastSquares for Polish<'_> {
    fn n_params(&self) -> usize {
        2 * self.m
    }

    fn n_residuals(&self) -> usize {
        self.columns.len()
    }

    fn eval(&self, p: &[f64], r: &mut [f64], mut jac: Option<&mut [f64]>) {
        let m = self.m;
        for (n, phi) in self.columns.iter().enumerate() {
            let re: f64 = (0..m).map(|t| phi[t] * p[t]).sum();
            let im: f64 = (0..m).map(|t| phi[t] * p[m + t]).sum();
            r[n] = (re * re + im * im - self.b[n]) / self.scale;
            if let Some(j) = jac.as_deref_mut() {
                let row = &mut j[n * 2 * m..(n + 1) * 2 * m];
                for t in 0..m {
                    row[t] = 2.0 * re * phi[t] / self.scale;
                    row[m + t] = 2.0 * im * phi[t] / self.scale;
                }
            }
        }
    }
}

struct Run {
    estimate: ComplexSignal,
    lift_residual: f64,
    rank_excess: f64,
    iterations: usize,
    converged: bool,
    distances: Vec<f64>,
}

fn run_altproj(
    frame: &RealFrame,
    b: &MeasurementVector,
    iso: &Isometric,
    opts: &AltProjOptions,
    index: usize,
) -> Result<Run> {
    let k = lift_len(iso.m);
    let u_ls = &iso.b_pinv * &iso.b_ls;
    let scale = u_ls.norm().max(f64::MIN_POSITIVE);
    let start = if index == 0 {
        u_ls.clone()
    } else {
        let mut rng = stream_rng(opts.seed, streams::ALTPROJ + index as u64);
        let noise = DVector::from_fn(k, |_, _| normal(&mut rng));
        &u_ls + noise * (scale / (k as f64).sqrt())
    };

    let mut a = iso.project_affine(&start);
    let mut distances = Vec::new();
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    let (mut r, mut trunc) = iso.project_rank(&a);
    while iterations < opts.max_iter {
        iterations += 1;
        a = iso.project_affine(&r);
        let dist = (&r - &a).norm();
        if opts.record_distances {
            distances.push(dist);
        }
        if dist <= 1e-15 * scale || prev - dist < 1e-9 * prev {
            break;
        }
        prev = dist;
        let next = iso.project_rank(&a);
        r = next.0;
        trunc = next.1;
    }

    // polish x on the measurements themselves
    let x0 = trunc.signal();
    let mut p: Vec<f64> = x0.re().into_iter().chain(x0.im()).collect();
    let problem = Polish {
        columns: frame.columns().collect(),
        b: &b.values,
        scale: b.norm().max(f64::MIN_POSITIVE),
        m: iso.m,
    };
    let mut ws = LmWorkspace::default();
    let lm = LmOptions {
        max_iter: 100,
        cost_tol: 1e-32,
        ..LmOptions::default()
    };
    linalg::levenberg_marquardt(&problem, &mut p, &mut ws, &lm);
    let m = iso.m;
    let x = ComplexSignal::from_parts(&p[..m], &p[m..])?;
    let estimate = canonical_rep(&x, CANON_TOL);

    let lift_residual = residual(frame, &estimate, b)?;
    let consistent = iso.project_affine(&iso.from_lift(&real_lift(&estimate)));
    let rank_excess = truncate_rank2(&iso.to_lift(&consistent)).excess();
    Ok(Run {
        converged: lift_residual <= opts.tol && rank_excess <= opts.tol,
        estimate,
        lift_residual,
        rank_excess,
        iterations,
        distances,
    })
}

/// Alternating projections between the affine set `{Omega v = b_ls}` and the
/// rank-2 PSD matrices, multistart.
///
/// `b_ls` is the projection of `b` onto the range of `Omega`, so the affine
/// set is never empty. Restart 0 starts from the minimum-norm affine point,
/// restart `i > 0` from a perturbation drawn from stream `ALTPROJ + i`. The
/// first converged restart by index is returned, otherwise the one with the
/// smallest residual (`converged = false`).
pub fn reconstruct_altproj(
    frame: &RealFrame,
    b: &MeasurementVector,
    opts: &AltProjOptions,
) -> Result<ReconstructionResult> {
    check_sizes(frame, b)?;
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("altproj needs at least one restart".into()));
    }
    let iso = Isometric::new(frame, &b.values);
    let batch = 8 * rayon::current_num_threads().max(1);
    let mut best: Option<Run> = None;
    let mut start = 0;
    while start < opts.restarts {
        let end = (start + batch).min(opts.restarts);
        let runs: Vec<Result<Run>> = (start..end)
            .into_par_iter()
            .map(|i| run_altproj(frame, b, &iso, opts, i))
            .collect();
        for run in runs {
            let run = run?;
            if run.converged {
                return Ok(finish(run));
            }
            if best.as_ref().is_none_or(|bst| run.lift_residual < bst.lift_residual) {
                best = Some(run);
            }
        }
        start = end;
    }
    Ok(finish(best.expect("at least one restart")))
}

fn finish(run: Run) -> ReconstructionResult {
    ReconstructionResult {
        estimate: run.estimate,
        lift_residual: run.lift_residual,
        rank_excess: run.rank_excess,
        iterations: run.iterations,
        converged: run.converged,
        distances: run.distances,
    }
}
