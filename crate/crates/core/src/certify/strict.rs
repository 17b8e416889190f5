//! Strict conjugate phase retrievability of complex frames.
//!
//! For a complex frame, `|<y, phi>| = |<conj y, phi>|` for every frame
//! vector exactly when the unknowns `s_jk = Im(y_j conj y_k)` solve
//!
//! ```text
//! sum_{j<k} s_jk Im(conj(phi_j) phi_k) = 0     for every phi in the frame
//! ```
//!
//! (the "Im-sum" identity). Such a `y` outside the phased-real vectors is a
//! signal the frame cannot tell apart from its conjugate, which makes a
//! conjugate retrievable frame strictly so. Solutions are null vectors of the
//! Im-gram `G` that, read as antisymmetric matrices, have rank at most two.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::algebra::{is_phased_real, ComplexSignal};
use crate::error::Result;
use crate::frames::ComplexFrame;
use crate::linalg;
use crate::rng::{normal, stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StrictVerdict {
    StrictlyCPR,
    ComplexPRCandidate,
    /// Never produced by [`strict_report`]; set by callers that combine the
    /// report with a certificate refuting retrievability.
    NotCPR,
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrictReport {
    pub verdict: StrictVerdict,
    pub witness_y: Option<ComplexSignal>,
    pub im_gram_nullity: usize,
}

#[derive(Debug, Clone)]
pub struct StrictOptions {
    /// Relative tolerance for the Im-gram nullspace and witness checks.
    pub tol: f64,
    pub seed: u64,
    /// Alternating projection restarts for `M >= 4`.
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for StrictOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            seed: 0,
            restarts: 20,
            max_iter: 500,
        }
    }
}

/// `sum_{j<k} Im(x_j conj x_k) Im(conj(phi_j) phi_k)`; the identity
/// `|<x,phi>|^2 - |<conj x,phi>|^2 = -4 im_sum(x, phi)` holds.
pub fn im_sum(x: &ComplexSignal, phi: &[Complex64]) -> f64 {
    let e = x.entries();
    let m = e.len();
    let mut s = 0.0;
    for j in 0..m {
        for k in (j + 1)..m {
            s += (e[j] * e[k].conj()).im * (phi[j].conj() * phi[k]).im;
        }
    }
    s
}

/// The `N x M(M-1)/2` Im-gram with rows `(Im(conj(phi_jn) phi_kn))_{j<k}`.
pub fn im_gram(frame: &ComplexFrame) -> DMatrix<f64> {
    let m = frame.m();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|j| ((j + 1)..m).map(move |k| (j, k))).collect();
    DMatrix::from_fn(frame.n(), pairs.len(), |n, c| {
        let phi = frame.column(n);
        let (j, k) = pairs[c];
        (phi[j].conj() * phi[k]).im
    })
}

fn antisym(m: usize, s: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(m, m);
    let mut c = 0;
    for j in 0..m {
        for k in (j + 1)..m {
            a[(j, k)] = s[c];
            a[(k, j)] = -s[c];
            c += 1;
        }
    }
    a
}

fn upper_of(a: &DMatrix<f64>) -> Vec<f64> {
    let m = a.nrows();
    (0..m).flat_map(|j| ((j + 1)..m).map(move |k| (j, k))).map(|(j, k)| a[(j, k)]).collect()
}

/// Best rank-2 approximation `P S P` of an antisymmetric `S`, where `P`
/// projects onto the top invariant plane. Also returns `(p, sigma)` with `p`
/// the leading right singular vector.
fn rank2_part(s: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, f64) {
    let eig = linalg::sym_eigen(&(s.transpose() * s));
    let p = eig.vectors.column(0).into_owned();
    let sigma = eig.values[0].max(0.0).sqrt();
    if sigma == 0.0 {
        return (DMatrix::zeros(s.nrows(), s.ncols()), p, 0.0);
    }
    let q = -(s * &p) / sigma;
    let proj = &p * p.transpose() + &q * q.transpose();
    (&proj * s * &proj, p, sigma)
}

/// `y = a + ib` with `Im(y_j conj y_k) = b_j a_k - a_j b_k = S_jk` for a
/// rank-2 antisymmetric `S = sigma (q p^T - p q^T)`.
fn factor(s: &DMatrix<f64>) -> Option<ComplexSignal> {
    let (_, p, sigma) = rank2_part(s);
    if sigma == 0.0 {
        return None;
    }
    let q = -(s * &p) / sigma;
    let r = sigma.sqrt();
    let entries = (0..s.nrows()).map(|t| Complex64::new(r * q[t], r * p[t])).collect();
    ComplexSignal::new(entries).ok()
}

fn verified(frame: &ComplexFrame, y: &ComplexSignal, tol: f64) -> bool {
    if is_phased_real(y, tol) {
        return false;
    }
    let ny = y.norm_sqr();
    frame.columns().all(|phi| {
        let nphi: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
        im_sum(y, phi).abs() <= tol * ny * nphi
    })
}

/// Classifies a complex frame by whether some non-phased-real `y` has the
/// same measurements as its conjugate.
///
/// * real (or phased-real) frames: `G = 0`, and `y = (1, i, 0, ..)` works,
///   so such a frame is strictly CPR whenever it is CPR;
/// * trivial nullspace: no such `y`, the frame is a candidate for complex
///   phase retrieval;
/// * `M = 2, 3`: every nonzero antisymmetric matrix has rank 2, so any null
///   vector yields `y`;
/// * `M >= 4`: alternating projection between the nullspace and rank-2
///   antisymmetric matrices; failure leaves the question undecided.
///
/// The report never asserts retrievability itself.
pub fn strict_report(frame: &ComplexFrame, options: &StrictOptions) -> Result<StrictReport> {
    let m = frame.m();
    let tol = options.tol;
    if m == 1 {
        // every signal in C^1 is phased real
        return Ok(StrictReport {
            verdict: StrictVerdict::ComplexPRCandidate,
            witness_y: None,
            im_gram_nullity: 0,
        });
    }
    let g = im_gram(frame);
    let scale = frame
        .columns()
        .map(|phi| phi.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    let (sigmas, v) = linalg::svd_right(&g);
    let null: Vec<DVector<f64>> = sigmas
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol * scale)
        .map(|(k, _)| v.column(k).into_owned())
        .collect();
    let nullity = null.len();
    let mut report = StrictReport {
        verdict: StrictVerdict::ComplexPRCandidate,
        witness_y: None,
        im_gram_nullity: nullity,
    };
    if nullity == 0 {
        return Ok(report);
    }

    let mut candidate = None;
    if nullity == g.ncols() {
        let mut e = vec![Complex64::new(0.0, 0.0); m];
        e[0] = Complex64::new(1.0, 0.0);
        e[1] = Complex64::new(0.0, 1.0);
        candidate = Some(ComplexSignal::new(e)?);
    } else if m <= 3 {
        let s: Vec<f64> = null[0].iter().copied().collect();
        candidate = factor(&antisym(m, &s));
    } else {
        let basis = DMatrix::from_columns(&null);
        let mut rng = stream_rng(options.seed, streams::STRICT);
        'restarts: for _ in 0..options.restarts {
            let coeffs = DVector::from_fn(nullity, |_, _| normal(&mut rng));
            let mut s = &basis * coeffs;
            for _ in 0..options.max_iter {
                let norm = s.norm();
                if norm == 0.0 {
                    continue 'restarts;
                }
                s /= norm;
                let a = antisym(m, s.as_slice());
                let (r2, _, _) = rank2_part(&a);
                let r2v = DVector::from_vec(upper_of(&r2));
                if (&s - &r2v).norm() <= tol {
                    candidate = factor(&a);
                    break 'restarts;
                }
                s = &basis * (basis.transpose() * r2v);
            }
        }
    }

    match candidate {
        Some(y) if verified(frame, &y, tol) => {
            report.verdict = StrictVerdict::StrictlyCPR;
            report.witness_y = Some(y);
        }
        _ => report.verdict = StrictVerdict::Undecided,
    }
    Ok(report)
}
