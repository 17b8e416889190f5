//! Deciding conjugate phase retrievability of real frames.
//!
//! A real frame `Phi` is conjugate phase retrievable (CPR) when equal
//! magnitudes `|<x, phi_n>| = |<y, phi_n>|` force `x = e^{it} y` or
//! `x = e^{it} conj(y)`. Through the lift this becomes a question about the
//! kernel of `Omega_Phi` meeting the set of differences `Re(xx* - yy*)`:
//!
//! * a trivial kernel always certifies CPR;
//! * in dimension 3 a nontrivial kernel always yields an explicit
//!   counterexample, so the kernel test is exact;
//! * in dimension 2 CPR is equivalent to the complement property;
//! * fewer than `2M - 1` vectors can never have the complement property,
//!   which is necessary for CPR with real vectors.
//!
//! For `M >= 4` with a nontrivial kernel no exact test is known and the
//! verdict stays [`Verdict::Undecided`] unless a search finds a witness.

mod complement;
mod search;
mod strict;

pub use complement::{
    complement_property, complement_property_r2, ComplementReport, Field, DEFAULT_CP_CAP,
};
pub use search::{falsify_search, SearchOptions, SearchOutcome, SearchStats};
pub use strict::{im_gram, im_sum, strict_report, StrictOptions, StrictReport, StrictVerdict};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{Frame, RealFrame};
use crate::lift::{devectorize, omega_matrix, LiftVector, OmegaMatrix};
use crate::linalg;
use crate::witness::{witness_from_split, witness_general, WitnessPair, ZERO_EIG_TOL};

/// Singular values at or below `KERNEL_TOL * sigma_max` count as null.
pub const KERNEL_TOL: f64 = 1e-10;
/// A square operator certifies when `|det| > DET_TOL * (product of row norms)`.
pub const DET_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CertifiedCPR,
    NotCPR,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Det2,
    Det3,
    KernelInjective,
    ComplementPropertyM2,
    TooFewVectors,
    KernelWitness,
    SearchWitness,
    MonteCarlo,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub verdict: Verdict,
    pub method: Method,
    pub det_value: Option<f64>,
    pub kernel_dim: Option<usize>,
    pub witness: Option<WitnessPair>,
    /// Complement property violation backing a `TooFewVectors` or
    /// `ComplementPropertyM2` rejection.
    pub violating_set: Option<Vec<usize>>,
    pub trials: Option<SearchStats>,
}

impl Certificate {
    fn new(verdict: Verdict, method: Method) -> Self {
        Self {
            verdict,
            method,
            det_value: None,
            kernel_dim: None,
            witness: None,
            violating_set: None,
            trials: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub kernel_tol: f64,
    pub det_tol: f64,
    pub cp_cap: usize,
    /// Run the randomized falsifier on undecided `M >= 4` frames.
    pub search: Option<SearchOptions>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            kernel_tol: KERNEL_TOL,
            det_tol: DET_TOL,
            cp_cap: DEFAULT_CP_CAP,
            search: None,
        }
    }
}

/// Orthonormal basis of the numerical nullspace of `Omega`: right singular
/// vectors with `sigma <= tol * sigma_max` (all of them if `Omega = 0`).
pub fn kernel_basis(omega: &OmegaMatrix, tol: f64) -> Vec<LiftVector> {
    let (sigmas, v) = linalg::svd_right(omega.matrix());
    let smax = sigmas.first().copied().unwrap_or(0.0);
    sigmas
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol * smax || smax == 0.0)
        .map(|(k, _)| LiftVector::new(v.column(k).iter().copied().collect()).expect("lift length"))
        .collect()
}

/// How far a symmetric matrix is from being semidefinite, relative to its
/// Frobenius norm: `min(lambda_max, -lambda_min) / ||Q||_F`.
fn indefiniteness(q: &crate::algebra::SymmetricLift) -> (f64, f64, f64) {
    let norm = q.frobenius_norm();
    let eig = linalg::sym_eigen(&q.to_matrix());
    let hi = eig.values[0];
    let lo = *eig.values.last().unwrap();
    ((hi.min(-lo)) / norm.max(f64::MIN_POSITIVE), lo, hi)
}

/// Builds a counterexample pair from a nontrivial kernel of `Omega_Phi`
/// (`M` in {2, 3}).
///
/// A kernel vector `v` gives `Q_v` with `phi_n^T Q_v phi_n = 0` for every
/// frame vector; since the frame spans, `Q_v` cannot be semidefinite, so it
/// is realizable as `Re(xx* - yy*)` and `(x, y)` have equal measurements.
/// `Q_v` is normalized to unit Frobenius norm. With several kernel vectors
/// the most clearly indefinite basis element (or pairwise sum/difference)
/// is used.
pub fn falsify_exact(frame: &RealFrame, tol: f64) -> Result<WitnessPair> {
    let m = frame.m();
    if m != 2 && m != 3 {
        return Err(Error::WrongDimension(m));
    }
    let kernel = kernel_basis(&omega_matrix(frame), tol);
    witness_from_kernel(&kernel)
}

fn witness_from_kernel(kernel: &[LiftVector]) -> Result<WitnessPair> {
    if kernel.is_empty() {
        return Err(Error::NoKernel);
    }
    let mut candidates: Vec<Vec<f64>> = kernel.iter().map(|v| v.coeffs().to_vec()).collect();
    for i in 0..kernel.len().min(4) {
        for j in (i + 1)..kernel.len().min(4) {
            for sign in [1.0, -1.0] {
                candidates.push(
                    kernel[i].coeffs().iter().zip(kernel[j].coeffs()).map(|(a, b)| a + sign * b).collect(),
                );
            }
        }
    }
    let mut best: Option<(f64, f64, f64, crate::algebra::SymmetricLift)> = None;
    for c in candidates {
        let q = devectorize(&LiftVector::new(c).expect("lift length"));
        let q = q.scaled(1.0 / q.frobenius_norm());
        let (margin, lo, hi) = indefiniteness(&q);
        if best.as_ref().is_none_or(|b| margin > b.0) {
            best = Some((margin, lo, hi, q));
        }
    }
    let (margin, lo, hi, q) = best.expect("at least one candidate");
    if margin <= ZERO_EIG_TOL {
        return Err(Error::IndefinitenessViolation {
            min_eig: lo,
            max_eig: hi,
        });
    }
    witness_general(&q)
}

fn not_cpr_from_kernel(
    frame: &RealFrame,
    omega: &OmegaMatrix,
    kernel: &[LiftVector],
    method: Method,
) -> Result<Certificate> {
    let kernel_owned;
    let kernel = if kernel.is_empty() {
        // determinant below threshold but no singular value below the
        // kernel cutoff: fall back to the smallest singular direction
        let (_, v) = linalg::svd_right(omega.matrix());
        let last = v.ncols() - 1;
        kernel_owned = vec![LiftVector::new(v.column(last).iter().copied().collect())?];
        &kernel_owned[..]
    } else {
        kernel
    };
    let witness = witness_from_kernel(kernel)?;
    let _ = frame;
    let mut cert = Certificate::new(Verdict::NotCPR, method);
    cert.witness = Some(witness);
    Ok(cert)
}

/// Certifies (or refutes) conjugate phase retrievability of a real frame.
///
/// Decision order:
/// 1. `N <= 2M - 2`: the complement property is impossible, so not CPR; the
///    first `M - 1` columns and the rest form a violating split.
/// 2. `M = 2`: exact. Square case by determinant, otherwise by the
///    complement property.
/// 3. `M = 3`: exact. Trivial kernel (or nonzero determinant when square)
///    certifies, a nontrivial kernel yields a witness.
/// 4. `M >= 4`: a trivial kernel certifies; otherwise undecided unless the
///    optional search finds a witness.
pub fn certify(frame: &RealFrame, options: &CertifyOptions) -> Result<Certificate> {
    let m = frame.m();
    let n = frame.n();
    let omega = omega_matrix(frame);
    let kernel = kernel_basis(&omega, options.kernel_tol);
    let det_value = omega.determinant();
    let det_ok = det_value.map(|d| d.abs() > options.det_tol * omega.hadamard_bound());

    let mut cert = if n + 2 <= 2 * m {
        let violating: Vec<usize> = (0..m - 1).collect();
        let mut c = Certificate::new(Verdict::NotCPR, Method::TooFewVectors);
        c.witness = Some(witness_from_split(frame, &violating)?);
        c.violating_set = Some(violating);
        c
    } else if m == 2 {
        if n == 3 {
            if det_ok == Some(true) {
                Certificate::new(Verdict::CertifiedCPR, Method::Det2)
            } else {
                not_cpr_from_kernel(frame, &omega, &kernel, Method::Det2)?
            }
        } else {
            let report = if n <= options.cp_cap {
                complement_property(&Frame::Real(frame.clone()), Field::Real, options.cp_cap)?
            } else {
                let cols: Vec<&[f64]> = frame.columns().collect();
                complement_property_r2(&cols)
            };
            if report.holds {
                Certificate::new(Verdict::CertifiedCPR, Method::ComplementPropertyM2)
            } else {
                let mut c =
                    not_cpr_from_kernel(frame, &omega, &kernel, Method::ComplementPropertyM2)?;
                c.violating_set = report.violating;
                c
            }
        }
    } else if m == 3 {
        if n == 6 {
            if det_ok == Some(true) {
                Certificate::new(Verdict::CertifiedCPR, Method::Det3)
            } else {
                not_cpr_from_kernel(frame, &omega, &kernel, Method::Det3)?
            }
        } else if kernel.is_empty() {
            Certificate::new(Verdict::CertifiedCPR, Method::KernelInjective)
        } else {
            not_cpr_from_kernel(frame, &omega, &kernel, Method::KernelWitness)?
        }
    } else if kernel.is_empty() {
        Certificate::new(Verdict::CertifiedCPR, Method::KernelInjective)
    } else if let Some(search) = &options.search {
        let outcome = falsify_search(frame, search)?;
        let mut c = match outcome.witness {
            Some(w) => {
                let mut c = Certificate::new(Verdict::NotCPR, Method::SearchWitness);
                c.witness = Some(w);
                c
            }
            None => Certificate::new(Verdict::Undecided, Method::MonteCarlo),
        };
        c.trials = Some(outcome.stats);
        c
    } else {
        Certificate::new(Verdict::Undecided, Method::KernelInjective)
    };
    cert.det_value = det_value;
    cert.kernel_dim = Some(kernel.len());
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::conj_class_distance;
    use crate::frames::random_frame;
    use crate::lift::measure_clean;
    use crate::witness::cone_frame;

    fn check_witness(frame: &RealFrame, w: &WitnessPair) {
        let bx = measure_clean(frame, &w.x).unwrap();
        let by = measure_clean(frame, &w.y).unwrap();
        let gap = linalg::vec_norm(
            &bx.values.iter().zip(&by.values).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        assert!(gap <= 1e-9 * bx.norm(), "gap {gap} vs {}", bx.norm());
        assert!(conj_class_distance(&w.x, &w.y).unwrap() >= 0.05);
    }

    #[test]
    fn motivating_frame_is_certified_by_det2() {
        let f = RealFrame::from_rows(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let c = certify(&f, &CertifyOptions::default()).unwrap();
        assert_eq!((c.verdict, c.method), (Verdict::CertifiedCPR, Method::Det2));
        assert!((c.det_value.unwrap().abs() - 2.0).abs() < 1e-12);
        assert_eq!(c.kernel_dim, Some(0));
    }

    #[test]
    fn parallel_columns_are_rejected() {
        let f = RealFrame::from_rows(2, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 0.0]).unwrap();
        let c = certify(&f, &CertifyOptions::default()).unwrap();
        assert_eq!(c.verdict, Verdict::NotCPR);
        check_witness(&f, c.witness.as_ref().unwrap());
    }

    #[test]
    fn cone_frame_is_not_cpr() {
        let f = cone_frame(8, None).unwrap();
        let c = certify(&f, &CertifyOptions::default()).unwrap();
        assert_eq!((c.verdict, c.method), (Verdict::NotCPR, Method::KernelWitness));
        check_witness(&f, c.witness.as_ref().unwrap());
        // three cone vectors: too few for the complement property
        let f3 = cone_frame(3, None).unwrap();
        let c3 = certify(&f3, &CertifyOptions::default()).unwrap();
        assert_eq!((c3.verdict, c3.method), (Verdict::NotCPR, Method::TooFewVectors));
        check_witness(&f3, c3.witness.as_ref().unwrap());
    }

    #[test]
    fn kernel_examples() {
        let f = RealFrame::from_rows(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(kernel_basis(&omega_matrix(&f), KERNEL_TOL).is_empty());
        for seed in 0..10 {
            let f = random_frame(3, 5, seed).unwrap();
            assert!(!kernel_basis(&omega_matrix(&f), KERNEL_TOL).is_empty());
            let g = random_frame(3, 6, seed).unwrap();
            assert!(kernel_basis(&omega_matrix(&g), KERNEL_TOL).is_empty());
        }
    }

    #[test]
    fn falsify_exact_examples() {
        let basis = RealFrame::from_rows(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let w = falsify_exact(&basis, KERNEL_TOL).unwrap();
        // kernel is spanned by (0, 0, 1): Q = [[0, 1], [1, 0]] / sqrt(2)
        let r = w.realized();
        assert!(r.get(0, 0).abs() < 1e-14 && r.get(1, 1).abs() < 1e-14);
        assert!((r.get(0, 1).abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        check_witness(&basis, &w);

        for seed in 0..20 {
            let f = random_frame(3, 5, seed).unwrap();
            let w = falsify_exact(&f, KERNEL_TOL).unwrap();
            assert!(w.residual < 1e-10);
            check_witness(&f, &w);
        }

        let ok = RealFrame::from_rows(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(falsify_exact(&ok, KERNEL_TOL), Err(Error::NoKernel)));
        let big = random_frame(4, 6, 0).unwrap();
        assert!(matches!(falsify_exact(&big, KERNEL_TOL), Err(Error::WrongDimension(4))));
    }

    #[test]
    fn cone_kernel_is_diag_one_one_minus_one() {
        let f = cone_frame(8, None).unwrap();
        let w = falsify_exact(&f, KERNEL_TOL).unwrap();
        let t = &w.target;
        let s = t.get(0, 0);
        let expect = [s, 0.0, 0.0, s, 0.0, -s];
        for (got, want) in t.upper().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{:?}", t.upper());
        }
    }

    #[test]
    fn undecided_for_m4_with_kernel() {
        let f = random_frame(4, 8, 3).unwrap();
        let c = certify(&f, &CertifyOptions::default()).unwrap();
        assert_eq!(c.verdict, Verdict::Undecided);
        assert_eq!(c.kernel_dim, Some(2));
        let g = random_frame(4, 10, 3).unwrap();
        let c = certify(&g, &CertifyOptions::default()).unwrap();
        assert_eq!((c.verdict, c.method), (Verdict::CertifiedCPR, Method::KernelInjective));
        assert!(c.det_value.is_some());
    }
}
