//! The phase-lift: each magnitude measurement `|<x, phi>|^2` of a real
//! measurement vector is the linear functional `<omega_phi, v(Re(xx*))>` of
//! the half-vectorized lift.
//!
//! Coefficient order (used everywhere, for `v(Q)`, `omega_phi` and the
//! columns of the lifted frame operator) is diagonal first, then the strict
//! upper triangle row by row:
//!
//! ```text
//! q11 q22 ... qMM  q12 ... q1M  q23 ... q2M  ...  q(M-1)M
//! ```
//!
//! Some textbook displays of the `2 x 3` and `3 x 6` operators use other
//! column orders; a column permutation only flips the sign of the
//! determinant, so kernels and injectivity are unaffected.

use nalgebra::DMatrix;
use rand::Rng;

use crate::algebra::{real_lift, ComplexSignal, SymmetricLift};
use crate::error::{Error, Result};
use crate::frames::RealFrame;
use crate::linalg;
use crate::rng::normal;

/// Half-vectorization of a symmetric matrix in the order described in the
/// module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftVector {
    m: usize,
    coeffs: Vec<f64>,
}

pub fn lift_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Inverse of `lift_len`, if `len` is a triangular number.
pub fn lift_dim(len: usize) -> Option<usize> {
    let m = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (lift_len(m) == len && m > 0).then_some(m)
}

/// Iterates the off-diagonal index pairs `(j, k)`, `j < k`, in lift order.
pub fn off_diagonal_pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |j| ((j + 1)..m).map(move |k| (j, k)))
}

impl LiftVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let m = lift_dim(coeffs.len()).ok_or_else(|| {
            Error::InvalidInput(format!(
                "lift vector length {} is not of the form m(m+1)/2",
                coeffs.len()
            ))
        })?;
        Ok(Self { m, coeffs })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn dot(&self, other: &LiftVector) -> f64 {
        assert_eq!(self.m, other.m);
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }
}

/// `omega_phi = (phi_1^2, ..., phi_M^2, 2 phi_1 phi_2, ..., 2 phi_{M-1} phi_M)`,
/// so that `<omega_phi, v(Q)> = phi^T Q phi`.
pub fn omega(phi: &[f64]) -> LiftVector {
    let m = phi.len();
    let mut coeffs = Vec::with_capacity(lift_len(m));
    coeffs.extend(phi.iter().map(|p| p * p));
    coeffs.extend(off_diagonal_pairs(m).map(|(j, k)| 2.0 * phi[j] * phi[k]));
    LiftVector { m, coeffs }
}

pub fn vectorize(q: &SymmetricLift) -> LiftVector {
    let m = q.m();
    let mut coeffs = Vec::with_capacity(lift_len(m));
    coeffs.extend((0..m).map(|i| q.get(i, i)));
    coeffs.extend(off_diagonal_pairs(m).map(|(j, k)| q.get(j, k)));
    LiftVector { m, coeffs }
}

pub fn devectorize(v: &LiftVector) -> SymmetricLift {
    let m = v.m;
    let mut full = DMatrix::zeros(m, m);
    for i in 0..m {
        full[(i, i)] = v.coeffs[i];
    }
    for (idx, (j, k)) in off_diagonal_pairs(m).enumerate() {
        full[(j, k)] = v.coeffs[m + idx];
    }
    SymmetricLift::from_matrix_upper(&full)
}

/// The lifted frame operator: an `n x m(m+1)/2` matrix whose row `k` is
/// `omega(phi_k)^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMatrix {
    m: usize,
    matrix: DMatrix<f64>,
}

impl OmegaMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, v: &LiftVector) -> Vec<f64> {
        assert_eq!(v.m, self.m);
        (&self.matrix * linalg::to_dvector(&v.coeffs)).iter().copied().collect()
    }

    /// Determinant when the operator is square.
    pub fn determinant(&self) -> Option<f64> {
        self.matrix.is_square().then(|| self.matrix.determinant())
    }

    /// Product of row norms, the Hadamard bound on `|det|`.
    pub fn hadamard_bound(&self) -> f64 {
        self.matrix.row_iter().map(|r| r.norm()).product()
    }
}

pub fn omega_matrix(frame: &RealFrame) -> OmegaMatrix {
    let m = frame.m();
    let k = lift_len(m);
    let mut matrix = DMatrix::zeros(frame.n(), k);
    for (row, phi) in frame.columns().enumerate() {
        for (c, val) in omega(phi).coeffs.into_iter().enumerate() {
            matrix[(row, c)] = val;
        }
    }
    OmegaMatrix { m, matrix }
}

fn check_frame_dim(frame: &RealFrame, m: usize) -> Result<()> {
    if frame.m() != m {
        return Err(Error::DimensionMismatch {
            what: "frame rows vs signal length",
            expected: frame.m(),
            got: m,
        });
    }
    Ok(())
}

/// `A(Q) = (phi_1^T Q phi_1, ..., phi_N^T Q phi_N)`.
pub fn apply_lift(frame: &RealFrame, q: &SymmetricLift) -> Result<Vec<f64>> {
    check_frame_dim(frame, q.m())?;
    Ok(frame.columns().map(|phi| q.quadratic_form(phi)).collect())
}

/// Magnitude-squared measurements `b_n = |<x, phi_n>|^2`, possibly noisy.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
    /// Relative standard deviation of the simulated noise, if any.
    pub noise_sigma: Option<f64>,
}

impl MeasurementVector {
    pub fn noiseless(values: Vec<f64>) -> Self {
        Self {
            values,
            noise_sigma: None,
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.values)
    }

    /// Noiseless measurements must be nonnegative and everything finite.
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("measurement {k}")));
        }
        match self.noise_sigma {
            Some(s) if !(s.is_finite() && s >= 0.0) => {
                Err(Error::InvalidInput(format!("noise_sigma must be >= 0, got {s}")))
            }
            None => match self.values.iter().position(|&v| v < 0.0) {
                Some(k) => Err(Error::InvalidInput(format!(
                    "measurement {k} is negative ({}) but no noise level is recorded",
                    self.values[k]
                ))),
                None => Ok(()),
            },
            Some(_) => Ok(()),
        }
    }
}

/// Simulates `b_n = |<x, phi_n>|^2`. With `noise` set to `(sigma, rng)`,
/// adds i.i.d. Gaussian noise of standard deviation `sigma * mean(b)`.
pub fn measure<R: Rng + ?Sized>(
    frame: &RealFrame,
    x: &ComplexSignal,
    noise: Option<(f64, &mut R)>,
) -> Result<MeasurementVector> {
    check_frame_dim(frame, x.m())?;
    let mut values: Vec<f64> = frame.columns().map(|phi| x.inner_real(phi).norm_sqr()).collect();
    let noise_sigma = match noise {
        None => None,
        Some((sigma, rng)) => {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "noise_sigma must be >= 0, got {sigma}"
                )));
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let sd = sigma * mean;
            for v in values.iter_mut() {
                *v += sd * normal(rng);
            }
            Some(sigma)
        }
    };
    Ok(MeasurementVector {
        values,
        noise_sigma,
    })
}

/// Noiseless shorthand for [`measure`].
pub fn measure_clean(frame: &RealFrame, x: &ComplexSignal) -> Result<MeasurementVector> {
    measure::<rand_chacha::ChaCha8Rng>(frame, x, None)
}

/// Default relative cutoff of [`numeric_rank`]: `64 m eps`.
pub fn default_rank_tol(m: usize) -> f64 {
    64.0 * m as f64 * f64::EPSILON
}

/// Count of singular values above `tol * sigma_max`.
pub fn numeric_rank(q: &SymmetricLift, tol: Option<f64>) -> usize {
    let tol = tol.unwrap_or_else(|| default_rank_tol(q.m()));
    let eig = linalg::sym_eigen(&q.to_matrix());
    let sv: Vec<f64> = eig.values.iter().map(|v| v.abs()).collect();
    linalg::rank_from_singular_values(&sv, tol)
}

/// `Re(xx*)` measured through the lift: handy for identity checks.
pub fn lifted_measurements(frame: &RealFrame, x: &ComplexSignal) -> Result<Vec<f64>> {
    apply_lift(frame, &real_lift(x))
}
