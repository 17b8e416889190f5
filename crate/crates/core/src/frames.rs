//! Real and complex frames: spanning sets of measurement vectors stored as
//! the columns of a short-fat `m x n` matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{self, streams};

/// Relative singular value cutoff used to decide whether columns span.
pub const SPAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RealFrame {
    matrix: DMatrix<f64>,
}

impl RealFrame {
    /// Validates finiteness, `n >= m` and numeric rank `m`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (m, n) = matrix.shape();
        if m == 0 {
            return Err(Error::InvalidInput("frame must have m >= 1 rows".into()));
        }
        if n < m {
            return Err(Error::InvalidInput(format!(
                "frame needs n >= m columns, got m = {m}, n = {n}"
            )));
        }
        if let Some(k) = matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("frame column {}", k / m)));
        }
        let rank = linalg::rank_from_singular_values(&linalg::singular_values(&matrix), SPAN_TOL);
        if rank < m {
            return Err(Error::NotSpanning { rank, m });
        }
        Ok(Self { matrix })
    }

    /// Builds a frame from its columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != m) {
            return Err(Error::DimensionMismatch {
                what: "frame column",
                expected: m,
                got: bad.len(),
            });
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        Self::new(DMatrix::from_column_slice(m, columns.len(), &flat))
    }

    /// Row-major convenience constructor, handy for small literals.
    pub fn from_rows(m: usize, n: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != m * n {
            return Err(Error::DimensionMismatch {
                what: "frame entries",
                expected: m * n,
                got: rows.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(m, n, rows))
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn column(&self, k: usize) -> &[f64] {
        let m = self.m();
        &self.matrix.as_slice()[k * m..(k + 1) * m]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.matrix.as_slice().chunks_exact(self.m())
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(&self.matrix * t)
    }

    pub fn to_complex(&self) -> ComplexFrame {
        ComplexFrame {
            matrix: self.matrix.map(|v| Complex64::new(v, 0.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFrame {
    matrix: DMatrix<Complex64>,
}

impl ComplexFrame {
    /// Validates finiteness, `n >= m` and numeric rank `m` over C.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let (m, n) = matrix.shape();
        if m == 0 {
            return Err(Error::InvalidInput("frame must have m >= 1 rows".into()));
        }
        if n < m {
            return Err(Error::InvalidInput(format!(
                "frame needs n >= m columns, got m = {m}, n = {n}"
            )));
        }
        if let Some(k) = matrix.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!("frame column {}", k / m)));
        }
        let sv: Vec<f64> = matrix.singular_values().iter().copied().collect();
        let rank = linalg::rank_from_singular_values(&sv, SPAN_TOL);
        if rank < m {
            return Err(Error::NotSpanning { rank, m });
        }
        Ok(Self { matrix })
    }

    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != m) {
            return Err(Error::DimensionMismatch {
                what: "frame column",
                expected: m,
                got: bad.len(),
            });
        }
        let flat: Vec<Complex64> = columns.iter().flatten().copied().collect();
        Self::new(DMatrix::from_column_slice(m, columns.len(), &flat))
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        let m = self.m();
        &self.matrix.as_slice()[k * m..(k + 1) * m]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[Complex64]> + '_ {
        self.matrix.as_slice().chunks_exact(self.m())
    }

    /// Some for frames whose entries all have zero imaginary part.
    pub fn as_real(&self) -> Option<RealFrame> {
        if self.matrix.iter().all(|z| z.im == 0.0) {
            Some(RealFrame {
                matrix: self.matrix.map(|z| z.re),
            })
        } else {
            None
        }
    }
}

/// Either kind of frame, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Real(RealFrame),
    Complex(ComplexFrame),
}

impl Frame {
    pub fn m(&self) -> usize {
        match self {
            Frame::Real(f) => f.m(),
            Frame::Complex(f) => f.m(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Frame::Real(f) => f.n(),
            Frame::Complex(f) => f.n(),
        }
    }
}

/// I.i.d. standard normal `m x n` frame from stream `streams::FRAME` of
/// `seed`. The rank-deficient event has probability zero; if it happens
/// anyway the draw is repeated from the same stream.
pub fn random_frame(m: usize, n: usize, seed: u64) -> Result<RealFrame> {
    if m == 0 || n < m {
        return Err(Error::InvalidInput(format!(
            "random frame needs 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    let mut rng = rng::stream_rng(seed, streams::FRAME);
    let mut resamples = 0usize;
    loop {
        match RealFrame::new(rng::gaussian_matrix(&mut rng, m, n)) {
            Ok(frame) => {
                if resamples > 0 {
                    log::info!("random_frame(m={m}, n={n}, seed={seed}): {resamples} resample(s)");
                }
                return Ok(frame);
            }
            Err(Error::NotSpanning { .. }) => resamples += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Number of real frame vectors that makes a generic frame conjugate phase
/// retrievable: 3 for `m = 2`, 6 for `m = 3` and `4m - 6` beyond.
pub fn generic_cpr_size(m: usize) -> Result<usize> {
    match m {
        0 | 1 => Err(Error::InvalidInput(format!("generic size needs m >= 2, got {m}"))),
        2 => Ok(3),
        3 => Ok(6),
        _ => Ok(4 * m - 6),
    }
}

/// Optimal frame bounds `(A, B)` with `A ||x||^2 <= sum |<x, phi_n>|^2 <= B ||x||^2`:
/// the extreme squared singular values of the frame matrix.
pub fn frame_bounds(frame: &RealFrame) -> (f64, f64) {
    let sv = linalg::singular_values(frame.matrix());
    let smax = sv[0];
    let smin = sv[frame.m() - 1];
    (smin * smin, smax * smax)
}
