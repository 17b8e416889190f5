//! Explicit counterexamples: pairs `(x, y)` of signals that are not
//! conjugate equivalent but produce the same magnitude measurements.
//!
//! The central fact is that every indefinite real symmetric `3 x 3` (or
//! `2 x 2`) matrix `H` is a difference `Re(xx* - yy*)`. After an orthogonal
//! change of basis `H` is diagonal, and since `W_{Ux,Uy} = U W_{x,y} U^T` for
//! real `U` it is enough to realize the diagonal patterns
//! `diag(a, b, -c)`, `diag(a, 0, -c)` and `diag(a, -c)` with `a, b, c > 0`.
//! The diagonal equations are `|x_j|^2 - |y_j|^2 = h_jj`; the off-diagonal
//! ones `Re(x_j conj x_k) = Re(y_j conj y_k)` are met by aligning phases and
//! choosing the free moduli so that
//! `|y1| / sqrt(a + |y1|^2) = |y2| / sqrt(b + |y2|^2) = |x3| / sqrt(c + |x3|^2)`.
//! With `|y1| = 1` this common ratio `r` satisfies `r^2 / (1 - r^2) = 1 / a`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{lift_difference, ComplexSignal, SymmetricLift};
use crate::error::{Error, Result};
use crate::frames::RealFrame;
use crate::linalg;

/// Eigenvalues with `|lambda| <= ZERO_EIG_TOL * ||H||_F` count as zero.
pub const ZERO_EIG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessPair {
    pub x: ComplexSignal,
    pub y: ComplexSignal,
    /// The matrix `H` the pair is meant to realize as `Re(xx* - yy*)`.
    pub target: SymmetricLift,
    /// `||Re(xx* - yy*) - H||_F / max(||H||_F, eps)`.
    pub residual: f64,
}

impl WitnessPair {
    /// Packages a pair, computing the realization residual.
    pub fn new(x: ComplexSignal, y: ComplexSignal, target: SymmetricLift) -> Self {
        let realized = lift_difference(&x, &y);
        let residual =
            realized.sub(&target).frobenius_norm() / target.frobenius_norm().max(f64::EPSILON);
        Self {
            x,
            y,
            target,
            residual,
        }
    }

    /// `Re(xx* - yy*)` of the stored signals.
    pub fn realized(&self) -> SymmetricLift {
        lift_difference(&self.x, &self.y)
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn signal(entries: Vec<Complex64>) -> ComplexSignal {
    ComplexSignal::new(entries).expect("witness moduli are finite")
}

/// Pair with `Re(xx* - yy*) = diag(a, b, -c)`.
///
/// Phases: `theta_1 = psi_1 = pi/2`, the other four zero.
pub fn witness_diag_m3(a: f64, b: f64, c_: f64) -> Result<WitnessPair> {
    require_positive("a", a)?;
    require_positive("b", b)?;
    require_positive("c", c_)?;
    let ratio = 1.0 / a; // r^2 / (1 - r^2) with |y1| = 1
    let y1 = 1.0;
    let y2 = (b * ratio).sqrt();
    let x3 = (c_ * ratio).sqrt();
    let x1 = (a + y1 * y1).sqrt();
    let x2 = (b + y2 * y2).sqrt();
    let y3 = (c_ + x3 * x3).sqrt();
    let x = signal(vec![c(0.0, x1), c(x2, 0.0), c(x3, 0.0)]);
    let y = signal(vec![c(0.0, y1), c(y2, 0.0), c(y3, 0.0)]);
    Ok(WitnessPair::new(x, y, SymmetricLift::diagonal(&[a, b, -c_])))
}

/// Pair with `Re(xx* - yy*) = diag(a, 0, -c)`.
///
/// Phases `(pi, pi/2, 0)` for both signals and `|x_2| = |y_2| = 1`.
pub fn witness_diag_m3_degenerate(a: f64, c_: f64) -> Result<WitnessPair> {
    require_positive("a", a)?;
    require_positive("c", c_)?;
    let ratio = 1.0 / a;
    let y1 = 1.0;
    let x3 = (c_ * ratio).sqrt();
    let x1 = (a + y1 * y1).sqrt();
    let y3 = (c_ + x3 * x3).sqrt();
    let x = signal(vec![c(-x1, 0.0), c(0.0, 1.0), c(x3, 0.0)]);
    let y = signal(vec![c(-y1, 0.0), c(0.0, 1.0), c(y3, 0.0)]);
    Ok(WitnessPair::new(x, y, SymmetricLift::diagonal(&[a, 0.0, -c_])))
}

/// Pair with `Re(xx* - yy*) = diag(a, -c)`.
pub fn witness_diag_m2(a: f64, c_: f64) -> Result<WitnessPair> {
    require_positive("a", a)?;
    require_positive("c", c_)?;
    let ratio = 1.0 / a;
    let y1 = 1.0;
    let x2 = (c_ * ratio).sqrt();
    let x1 = (a + y1 * y1).sqrt();
    let y2 = (c_ + x2 * x2).sqrt();
    let x = signal(vec![c(0.0, x1), c(x2, 0.0)]);
    let y = signal(vec![c(0.0, y1), c(y2, 0.0)]);
    Ok(WitnessPair::new(x, y, SymmetricLift::diagonal(&[a, -c_])))
}

/// Realizes an indefinite `H` (m = 2 or 3) as `Re(xx* - yy*)`.
///
/// `H` is diagonalized as `U diag(lambda) U^T` with descending eigenvalues,
/// the matching diagonal witness is built for `lambda / lambda_1` and mapped
/// back by `U`. The `(+, -, -)` pattern is handled by realizing `-H`
/// and swapping the roles of `x` and `y`.
pub fn witness_general(h: &SymmetricLift) -> Result<WitnessPair> {
    let m = h.m();
    if m != 2 && m != 3 {
        return Err(Error::WrongDimension(m));
    }
    if h.upper().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target matrix".into()));
    }
    let scale = h.frobenius_norm();
    if scale == 0.0 {
        return Err(Error::DefiniteInput {
            eigenvalues: vec![0.0; m],
        });
    }
    let eig = linalg::sym_eigen(&h.scaled(1.0 / scale).to_matrix());
    let lam = &eig.values;
    let tol = ZERO_EIG_TOL;
    if !(lam[0] > tol && lam[m - 1] < -tol) {
        return Err(Error::DefiniteInput {
            eigenvalues: lam.iter().map(|v| v * scale).collect(),
        });
    }
    let u = &eig.vectors;
    // leading eigenvalue normalized to one keeps every modulus O(1)
    let base = if m == 2 {
        witness_diag_m2(1.0, -lam[1] / lam[0])?
    } else if lam[1] > tol {
        witness_diag_m3(1.0, lam[1] / lam[0], -lam[2] / lam[0])?
    } else if lam[1] < -tol {
        // -H has eigenvalues (-l3, -l2, -l1) on the reversed basis.
        let w = witness_diag_m3(1.0, lam[1] / lam[2], -lam[0] / lam[2])?;
        let reversed = DMatrix::from_fn(3, 3, |i, j| u[(i, 2 - j)]);
        let (x, y) = map_back(&w, &reversed, -lam[2] * scale);
        return Ok(WitnessPair::new(y, x, h.clone()));
    } else {
        witness_diag_m3_degenerate(1.0, -lam[2] / lam[0])?
    };
    let (x, y) = map_back(&base, u, lam[0] * scale);
    Ok(WitnessPair::new(x, y, h.clone()))
}

/// Maps a diagonal witness through `U` and undoes the normalization.
fn map_back(base: &WitnessPair, u: &DMatrix<f64>, scale: f64) -> (ComplexSignal, ComplexSignal) {
    let s = Complex64::new(scale.sqrt(), 0.0);
    (base.x.transform(u).scale(s), base.y.transform(u).scale(s))
}

/// `n` vectors `(cos t, sin t, 1)` on the light cone `x1^2 + x2^2 = x3^2`,
/// by default at `t_k = 2 pi k / n`. Every such vector is annihilated by the
/// quadratic form of `diag(1, 1, -1)`.
pub fn cone_frame(n: usize, angles: Option<&[f64]>) -> Result<RealFrame> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("cone frame needs n >= 3, got {n}")));
    }
    let tau = std::f64::consts::TAU;
    let ts: Vec<f64> = match angles {
        Some(a) => {
            if a.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "cone angles",
                    expected: n,
                    got: a.len(),
                });
            }
            if let Some(bad) = a.iter().find(|t| !(t.is_finite() && **t >= 0.0 && **t < tau)) {
                return Err(Error::InvalidInput(format!("cone angle {bad} outside [0, 2pi)")));
            }
            let mut sorted = a.to_vec();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput("duplicate cone angles".into()));
            }
            a.to_vec()
        }
        None => (0..n).map(|k| tau * k as f64 / n as f64).collect(),
    };
    let cols: Vec<Vec<f64>> = ts.iter().map(|t| vec![t.cos(), t.sin(), 1.0]).collect();
    RealFrame::from_columns(&cols)
}

/// Witness from a complement property failure of a real frame: if neither
/// the columns in `subset` nor the rest span, take unit `u` orthogonal to the
/// first group and unit `v` orthogonal to the second; then `x = u + v` and
/// `y = u - v` have equal measurements, and `Re(xx* - yy*) = 2(uv^T + vu^T)`.
pub fn witness_from_split(frame: &RealFrame, subset: &[usize]) -> Result<WitnessPair> {
    let m = frame.m();
    let mut inside = vec![false; frame.n()];
    for &k in subset {
        if k >= frame.n() {
            return Err(Error::InvalidInput(format!("index {k} out of range")));
        }
        inside[k] = true;
    }
    let normal_to = |cols: Vec<&[f64]>| -> Result<Vec<f64>> {
        if cols.is_empty() {
            let mut e = vec![0.0; m];
            e[0] = 1.0;
            return Ok(e);
        }
        let flat: Vec<f64> = cols.iter().flat_map(|c| c.iter().copied()).collect();
        // rows of the transpose are the selected columns
        let at = DMatrix::from_row_slice(cols.len(), m, &flat);
        let (sigmas, v) = linalg::svd_right(&at);
        let smax = sigmas[0];
        let last = sigmas.len() - 1;
        if sigmas[last] > crate::frames::SPAN_TOL * smax && cols.len() >= m {
            return Err(Error::InvalidInput(
                "index set spans; it is not a complement property violation".into(),
            ));
        }
        Ok(v.column(last).iter().copied().collect())
    };
    let u = normal_to(frame.columns().enumerate().filter(|(k, _)| inside[*k]).map(|(_, c)| c).collect())?;
    let v = normal_to(frame.columns().enumerate().filter(|(k, _)| !inside[*k]).map(|(_, c)| c).collect())?;
    let x: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
    let y: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
    let target = SymmetricLift::from_fn(m, |i, j| 2.0 * (u[i] * v[j] + v[i] * u[j]));
    Ok(WitnessPair::new(
        ComplexSignal::from_real(&x)?,
        ComplexSignal::from_real(&y)?,
        target,
    ))
}
