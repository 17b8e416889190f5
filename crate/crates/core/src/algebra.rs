//! Complex signals, the two equivalence relations on them and the real
//! outer-product lift `Re(xx*)`.
//!
//! Two signals are *phase equivalent* (`x ~ y`) when `x = e^{i theta} y`, and
//! *conjugate equivalent* when additionally `x = e^{i theta} conj(y)` is
//! allowed. Both relations are tested in lift space: `x ~ y` iff
//! `xx* = yy*`, and the conjugate relation holds iff `Re(xx*) = Re(yy*)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default relative tolerance for the equivalence tests.
pub const DEFAULT_EQUIV_TOL: f64 = 1e-9;

/// A finite complex coordinate vector of length `m >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    entries: Vec<Complex64>,
}

impl ComplexSignal {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("signal must have m >= 1 entries".into()));
        }
        if let Some(j) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!("signal entry {j}")));
        }
        Ok(Self { entries })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Builds `a + i b` from real and imaginary parts.
    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::DimensionMismatch {
                what: "signal parts",
                expected: re.len(),
                got: im.len(),
            });
        }
        Self::new(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
    }

    pub fn zeros(m: usize) -> Self {
        assert!(m >= 1);
        Self {
            entries: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Coordinate-wise conjugate.
    pub fn conj(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn re(&self) -> Vec<f64> {
        self.entries.iter().map(|z| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.entries.iter().map(|z| z.im).collect()
    }

    /// `sum_j x_j conj(phi_j)`.
    pub fn inner(&self, phi: &[Complex64]) -> Complex64 {
        debug_assert_eq!(phi.len(), self.m());
        self.entries.iter().zip(phi).map(|(x, p)| x * p.conj()).sum()
    }

    /// `sum_j x_j phi_j` for a real measurement vector.
    pub fn inner_real(&self, phi: &[f64]) -> Complex64 {
        debug_assert_eq!(phi.len(), self.m());
        self.entries.iter().zip(phi).map(|(x, p)| x * p).sum()
    }

    /// Applies a real matrix: `(U x)_i = sum_j U_ij x_j`.
    pub fn transform(&self, u: &DMatrix<f64>) -> Self {
        assert_eq!(u.ncols(), self.m());
        let entries = (0..u.nrows())
            .map(|i| (0..u.ncols()).map(|j| self.entries[j] * u[(i, j)]).sum())
            .collect();
        Self { entries }
    }
}

/// A real symmetric `m x m` matrix stored as its upper triangle, row by row:
/// `(0,0), (0,1), ..., (0,m-1), (1,1), ...`. Symmetry holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricLift {
    m: usize,
    upper: Vec<f64>,
}

fn upper_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows 0..i hold m + (m-1) + ... + (m-i+1) entries
    i * m - i * i.saturating_sub(1) / 2 + (j - i)
}

impl SymmetricLift {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            upper: vec![0.0; m * (m + 1) / 2],
        }
    }

    pub fn from_upper(m: usize, upper: Vec<f64>) -> Result<Self> {
        if upper.len() != m * (m + 1) / 2 {
            return Err(Error::DimensionMismatch {
                what: "symmetric upper triangle",
                expected: m * (m + 1) / 2,
                got: upper.len(),
            });
        }
        Ok(Self { m, upper })
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                upper.push(f(i, j));
            }
        }
        Self { m, upper }
    }

    /// Takes the upper triangle of a square matrix; the lower one is ignored.
    pub fn from_matrix_upper(a: &DMatrix<f64>) -> Self {
        assert!(a.is_square());
        Self::from_fn(a.nrows(), |i, j| a[(i, j)])
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn identity(m: usize) -> Self {
        Self::from_fn(m, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[upper_index(self.m, i, j)]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |i, j| self.get(i, j))
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.m {
            for j in i..self.m {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.m).map(|i| self.get(i, i)).sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.m, other.m);
        Self {
            m: self.m,
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.m, other.m);
        Self {
            m: self.m,
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            m: self.m,
            upper: self.upper.iter().map(|a| a * factor).collect(),
        }
    }

    /// `phi^T Q phi`.
    pub fn quadratic_form(&self, phi: &[f64]) -> f64 {
        assert_eq!(phi.len(), self.m);
        let mut s = 0.0;
        for i in 0..self.m {
            s += self.get(i, i) * phi[i] * phi[i];
            for j in (i + 1)..self.m {
                s += 2.0 * self.get(i, j) * phi[i] * phi[j];
            }
        }
        s
    }

    /// `U Q U^T`.
    pub fn congruence(&self, u: &DMatrix<f64>) -> Self {
        let q = self.to_matrix();
        Self::from_matrix_upper(&(u * q * u.transpose()))
    }
}

fn check_same_dim(x: &ComplexSignal, y: &ComplexSignal) -> Result<()> {
    if x.m() != y.m() {
        return Err(Error::DimensionMismatch {
            what: "signal",
            expected: x.m(),
            got: y.m(),
        });
    }
    Ok(())
}

/// `Re(x x*)`, i.e. `Q_jk = Re(x_j conj(x_k))`. With `x = a + ib` this is
/// `aa^T + bb^T`, a PSD matrix of rank at most two.
pub fn real_lift(x: &ComplexSignal) -> SymmetricLift {
    let e = x.entries();
    SymmetricLift::from_fn(x.m(), |j, k| e[j].re * e[k].re + e[j].im * e[k].im)
}

/// `Re(xx* - yy*)`.
pub fn lift_difference(x: &ComplexSignal, y: &ComplexSignal) -> SymmetricLift {
    real_lift(x).sub(&real_lift(y))
}

fn scale_floor(x: &ComplexSignal, y: &ComplexSignal) -> f64 {
    x.norm_sqr().max(y.norm_sqr()).max(f64::EPSILON)
}

/// `||xx* - yy*||_F` over the full Hermitian outer products.
pub fn hermitian_lift_distance(x: &ComplexSignal, y: &ComplexSignal) -> Result<f64> {
    check_same_dim(x, y)?;
    let (xe, ye) = (x.entries(), y.entries());
    let mut s = 0.0;
    for j in 0..x.m() {
        for k in 0..x.m() {
            s += (xe[j] * xe[k].conj() - ye[j] * ye[k].conj()).norm_sqr();
        }
    }
    Ok(s.sqrt())
}

/// `x = e^{i theta} y` for some theta, decided as `xx* = yy*`.
pub fn phase_equivalent(x: &ComplexSignal, y: &ComplexSignal, tol: f64) -> Result<bool> {
    Ok(hermitian_lift_distance(x, y)? <= tol * scale_floor(x, y))
}

/// `x = e^{i theta} y` or `x = e^{i theta} conj(y)`, decided as
/// `Re(xx*) = Re(yy*)`.
pub fn conj_equivalent(x: &ComplexSignal, y: &ComplexSignal, tol: f64) -> Result<bool> {
    Ok(conj_class_distance(x, y)? <= tol * scale_floor(x, y))
}

/// `||Re(xx*) - Re(yy*)||_F`: a metric on conjugate equivalence classes.
pub fn conj_class_distance(x: &ComplexSignal, y: &ComplexSignal) -> Result<f64> {
    check_same_dim(x, y)?;
    Ok(lift_difference(x, y).frobenius_norm())
}

/// True when all entries share one phase modulo pi, i.e. `y = lambda v` with
/// `|lambda| = 1` and `v` real. These are exactly the signals equivalent to
/// their own conjugate.
pub fn is_phased_real(y: &ComplexSignal, tol: f64) -> bool {
    let e = y.entries();
    let bound = tol * y.norm_sqr();
    for j in 0..e.len() {
        for k in (j + 1)..e.len() {
            if (e[j] * e[k].conj()).im.abs() > bound {
                return false;
            }
        }
    }
    true
}

/// A fixed representative of the conjugate equivalence class of `x`.
///
/// The coordinate of largest modulus (smallest index on ties) is rotated to
/// be real and nonnegative; then the first coordinate whose imaginary part
/// exceeds `tol * ||x||` in magnitude is made to have positive imaginary part
/// by conjugating if needed. The map is idempotent bit for bit. It is only
/// continuous away from modulus ties and phased-real inputs.
pub fn canonical_rep(x: &ComplexSignal, tol: f64) -> ComplexSignal {
    let e = x.entries();
    let mut best = 0;
    let mut best_mod = e[0].norm();
    for (j, z) in e.iter().enumerate().skip(1) {
        let r = z.norm();
        if r > best_mod {
            best = j;
            best_mod = r;
        }
    }
    if best_mod == 0.0 {
        return ComplexSignal::zeros(x.m());
    }
    let rot = e[best].conj() / best_mod;
    let mut out: Vec<Complex64> = if rot == Complex64::new(1.0, 0.0) {
        e.to_vec()
    } else {
        e.iter().map(|z| z * rot).collect()
    };
    out[best] = Complex64::new(best_mod, 0.0);
    let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if let Some(z) = out.iter().find(|z| z.im.abs() > tol * norm) {
        if z.im < 0.0 {
            for z in out.iter_mut() {
                *z = z.conj();
            }
        }
    }
    // Normalise signed zeros so repeated application is bit-stable.
    for z in out.iter_mut() {
        if z.im == 0.0 {
            z.im = 0.0;
        }
        if z.re == 0.0 {
            z.re = 0.0;
        }
    }
    ComplexSignal { entries: out }
}
