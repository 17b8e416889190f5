//! The complement property: for every split of the frame into `I` and its
//! complement, at least one side spans the signal space.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frames::{Frame, SPAN_TOL};
use crate::linalg::complex_column_rank;

/// Default cap on `N` for the exhaustive check (`2^(N-1)` splits).
pub const DEFAULT_CP_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplementReport {
    pub holds: bool,
    /// A set `I` (0-based column indices) such that neither `I` nor its
    /// complement spans, when the property fails.
    pub violating: Option<Vec<usize>>,
}

/// Exhaustive complement property check over all `2^(N-1)` complementary
/// pairs. For a real frame the real and complex answers coincide, since real
/// vectors span `C^M` over C exactly when they span `R^M` over R. Asking for
/// the real field on a genuinely complex frame is an error.
pub fn complement_property(frame: &Frame, field: Field, cap: usize) -> Result<ComplementReport> {
    let n = frame.n();
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let columns: Vec<Vec<Complex64>> = match frame {
        Frame::Real(f) => f
            .columns()
            .map(|c| c.iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .collect(),
        Frame::Complex(f) => {
            if field == Field::Real && f.as_real().is_none() {
                return Err(Error::InvalidInput(
                    "real-field complement property is undefined for a complex frame".into(),
                ));
            }
            f.columns().map(<[Complex64]>::to_vec).collect()
        }
    };
    let m = frame.m();
    let spans = |mask: u64, want_inside: bool| -> bool {
        let picked = columns
            .iter()
            .enumerate()
            .filter(|(k, _)| ((mask >> k) & 1 == 1) == want_inside)
            .map(|(_, c)| c.as_slice());
        let count = (0..n).filter(|&k| ((mask >> k) & 1 == 1) == want_inside).count();
        count >= m && complex_column_rank(picked, m, SPAN_TOL, m) == m
    };
    // The last column always sits in the complement, so each split is
    // visited once.
    for mask in 0..(1u64 << (n - 1)) {
        if !spans(mask, true) && !spans(mask, false) {
            let violating = (0..n).filter(|&k| (mask >> k) & 1 == 1).collect();
            return Ok(ComplementReport {
                holds: false,
                violating: Some(violating),
            });
        }
    }
    Ok(ComplementReport {
        holds: true,
        violating: None,
    })
}

/// Complement property for real vectors in `R^2` without enumeration: it
/// holds exactly when the columns point in at least three distinct
/// directions. Returns a violating set otherwise.
pub fn complement_property_r2(columns: &[&[f64]]) -> ComplementReport {
    let scale = columns
        .iter()
        .map(|c| c[0].hypot(c[1]))
        .fold(0.0, f64::max);
    let mut directions: Vec<(f64, f64)> = Vec::new();
    let mut group = Vec::with_capacity(columns.len());
    for c in columns {
        let norm = c[0].hypot(c[1]);
        if norm <= SPAN_TOL * scale {
            group.push(usize::MAX);
            continue;
        }
        let (u, v) = (c[0] / norm, c[1] / norm);
        match directions.iter().position(|&(p, q)| (p * v - q * u).abs() <= SPAN_TOL) {
            Some(g) => group.push(g),
            None => {
                directions.push((u, v));
                group.push(directions.len() - 1);
            }
        }
    }
    if directions.len() >= 3 {
        ComplementReport {
            holds: true,
            violating: None,
        }
    } else {
        let violating = group
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == 0)
            .map(|(k, _)| k)
            .collect();
        ComplementReport {
            holds: false,
            violating: Some(violating),
        }
    }
}
