//! Seeded random streams.
//!
//! Every random quantity in the crate comes from a ChaCha8 generator keyed by
//! a user seed and a 64-bit stream index: `ChaCha8Rng::seed_from_u64(seed)`
//! followed by `set_stream(stream)`. Restart `i` of a multistart search uses
//! stream `i`, so parallel and sequential execution draw identical numbers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::ComplexSignal;

/// Stream offsets that keep the different consumers of one seed apart.
pub mod streams {
    pub const FRAME: u64 = 0;
    pub const SIGNAL: u64 = 1 << 32;
    pub const NOISE: u64 = 2 << 32;
    pub const FALSIFY: u64 = 3 << 32;
    pub const ALTPROJ: u64 = 4 << 32;
    pub const STRICT: u64 = 5 << 32;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // Column-major fill: draws go column by column.
    DMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| normal(rng)))
}

/// Circularly symmetric complex Gaussian signal, `E|x_j|^2 = 1`.
pub fn gaussian_signal<R: Rng + ?Sized>(rng: &mut R, m: usize) -> ComplexSignal {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let entries = (0..m)
        .map(|_| Complex64::new(s * normal(rng), s * normal(rng)))
        .collect();
    ComplexSignal::new(entries).expect("gaussian draws are finite")
}
