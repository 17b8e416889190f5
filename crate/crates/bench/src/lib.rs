//! Fixed workloads shared by the benchmarks.

use cpr_core::rng::{gaussian_signal, stream_rng, streams};
use cpr_core::{measure_clean, random_frame, MeasurementVector, RealFrame};

/// Seeded Gaussian frame with noiseless measurements of a seeded signal.
pub fn workload(m: usize, n: usize, seed: u64) -> (RealFrame, MeasurementVector) {
    let frame = random_frame(m, n, seed).expect("n >= m");
    let mut rng = stream_rng(seed, streams::SIGNAL);
    let x = gaussian_signal(&mut rng, m);
    let b = measure_clean(&frame, &x).expect("matching dimensions");
    (frame, b)
}

/// Frames for the certification benchmarks, one per decision path.
pub fn certify_cases() -> Vec<(&'static str, RealFrame)> {
    let frame = |m, n| random_frame(m, n, 1).expect("n >= m");
    vec![
        ("det2_2x3", frame(2, 3)),
        ("complement_2x12", frame(2, 12)),
        ("det3_3x6", frame(3, 6)),
        ("kernel_witness_3x5", frame(3, 5)),
        ("kernel_6x21", frame(6, 21)),
        ("undecided_5x12", frame(5, 12)),
    ]
}
