//! Conjugate phase retrieval with real frames.
//!
//! A frame `{phi_n}` of `R^M` does conjugate phase retrieval when the
//! magnitudes `|<x, phi_n>|` of a complex signal `x` determine it up to a
//! global phase and complex conjugation. This crate decides that property
//! (exactly for `M <= 3`, sufficiently beyond), builds explicit
//! counterexample pairs, and reconstructs signals from their magnitudes.
//!
//! ```
//! use cpr_core::{certify, CertifyOptions, RealFrame, Verdict};
//!
//! let frame = RealFrame::from_rows(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
//! let cert = certify(&frame, &CertifyOptions::default()).unwrap();
//! assert_eq!(cert.verdict, Verdict::CertifiedCPR);
//! ```

pub mod algebra;
pub mod certify;
pub mod error;
pub mod frames;
pub mod io;
pub mod lift;
pub mod linalg;
pub mod reconstruct;
pub mod rng;
pub mod witness;

pub use algebra::{
    canonical_rep, conj_class_distance, conj_equivalent, is_phased_real, lift_difference,
    phase_equivalent, real_lift, ComplexSignal, SymmetricLift,
};
pub use certify::{
    certify, complement_property, falsify_exact, falsify_search, kernel_basis, strict_report,
    Certificate, CertifyOptions, Field, Method, SearchOptions, SearchStats, StrictOptions,
    StrictReport, StrictVerdict, Verdict,
};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use frames::{frame_bounds, generic_cpr_size, random_frame, ComplexFrame, Frame, RealFrame};
pub use lift::{
    apply_lift, measure, measure_clean, numeric_rank, omega, omega_matrix, vectorize, devectorize,
    LiftVector, MeasurementVector, OmegaMatrix,
};
pub use reconstruct::{
    factor_rank2, reconstruct_altproj, reconstruct_linear, residual, AltProjOptions,
    ReconstructionResult,
};
pub use witness::{
    cone_frame, witness_diag_m2, witness_diag_m3, witness_diag_m3_degenerate, witness_general,
    WitnessPair,
};
