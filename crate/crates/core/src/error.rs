use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// Input-shaped problems (bad dimensions, non-finite values, malformed files)
/// are kept apart from numerical failures so that front ends can map them to
/// different exit codes via [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("frame does not span: numeric rank {rank} < {m}")]
    NotSpanning { rank: usize, m: usize },

    #[error("complement property check refused: N = {n} exceeds the cap of {cap} (2^(N-1) subsets)")]
    CapExceeded { n: usize, cap: usize },

    #[error("kernel of the lifted frame operator is trivial; no witness can be built from it")]
    NoKernel,

    #[error("kernel element is semidefinite (min {min_eig:e}, max {max_eig:e}); the columns do not span")]
    IndefinitenessViolation { min_eig: f64, max_eig: f64 },

    #[error("target matrix is semidefinite (eigenvalues {eigenvalues:?}); it is not a difference Re(xx*-yy*) of this construction")]
    DefiniteInput { eigenvalues: Vec<f64> },

    #[error("witness synthesis supports m in {{2, 3}} only, got m = {0}")]
    WrongDimension(usize),

    #[error("lifted matrix is not PSD: eigenvalue {min_eig:e} below -{tol:e} * ||Q||")]
    NotPsd { min_eig: f64, tol: f64 },

    #[error("lift system is underdetermined: rank {rank} < {unknowns} unknowns (use the alternating projection method)")]
    Underdetermined { rank: usize, unknowns: usize },

    #[error("reconstruction did not converge: relative lift residual {residual:e}")]
    NotConverged { residual: f64 },

    #[error(transparent)]
    Format(#[from] crate::io::FormatError),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoKernel
                | Error::IndefinitenessViolation { .. }
                | Error::DefiniteInput { .. }
                | Error::NotPsd { .. }
                | Error::Underdetermined { .. }
                | Error::NotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
