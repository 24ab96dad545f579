//! Error type shared across the crate.

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("angle {0} deg lies outside the open interval (-90, 90)")]
    AngleOutOfRange(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid mode set: {0}")]
    InvalidModes(String),

    #[error("no admissible angle: {0}")]
    EmptyResult(String),

    #[error("adaptive update diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        /// Weights from the last finite update.
        last_weights: Vec<Complex64>,
    },

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("inverse correlation lost positive definiteness; reinitialize the filter")]
    LostPositiveDefiniteness,

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("ill-conditioned system: condition estimate {0:.3e}")]
    IllConditioned(f64),

    #[error("step bound is undefined for a zero input vector")]
    ZeroInput,

    #[error("degenerate polynomial: {0}")]
    DegeneratePolynomial(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("root finder did not converge within {sweeps} sweeps")]
    RootFindingFailed {
        sweeps: usize,
        /// Best root estimates at the point of failure.
        partial: Vec<Complex64>,
    },

    #[error("no roots selected: {0}")]
    EmptyModel(String),

    #[error("no selected root maps into the visible region")]
    NoValidAngle,
}
