//! Blind multi-user separation for a uniform linear antenna array.
//!
//! The crate covers the full signal path from synthetic array data to
//! per-source beamforming weights:
//!
//! * [`array`](mod@array) — the ULA measurement model X = A diag(c) S^H + N
//!   with constant-modulus (QPSK) sources and seeded complex Gaussian noise;
//! * [`dsft`] — the discrete-space Fourier transform of finite weight
//!   sequences, the Dirichlet-kernel array response, and the phase-relation
//!   identities of superposed steering vectors;
//! * [`cma`] — the constant-modulus adaptive filter: soft-equalizer descent,
//!   the RLS-orthogonalized step, and the flipped normalized run whose weights
//!   approximate the steering-vector sum;
//! * [`precond`] — the pinned-weight LMS predictor of the first element and
//!   its batch least-squares limit;
//! * [`doa`] — root polynomials, root selection (model order), direction
//!   estimates, and pseudoinverse preconditioning weights;
//! * [`numerics`] — small dense complex linear algebra plus the two
//!   root-finding backends that cross-check each other.
//!
//! # Example
//!
//! Noise-free data for three equal-amplitude sources, separated end to end:
//!
//! ```
//! use rootcma::*;
//!
//! # fn run() -> Result<()> {
//! let scenario = Scenario::new(
//!     ArrayGeometry::new(8, 0.5)?,
//!     vec![
//!         SourceConfig::new(-53.2, 1.0)?,
//!         SourceConfig::new(3.23, 1.0)?,
//!         SourceConfig::new(20.0, 1.0)?,
//!     ],
//!     None,
//!     2000,
//!     1,
//! )?;
//! let x = synthesize(&scenario)?;
//! let state = run_preprocessor(&x, GammaPolicy::Adaptive, 1000)?;
//! let polynomial = build_polynomial(state.weights(), 1.0)?;
//! let mut roots = find_roots(&polynomial)?;
//! let order = select_roots(&mut roots, state.weights(), SelectionMode::BeamResponse, 0.5)?;
//! assert_eq!(order, 3);
//!
//! let angles = doa_from_roots(&roots, &scenario.geometry)?;
//! for (estimate, truth) in angles.iter().zip([-53.2, 3.23, 20.0]) {
//!     assert!((estimate - truth).abs() < 0.05);
//! }
//! // W^H A = I: one main lobe per source, nulls on the others.
//! let weights = reconstruct_and_precondition(&angles, &scenario.geometry)?;
//! assert_eq!(weights.model_order, 3);
//! # Ok(())
//! # }
//! # run().unwrap();
//! ```

pub mod array;
pub mod cma;
pub mod doa;
pub mod dsft;
pub mod error;
pub mod numerics;
pub mod precond;

pub use array::{
    derive_trial_seed, generate_cm_signals, spatial_frequency, steering_matrix, steering_vector,
    synthesize, ArrayGeometry, Scenario, SignalMatrix, SnapshotMatrix, SourceConfig,
};
pub use cma::{
    instant_cost, instant_gradient, modulus_error, rls_gain, run_ascent_normalized,
    run_descent_equalizer, AscentRunResult, CmaState, DescentRunResult, GradientDirection,
    RlsState,
};
pub use doa::{
    analytic_roots_two_sources, build_polynomial, doa_from_roots, find_roots,
    reconstruct_and_precondition, root_set_to_csv, select_roots, DoaEstimate, RootPolynomial,
    RootSet, SelectionMode,
};
pub use dsft::{
    beam_response, dirichlet_response, dsft_eval, impact_factor, phase_related_angles,
    sum_mode_response, sum_norm_squared, wrap_angular, BeamResponseGrid, ModeSet,
    PhaseRelatedAngles, DEFAULT_GRID_POINTS,
};
pub use error::{Error, Result};
pub use numerics::{
    companion_eigenvalues, hpd_solve, hpsd_min_norm_solve, max_pairing_distance, monic_from_roots,
    simultaneous_roots, CompanionMatrix, ComplexMatrix,
};
pub use precond::{
    ols_fit, precond_step, run_preprocessor, step_bound, GammaPolicy, PrecondState,
    ADAPTIVE_STEP_EPSILON,
};

/// Re-exported complex scalar used throughout the public API.
pub use num_complex::Complex64;
