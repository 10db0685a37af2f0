//! Numerical tolerances shared across the crate.
//!
//! Values are relative to the Frobenius scale of the inputs wherever a
//! scale exists, with a `max(1, scale)` guard so that tiny operators are
//! compared absolutely.

/// Hermiticity: `‖M − M†‖_F ≤ HERMITICITY · max(1, ‖M‖_F)`.
pub const HERMITICITY: f64 = 1e-10;

/// Unit trace of density operators.
pub const TRACE: f64 = 1e-10;

/// Smallest eigenvalue accepted for a density operator is `-POSITIVITY`.
pub const POSITIVITY: f64 = 1e-9;

/// Reconstruction, unitarity and general matrix agreement.
pub const RECONSTRUCTION: f64 = 1e-8;

/// Relative commutator defect below which two operators commute.
pub const COMMUTATION: f64 = 1e-10;

/// Eigenvalues closer than this are treated as one degenerate block.
pub const DEGENERACY: f64 = 1e-9;

/// Probability normalization.
pub const NORMALIZATION: f64 = 1e-9;

/// Frobenius deviation allowed for a stationary state.
pub const CONSTANCY: f64 = 1e-8;

/// Relaxed positivity for states produced by the stepped integrator.
pub const STEPPED_POSITIVITY: f64 = 1e-7;

/// Relaxed trace tolerance for states produced by the stepped integrator.
pub const STEPPED_TRACE: f64 = 1e-8;

/// Default step for the stepped integrator.
pub const DEFAULT_STEP: f64 = 1e-3;
