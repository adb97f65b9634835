//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by operator construction, spectral analysis, and dynamics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("site ({row},{col}) outside the {n}x{n} lattice")]
    SiteOutOfRange { row: u8, col: u8, n: usize },

    #[error("duplicate factor on site ({row},{col})")]
    DuplicateSite { row: u8, col: u8 },

    #[error("unparseable Pauli string token `{0}`")]
    BadStringToken(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("operator is not hermitian (max |A - A^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("algebra relation is ambiguous (an operand is numerically zero)")]
    AmbiguousRelation,

    #[error("ground space is not two-dimensional: {0}")]
    DegeneracyMismatch(String),

    #[error("symmetry violated in the ground space: {0}")]
    SymmetryViolation(String),

    #[error("perturbation h = {h:.3e} closes the protecting gap")]
    LevelCrossing { h: f64 },

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("step dt = {dt:.3e} exceeds 0.01 / |H| = {limit:.3e}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("state norm drifted by {drift:.3e} (> {tol:.1e}); step too large")]
    NormDrift { drift: f64, tol: f64 },

    #[error("step-halving check failed: overlap deficit changed by {change:.3e}")]
    ConvergenceCheck { change: f64 },

    #[error("state is not normalized (|norm - 1| = {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    #[error("pulse amplitude g_max = {g_max:.3e} is not below the gap {gap:.3e}")]
    GMaxExceedsGap { g_max: f64, gap: f64 },

    #[error("pulse left the logical space (leakage = {leakage:.3e}); not adiabatic")]
    NonAdiabaticPulse { leakage: f64 },

    #[error("logical block is not unitary within tolerance (residual = {residual:.3e})")]
    NonUnitaryBlock { residual: f64 },

    #[error("axis {0} is not supported here")]
    UnsupportedAxis(String),

    #[error("classifier and projection oracle disagree (residual = {residual:.3e})")]
    OracleMismatch { residual: f64 },

    #[error("amplitude calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("fit needs at least {needed} usable points, got {got}")]
    FitUnderdetermined { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear algebra backend error: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;
