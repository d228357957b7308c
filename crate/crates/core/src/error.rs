//! Shared error vocabulary for the numerical pipeline.
//!
//! Every failure a caller can act on gets its own variant; tolerances and the
//! offending quantities ride along so reports and CLI messages can name them.

use num_complex::Complex64;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("matrix entries must be finite (no NaN/Inf)")]
    NonFiniteMatrix,

    #[error("matrix power has no value at t = 0 on any branch")]
    ZeroBase,

    #[error("singular matrix: |det| = {det:.3e} is at or below tolerance {tol:.3e}")]
    SingularMatrix { det: f64, tol: f64 },

    #[error("path is not contiguous: segment {segment} starts {gap:.3e} away from the previous endpoint")]
    BrokenPath { segment: usize, gap: f64 },

    #[error("empty or zero-length path")]
    EmptyPath,

    #[error(
        "step size underflow at s = {s:.6} of segment {segment} (arclength step {step:.3e}); \
         probable singularity on or near the path"
    )]
    StepUnderflow { segment: usize, s: f64, step: f64 },

    #[error("integration exceeded the step budget of {max}")]
    MaxStepsExceeded { max: usize },

    #[error("loop radius {radius:.6e} too large: clearance to the nearest excluded point is {clearance:.6e}")]
    RadiusTooLarge { radius: f64, clearance: f64 },

    #[error("pole configuration touches the collision divisor: minimum gap {gap:.3e}")]
    PoleCollision { gap: f64 },

    #[error("monodromy product defect {defect:.3e} exceeds the allowed {limit:.3e}")]
    ProductDefect { defect: f64, limit: f64 },

    #[error("sample point {t} falls outside the declared sector")]
    OutOfSector { t: Complex64 },

    #[error("fitting basis is ill-conditioned: condition estimate {cond:.3e} exceeds {limit:.3e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error(
        "ratio denominator vanishes at t = {t} (|denominator| = {denom:.3e}, scale {scale:.3e})"
    )]
    DenominatorVanishes {
        t: Complex64,
        denom: f64,
        scale: f64,
    },

    #[error("singular point of the equation: factor {factor} vanishes at t = {t}")]
    SingularPoint { factor: &'static str, t: Complex64 },

    #[error(
        "eigenvalue gap violates the expansion window: |Re(λ1−λ2)| = {gap:.6} must be < 1 \
         for the limit system to exist"
    )]
    ExponentGapOutOfRange { gap: f64 },

    #[error(
        "movable pole of the solution near t ≈ {t_estimate} (step collapse after t = {t_last})"
    )]
    MovablePole {
        t_last: Complex64,
        t_estimate: Complex64,
    },

    #[error("invalid configuration at {pointer}: {message}")]
    ConfigInvalid { pointer: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
