//! Crate-wide error type.
//!
//! Variants are grouped by how callers are expected to react: configuration
//! and input problems (`InvalidArgument`, `DimensionMismatch`, `Parse`),
//! degenerate data that makes the likelihood undefined (`DegenerateSupport`),
//! and numerical failures of the uncertainty machinery (`IllConditioned`,
//! `FdStepTooLarge`). Diagnostic payloads are carried as `f64` regardless of
//! the scalar type the computation ran in.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value or configuration field is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two objects that must agree in shape do not.
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A detector observed counts but the model assigns it zero mass, so the
    /// likelihood (and every quantity derived from it) is undefined.
    /// Detector indices are reported 1-based.
    #[error("degenerate support: detector {detector} observed {count} counts but has zero projected mass")]
    DegenerateSupport { detector: usize, count: u64 },

    /// The information matrix could not be inverted to working precision.
    #[error("information matrix is singular or ill-conditioned (1-norm condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    /// A finite-difference step would push a projected mean to zero or below,
    /// leaving the perturbed score undefined. Pixel indices are 1-based.
    #[error("finite-difference step {epsilon:.3e} on pixel {pixel} drives a projected mean non-positive; reduce the step")]
    FdStepTooLarge { pixel: usize, epsilon: f64 },

    /// Text input (CSV/TOML) could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
