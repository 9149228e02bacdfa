//! Floating-point abstraction for the numeric core.
//!
//! All algorithms are written against [`Scalar`] so the same code runs in
//! `f32` and `f64`. The trait is a thin extension of `num_traits::Float`
//! with the one special function the model needs (the standard normal CDF)
//! and a per-type validation tolerance.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the numeric core is generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Standard normal cumulative distribution function `Phi(x)`.
    ///
    /// Implementations must stay accurate deep into the tails (the system
    /// matrix builder evaluates differences of nearby tail values), which is
    /// why this routes through `erfc` rather than `erf`.
    fn normal_cdf(self) -> Self;

    /// Absolute tolerance used when checking that system-matrix rows sum
    /// to one.
    fn row_sum_tolerance() -> Self;

    /// Shorthand for the inevitable `from_f64(..).unwrap()` on constants
    /// that are exactly representable in every supported type.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in this scalar type")
    }
}

impl Scalar for f64 {
    fn normal_cdf(self) -> Self {
        // Phi(x) = erfc(-x / sqrt(2)) / 2, accurate for x down to ~ -37.
        0.5 * libm::erfc(-self * std::f64::consts::FRAC_1_SQRT_2)
    }

    fn row_sum_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn normal_cdf(self) -> Self {
        // Evaluate in f64 and round once; erfcf loses too much in the tails.
        (0.5 * libm::erfc(-(self as f64) * std::f64::consts::FRAC_1_SQRT_2)) as f32
    }

    fn row_sum_tolerance() -> Self {
        1e-4
    }
}
