//! Minimal double-double (compensated) arithmetic.
//!
//! The finite-difference information oracle differences two nearly equal
//! score vectors; in plain working precision the cancellation noise on the
//! smallest information entries is larger than the tolerance the oracle is
//! held to. Carrying the score evaluation in an unevaluated hi+lo pair keeps
//! the differencing error at the level of the truncation term instead.
//!
//! Only the handful of operations the oracle needs are implemented. The
//! error-free transforms are the textbook ones (Knuth two-sum, FMA-based
//! two-product); `Float::mul_add` guarantees the single-rounding product.

use num_traits::Float;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Dd<S> {
    pub hi: S,
    pub lo: S,
}

/// Error-free sum of two scalars (no magnitude assumption).
#[inline]
fn two_sum<S: Float>(a: S, b: S) -> (S, S) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Error-free sum assuming `|a| >= |b|`.
#[inline]
fn quick_two_sum<S: Float>(a: S, b: S) -> (S, S) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

/// Error-free product via fused multiply-add.
#[inline]
fn two_prod<S: Float>(a: S, b: S) -> (S, S) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl<S: Float> Dd<S> {
    #[inline]
    pub fn zero() -> Self {
        Dd {
            hi: S::zero(),
            lo: S::zero(),
        }
    }

    #[inline]
    pub fn from_scalar(x: S) -> Self {
        Dd {
            hi: x,
            lo: S::zero(),
        }
    }

    /// Exact product of two scalars, kept in extended form.
    #[inline]
    pub fn prod(a: S, b: S) -> Self {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    #[inline]
    fn renorm(hi: S, lo: S) -> Self {
        let (h, l) = quick_two_sum(hi, lo);
        Dd { hi: h, lo: l }
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        Dd::renorm(s, e + self.lo + o.lo)
    }

    #[inline]
    pub fn add_scalar(self, x: S) -> Self {
        let (s, e) = two_sum(self.hi, x);
        Dd::renorm(s, e + self.lo)
    }

    #[inline]
    pub fn neg(self) -> Self {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    #[inline]
    pub fn mul_scalar(self, x: S) -> Self {
        let (p, e) = two_prod(self.hi, x);
        Dd::renorm(p, e + self.lo * x)
    }

    /// Quotient `self / d`, accurate to roughly eps^2 relative error.
    #[inline]
    pub fn div(self, d: Self) -> Self {
        let q1 = self.hi / d.hi;
        let r1 = self.sub(d.mul_scalar(q1));
        let q2 = (r1.hi + r1.lo) / d.hi;
        let r2 = r1.sub(d.mul_scalar(q2));
        let q3 = (r2.hi + r2.lo) / d.hi;
        Dd::renorm(q1, q2).add_scalar(q3)
    }

    /// Collapse back to working precision.
    #[inline]
    pub fn value(self) -> S {
        self.hi + self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_plus_small_round_trips() {
        // 1e16 + 1 - 1e16 loses the 1 in plain f64; the dd sum keeps it.
        let naive = (1e16_f64 + 1.0) - 1e16;
        assert_ne!(naive, 1.0);
        let s = Dd::from_scalar(1e16).add_scalar(1.0).add_scalar(-1e16);
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn division_refines_beyond_working_precision() {
        // (1/3) * 3 == 1 to ~eps^2 when the quotient carries its low word.
        let third = Dd::from_scalar(1.0).div(Dd::from_scalar(3.0));
        let back = third.mul_scalar(3.0).add_scalar(-1.0);
        assert!(back.value().abs() < 1e-30, "residual {:e}", back.value());
        // The low word is genuinely non-trivial: it carries the part of 1/3
        // that working precision drops.
        assert!(third.lo.abs() > 0.0);
    }

    #[test]
    fn product_error_term_is_exact() {
        let a = 1.0 + f64::EPSILON;
        let b = 1.0 - f64::EPSILON;
        let p = Dd::prod(a, b);
        // a*b = 1 - eps^2 exactly; hi rounds to 1, lo carries -eps^2.
        assert_eq!(p.hi, 1.0);
        assert_eq!(p.lo, -f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn mixed_chain_matches_high_precision_reference() {
        // Compute sum_{k=1..50} 1/k^2 in dd and compare against a frozen
        // 40-digit reference value.
        let mut s = Dd::<f64>::zero();
        for k in 1..=50u32 {
            let k = k as f64;
            s = s.add(Dd::from_scalar(1.0).div(Dd::prod(k, k)));
        }
        let reference = 1.6251327336215293;
        assert!((s.value() - reference).abs() < 1e-16);
    }
}
