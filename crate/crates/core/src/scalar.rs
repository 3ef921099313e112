//! Numeric backends.
//!
//! Every solver is generic over [`Scalar`] so the same code runs in binary
//! floating point or in exact rational arithmetic. Exact mode is what lets
//! the oracles confirm solver output with a zero tolerance.

use core::fmt::{Debug, Display};
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational number used by the rational numeric mode.
pub type Rational = BigRational;

/// Ordered field used by every solver in this crate.
pub trait Scalar:
    Clone
    + PartialOrd
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// `true` when arithmetic is exact (comparisons may use zero tolerance).
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    /// `num / den`, exact in rational mode.
    fn ratio(num: i64, den: i64) -> Self;
    /// Conversion from a binary float. Exact backends take the float's exact value.
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;

    fn from_int(n: i64) -> Self {
        Self::ratio(n, 1)
    }

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    fn max_of(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn min_of(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    /// Positive part `max(x, 0)`.
    fn pos(&self) -> Self {
        Self::max_of(self, &Self::zero())
    }

    /// Negative part `max(-x, 0)`.
    fn neg_part(&self) -> Self {
        Self::max_of(&-self.clone(), &Self::zero())
    }

    /// `|a - b| <= tol`.
    fn approx_eq(&self, other: &Self, tol: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= *tol
    }

    /// `a > b + tol`, i.e. strictly greater beyond the tolerance band.
    fn definitely_gt(&self, other: &Self, tol: &Self) -> bool {
        *self > other.clone() + tol.clone()
    }

    /// `a >= b - tol`.
    fn approx_ge(&self, other: &Self, tol: &Self) -> bool {
        *self >= other.clone() - tol.clone()
    }

    fn is_finite(&self) -> bool {
        true
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        if *self < 0.0 {
            -*self
        } else {
            *self
        }
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <Rational as Zero>::zero()
    }
    fn one() -> Self {
        <Rational as One>::one()
    }
    fn ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_f64(x: f64) -> Self {
        Rational::from_float(x).unwrap_or_else(<Rational as Zero>::zero)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_ratio_is_reduced() {
        let a = Rational::ratio(152, 18);
        assert_eq!(a, Rational::ratio(76, 9));
        assert!((Scalar::to_f64(&a) - 8.444_444_444_444_445).abs() < 1e-15);
    }

    #[test]
    fn parts_and_tolerances() {
        assert_eq!(Scalar::pos(&-3.0_f64), 0.0);
        assert_eq!(Scalar::neg_part(&-3.0_f64), 3.0);
        assert!(1.0_f64.approx_eq(&(1.0 + 1e-13), &1e-12));
        assert!(!Rational::ratio(1, 3).approx_eq(&Rational::ratio(333, 1000), &<Rational as Scalar>::zero()));
        assert!(Rational::ratio(2, 3).definitely_gt(&Rational::ratio(1, 2), &<Rational as Scalar>::zero()));
    }
}
