//! Arithmetic used by the tree algorithms.
//!
//! Averages, oscillations, maximal functions, stopping families and the
//! antichain dynamic program only need field operations and comparisons, so
//! they are written once over [`Scalar`] and run either in `f64` or in exact
//! rational arithmetic. Every finite `f64` is a dyadic rational, so the
//! conversion into [`Rational`] is lossless.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

pub type Rational = num_rational::BigRational;

pub trait Scalar:
    Clone
    + PartialOrd
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Exact for [`Rational`]; panics on non-finite input there.
    fn from_f64(x: f64) -> Self;
    fn from_u64(n: u64) -> Self;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;
    fn powi(&self, n: u32) -> Self;
    /// Whether arithmetic in this type is exact.
    fn is_exact() -> bool;

    /// `a ≤ b`, allowing `tol·scale` of rounding slack when inexact.
    fn le_within(a: &Self, b: &Self, scale: &Self, tol: f64) -> bool {
        if Self::is_exact() {
            a <= b
        } else {
            a.clone() <= b.clone() + Self::from_f64(tol) * scale.abs()
        }
    }

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn powi(&self, n: u32) -> Self {
        f64::powi(*self, n as i32)
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(x: f64) -> Self {
        Rational::from_float(x).expect("finite value")
    }
    fn from_u64(n: u64) -> Self {
        Rational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn powi(&self, n: u32) -> Self {
        num_traits::pow::pow(self.clone(), n as usize)
    }
    fn is_exact() -> bool {
        true
    }
}

/// `num/den` rendering used in reports.
pub fn rational_string(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_conversion_is_exact() {
        let x = 0.1f64;
        let r = Rational::from_f64(x);
        assert_eq!(r.to_f64(), x);
        assert_eq!(Rational::from_f64(0.75), Rational::new(3.into(), 4.into()));
    }

    #[test]
    fn rational_powers() {
        let r = Rational::new(3.into(), 2.into());
        assert_eq!(r.powi(3), Rational::new(27.into(), 8.into()));
        assert_eq!(rational_string(&r), "3/2");
    }
}
