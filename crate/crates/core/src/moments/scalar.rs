use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational number.
pub type Rational = Ratio<BigInt>;

/// Field operations shared by the floating-point and exact backends.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_int(v: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// `|self| <= tol` in floating point; exact zero for rationals.
    fn negligible(&self, tol: f64) -> bool;

    fn abs_value(&self) -> Self;

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn powi(&self, e: u32) -> Self {
        (0..e).fold(Self::one(), |acc, _| acc * self.clone())
    }
}

impl Scalar for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn negligible(&self, tol: f64) -> bool {
        self.abs() <= tol
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }

    fn powi(&self, e: u32) -> Self {
        f64::powi(*self, e as i32)
    }
}

impl Scalar for Rational {
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(BigInt::from(v))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn abs_value(&self) -> Self {
        self.abs()
    }
}

/// Sum of an iterator of scalars.
pub(crate) fn sum<T: Scalar>(it: impl IntoIterator<Item = T>) -> T {
    it.into_iter().fold(T::zero(), |a, b| a + b)
}
