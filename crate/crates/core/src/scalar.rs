//! Scalar abstraction shared by the curve algebra and the cyclic reliability models.
//!
//! Everything that only needs field arithmetic and ordering is written against
//! [`Scalar`], so the same code runs on `f32`, `f64` and exact `BigRational`.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Numeric type usable by the analysis code.
pub trait Scalar:
    Num + Signed + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Relative tolerance applied at comparison sites. Zero for exact types.
    fn tolerance() -> Self;

    /// `e^self`. Exact types go through `f64` and convert back exactly.
    fn exp(&self) -> Self;

    /// Converts a literal. Panics only for non-finite input.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(|| panic!("non-finite scalar literal {x}"))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_u64_exact(n: u64) -> Self {
        Self::from_u64(n).expect("integer is representable")
    }

    /// Equality within [`Scalar::tolerance`], relative to the larger magnitude.
    fn approx_eq(&self, other: &Self) -> bool {
        let diff = (self.clone() - other.clone()).abs();
        let scale = max_of(self.abs(), other.abs());
        let scale = max_of(scale, Self::one());
        diff <= Self::tolerance() * scale
    }

    /// `self <= other` up to tolerance.
    fn approx_le(&self, other: &Self) -> bool {
        self <= other || self.approx_eq(other)
    }
}

pub(crate) fn max_of<S: Scalar>(a: S, b: S) -> S {
    if a >= b {
        a
    } else {
        b
    }
}

/// `[x]₊ = max(0, x)`.
pub fn clamp0<S: Scalar>(x: S) -> S {
    max_of(x, S::zero())
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }

    fn exp(&self) -> Self {
        f64::exp(*self)
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }

    fn exp(&self) -> Self {
        f32::exp(*self)
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }

    fn exp(&self) -> Self {
        let x = self.to_f64().unwrap_or(f64::NAN).exp();
        BigRational::from_f64(x).expect("finite exponential")
    }
}

/// Builds an exact rational `num / den`.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
