//! Scalar types usable for probabilities and utilities.
//!
//! All verdicts compare expectations with `==`, so only [`Rational`] gives
//! decidable answers. The float impls exist for quick approximate sweeps.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive};

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

pub trait Scalar:
    Num + Clone + Debug + Display + PartialOrd + Send + Sync + 'static
{
    /// Converts an exact rational into this scalar type.
    fn from_rational(value: &Rational) -> Self;

    /// Whether `self` equals one for normalization checks.
    fn is_unit_mass(&self) -> bool {
        self.is_one()
    }

    /// Whether `self` is strictly negative.
    fn is_negative_value(&self) -> bool {
        *self < Self::zero()
    }

    /// Canonical text form. Exact scalars render as `p/q`.
    fn render(&self) -> String {
        self.to_string()
    }

    fn from_i64(value: i64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(value)))
    }
}

impl Scalar for Rational {
    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }

    fn is_negative_value(&self) -> bool {
        self.is_negative()
    }

    fn render(&self) -> String {
        render_rational(self)
    }
}

impl Scalar for f64 {
    fn from_rational(value: &Rational) -> Self {
        value.to_f64().unwrap_or(f64::NAN)
    }

    fn is_unit_mass(&self) -> bool {
        (self - 1.0).abs() <= 1e-9
    }
}

impl Scalar for f32 {
    fn from_rational(value: &Rational) -> Self {
        value.to_f32().unwrap_or(f32::NAN)
    }

    fn is_unit_mass(&self) -> bool {
        (self - 1.0).abs() <= 1e-5
    }
}

/// Renders `1/2` as `"1/2"` and integers without a denominator.
pub fn render_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}
