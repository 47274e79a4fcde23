//! Scalar abstraction for the droplet algebra.
//!
//! Geometry runs either in `f64` (numerics) or in exact rationals (algebraic
//! law checks); both implement [`Scalar`].

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};
use std::fmt::Debug;
use std::ops::Neg;

/// Field scalar with the conversions the droplet code needs.
pub trait Scalar:
    Num + Signed + Neg<Output = Self> + Clone + PartialOrd + Debug + 'static
{
    fn from_int(n: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Slack allowed when deciding whether a constraint is tight;
    /// zero for exact types.
    fn tight_tol() -> Self;
}

impl Scalar for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn tight_tol() -> Self {
        1e-9
    }
}

impl Scalar for BigRational {
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn tight_tol() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
}
