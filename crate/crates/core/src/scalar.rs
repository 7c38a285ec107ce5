//! Scalar abstraction shared by the measure, hull and projection code.
//!
//! Everything that only needs field arithmetic and ordering is written
//! against [`Scalar`], so it runs on `f32`, `f64` and on exact rationals
//! ([`num_rational::BigRational`]). Code that needs `sqrt`, `powf` or `exp`
//! asks for [`Real`] instead.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Num + Signed + PartialOrd + Clone + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Exact types compare with zero tolerance.
    const EXACT: bool;

    /// Lossy conversion used for input, tolerances and reporting.
    fn from_f64_lossy(x: f64) -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `eps` for floating types, zero for exact ones.
    fn tol(eps: f64) -> Self {
        if Self::EXACT {
            Self::zero()
        } else {
            Self::from_f64_lossy(eps)
        }
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits every scalar")
    }

    fn is_finite_value(&self) -> bool {
        Self::EXACT || self.to_f64_lossy().is_finite()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn from_f64_lossy(x: f64) -> Self {
        x
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;
    fn from_f64_lossy(x: f64) -> Self {
        x as f32
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;
    fn from_f64_lossy(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }
}

impl Scalar for Rational64 {
    const EXACT: bool = true;
    fn from_f64_lossy(x: f64) -> Self {
        Rational64::approximate_float(x).unwrap_or_else(|| Rational64::from_integer(0))
    }
}

/// Floating-point scalars.
pub trait Real: Scalar + Float {
    fn c(x: f64) -> Self {
        Self::from_f64_lossy(x)
    }
}

impl Real for f64 {}
impl Real for f32 {}

/// Sum in a fixed left-to-right order.
pub fn sum<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::zero(), |acc, x| acc + x)
}
