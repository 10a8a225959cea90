//! Numeric traits the rest of the crate is generic over.
//!
//! Feature matrices, classifiers and generators are written against
//! [`Scalar`] (implemented for `f32` and `f64`). Rate-valued metrics are
//! written against [`Rate`], which additionally admits exact rational types
//! such as `num_rational::Ratio<i64>`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// Floating-point element type of feature matrices and model parameters.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + ScalarOperand + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; only used for constants and sampled values.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Value type of count-ratio metrics (selection rates, CFR, DIR, ...).
pub trait Rate: Num + Signed + FromPrimitive + Copy + PartialOrd + Debug {
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in Rate")
    }

    /// `num / den`; callers guarantee `den > 0`.
    #[inline]
    fn ratio(num: usize, den: usize) -> Self {
        Self::count(num) / Self::count(den)
    }

    #[inline]
    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }
}

impl<R> Rate for R where R: Num + Signed + FromPrimitive + Copy + PartialOrd + Debug {}
