//! Scalar abstraction so the geometry and statistics work at `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the crate.
///
/// Blanket-implemented for any type with the required `num-traits`
/// capabilities; in practice `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts from `f64`, panicking only for non-finite values that the
    /// target type cannot represent (never the case for f32/f64 inputs here).
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 value representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize value representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Unit-norm tolerance: 1e-12 for f64, scaled up for coarser types.
    #[inline]
    fn norm_tolerance() -> Self {
        let eps_based = Self::epsilon() * Self::from_f64_lossy(32.0);
        let floor = Self::from_f64_lossy(1e-12);
        if eps_based > floor {
            eps_based
        } else {
            floor
        }
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::from_f64_lossy(0.5)
    }

    #[inline]
    fn pi() -> Self {
        Self::from_f64_lossy(std::f64::consts::PI)
    }

    /// Clamps to [-1, 1] before `acos`, guarding against rounding drift.
    #[inline]
    fn clamped_acos(self) -> Self {
        let one = Self::one();
        self.min(one).max(-one).acos()
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum<T>
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Running compensated (Neumaier) sum; keeps prefix sums accurate during
/// long directional scans.
#[derive(Clone, Copy, Debug)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator of scalars.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}
