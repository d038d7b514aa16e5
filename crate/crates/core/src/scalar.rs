use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating scalar for the numeric kernels.
///
/// All solvers, densities and histograms are generic over this trait; `f64`
/// is the type used by the CLI and the acceptance tolerances, `f32` is kept
/// compiling to catch accidental precision assumptions. Exact arithmetic for
/// the lattice-lifetime path lives in [`crate::poly`] over `BigRational` and
/// does not go through this trait.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64` (identity for `f64`).
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 convertible to scalar")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize convertible to scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
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
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
