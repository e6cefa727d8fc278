//! Scalar abstraction shared by the estimation math.
//!
//! Everything that does arithmetic on signal values is generic over [`Scalar`],
//! which is satisfied by `f32` and `f64`. Timestamps stay integer microseconds.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable by the estimators: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Infallible for the supported float types.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable")
    }

    /// Converts a microsecond duration to seconds.
    #[inline]
    fn from_micros(us: i64) -> Self {
        Self::from_i64(us).expect("i64 representable") / Self::lit(1e6)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Wraps an angle to (-π, π].
pub fn wrap_angle<T: Scalar>(angle: T) -> T {
    let pi = T::lit(std::f64::consts::PI);
    let two_pi = pi + pi;
    let mut a = angle % two_pi;
    if a <= -pi {
        a += two_pi;
    } else if a > pi {
        a -= two_pi;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_keeps_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.1 + 4.0 * PI) - 0.1).abs() < 1e-12);
        assert!((wrap_angle(-0.1 - 2.0 * PI) + 0.1).abs() < 1e-12);
    }

    #[test]
    fn micros_to_seconds() {
        assert_eq!(<f64 as Scalar>::from_micros(250_000), 0.25);
        assert_eq!(<f32 as Scalar>::from_micros(500), 0.0005);
    }
}
