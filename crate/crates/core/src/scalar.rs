//! Scalar abstraction for the numeric core.
//!
//! All signal and coefficient math is generic over [`Real`] so the same
//! code paths serve f32 and f64. On-disk containers are always 64-bit
//! little-endian floats regardless of the in-memory scalar.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating point scalar: f32 or f64.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64, panicking only for exotic types.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 -> Real conversion")
    }

    /// Widen to f64 for serialization and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real -> f64 conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean norm of a slice.
pub fn norm2<R: Real>(xs: &[R]) -> R {
    xs.iter().map(|&x| x * x).sum::<R>().sqrt()
}

/// Dot product of two equal-length slices.
pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Max absolute difference between two equal-length slices.
pub fn max_abs_diff<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(R::zero(), R::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_and_dot() {
        let v = [3.0f64, 4.0];
        assert_eq!(norm2(&v), 5.0);
        assert_eq!(dot(&v, &v), 25.0);
    }

    #[test]
    fn works_for_f32() {
        let v = [1.0f32, 2.0, 2.0];
        assert!((norm2(&v) - 3.0).abs() < 1e-6);
    }
}
