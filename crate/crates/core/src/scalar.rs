//! Floating-point abstraction shared by the numeric modules.
//!
//! Every numeric kernel (TF-IDF weights, k-means centroids, t-SNE
//! coordinates, topic distributions, network parameters) is written against
//! [`Scalar`], which is implemented for `f32` and `f64`. The pipeline and the
//! file formats use `f64`; the concrete aliases at the crate root fix that
//! choice for callers that do not care.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(x: f64) -> Self;

    /// Converts a count to the scalar type.
    fn of_usize(n: usize) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f64
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dot product of two equal-length slices, summed left to right.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Index of the largest element; ties resolve to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2f64, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1.0f32, 1.0]), 0);
    }

    #[test]
    fn distance_helpers_agree() {
        let a = [1.0f64, 2.0, 3.0];
        let b = [0.0f64, 2.0, 5.0];
        assert_eq!(squared_distance(&a, &b), 5.0);
        assert_eq!(dot(&a, &b), 19.0);
    }
}
