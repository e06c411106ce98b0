//! Scalar abstraction for the vector and scoring kernels.
//!
//! Embedding vectors, fusion scores, matching weights and metrics are generic
//! over [`Scalar`] so the same code runs on `f32` (compact embedding stores)
//! and `f64` (feature extraction and learning).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; used for weights computed in double precision.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    /// Widening conversion used when scores leave the kernel layer.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::infinity)
    }

    /// Parse a decimal literal (embedding files).
    fn parse_decimal(s: &str) -> Option<Self>;
}

impl Scalar for f32 {
    fn parse_decimal(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Scalar for f64 {
    fn parse_decimal(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

/// Dot product of two equal-length slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    let na = norm(a);
    let nb = norm(b);
    if na == S::zero() || nb == S::zero() {
        return S::zero();
    }
    dot(a, b) / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0f64, 0.0], &[1.0, 2.0]), 0.0);
        assert_eq!(cosine::<f32>(&[], &[]), 0.0);
    }

    #[test]
    fn cosine_generic_over_precision() {
        let a = [1.0, 2.0, 3.0];
        let b = [3.0, 2.0, 1.0];
        let c64 = cosine::<f64>(&a, &b);
        let c32 = cosine::<f32>(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]);
        assert!((c64 - 10.0 / 14.0).abs() < 1e-15);
        assert!((c32 as f64 - c64).abs() < 1e-6);
    }
}
