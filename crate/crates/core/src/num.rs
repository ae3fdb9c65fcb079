//! Scalar abstraction for the numeric pipeline.
//!
//! All matrix-valued computation (embeddings, projections, graphs, fields)
//! is generic over [`Real`], so the same code runs in `f32` (the on-disk
//! matrix precision) or `f64` (useful when algebraic identities must hold
//! to tight tolerances).

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};
use std::fmt;
use std::iter::Sum;

/// Floating-point scalar usable throughout the pipeline: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64`; panics only for exotic types
    /// that cannot represent ordinary finite values.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    /// Conversion to `f64` for statistics and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Squared Euclidean distance between two equal-length slices.
pub fn sq_euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(T::zero(), |acc, s| acc + s)
}

/// Euclidean distance.
pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    sq_euclidean(a, b).sqrt()
}

/// L2 norm of a slice.
pub fn l2_norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).fold(T::zero(), |acc, s| acc + s).sqrt()
}

/// Cosine similarity; zero-norm inputs yield 0.
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> T {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    let dot = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| x * y)
        .fold(T::zero(), |acc, s| acc + s);
    dot / (na * nb)
}

/// Cosine distance `1 - cos`; zero-norm inputs are maximally distant.
pub fn cosine_distance<T: Real>(a: &[T], b: &[T]) -> T {
    T::one() - cosine_similarity(a, b)
}
