//! Floating-point abstraction shared by every numeric kernel.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar usable by the featurizer, model and trainer: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + ScalarOperand
    + LinalgScalar
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, rounding when `Self` is narrower.
    fn lit(x: f64) -> Self;

    /// Lossy conversion used by the on-disk float32 formats.
    fn to_f32_lossy(self) -> f32;

    fn from_f32_exact(x: f32) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f32_lossy(self) -> f32 {
        self
    }
    #[inline]
    fn from_f32_exact(x: f32) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f32_lossy(self) -> f32 {
        self as f32
    }
    #[inline]
    fn from_f32_exact(x: f32) -> Self {
        x as f64
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
