//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Scalar`] so the same
//! engine runs in `f32` or `f64`. The CLI and the default type aliases pin
//! `f64`.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable throughout the crate.
///
/// Built on `num_traits::Float` plus the assign operators, primitive
/// conversions, and serde bounds the report/serialization layer needs.
pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for literals and config defaults.
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("f64 conversion")
    }

    /// Conversion from a count or index.
    fn from_usize_lossy(value: usize) -> Self {
        Self::from_usize(value).expect("usize conversion")
    }

    /// Lossy widening to `f64`, for timing and display paths.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 widening")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
