//! Scalar-generic geometry primitives used by the model and the metrics.
//!
//! Everything here is generic over [`Real`] so the numeric kernels can be
//! instantiated at `f32` or `f64`; the rest of the engine works with the
//! `f64` aliases exported from the crate root.

mod quaternion;
mod vector;

pub use quaternion::{Quaternion, QuaternionError};
pub use vector::Vector3;

use num_traits::float::FloatConst;
use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the geometry and metric kernels.
///
/// Blanket-implemented for any type providing the num-traits float surface;
/// in practice that is `f32` and `f64`.
pub trait Real: Float + FloatConst + FromPrimitive + core::fmt::Debug + core::fmt::Display {
    /// Lossy conversion from `f64`, used for constants inside generic code.
    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant converts to any Real")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + core::fmt::Debug + core::fmt::Display
{
}
