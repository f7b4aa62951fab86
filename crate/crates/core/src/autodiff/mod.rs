//! Reverse-mode automatic differentiation over a per-forward tape.
//!
//! Values are dense row-major arrays. Production code runs in `f32`; every
//! op is generic over [`Real`] so the gradient checker can replay a forward
//! pass in `f64`.

mod checkpoint;
mod dropout;
pub mod gradcheck;
mod graph;
mod optim;
mod params;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use checkpoint::{load_checkpoint, save_checkpoint, ParamEntry, ParamManifest};
pub use dropout::{dropout, dropout_mask, Mode};
pub(crate) use graph::softmax_values;
pub use graph::{Graph, Var};
pub use optim::{sgd_step, SgdConfig, SgdState};
pub use params::{init_uniform, Gradients, Param, ParamStore, Tensor};

/// Scalar type the tape can run on.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + Sum + AddAssign + SubAssign + MulAssign + 'static
{
    fn from_f32(v: f32) -> Self;
    fn as_f32(self) -> f32;
    fn as_f64(self) -> f64;
    fn lit(v: f64) -> Self;
}

impl Real for f32 {
    fn from_f32(v: f32) -> Self {
        v
    }
    fn as_f32(self) -> f32 {
        self
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn lit(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn as_f32(self) -> f32 {
        self as f32
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn lit(v: f64) -> Self {
        v
    }
}

/// Floor applied inside `-ln(p)` so a zero probability yields a large finite loss.
pub const LOG_FLOOR: f64 = 1e-12;

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
