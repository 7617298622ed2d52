//! Minimal neural-network substrate.
//!
//! Everything here is generic over [`Real`] so the same layer code runs in
//! 32-bit for training and in 64-bit for gradient checks. Networks are flat
//! parameter vectors plus a layer list; a forward pass can record a linear
//! [`Tape`] that is replayed once to produce parameter gradients.

mod checkpoint;
mod layers;
mod loss;
mod net;
mod optim;

pub use checkpoint::{average_checkpoints, Checkpoint, ManifestEntry};
pub use layers::{conv2d_same, dense_forward, Layer};
pub use loss::{binary_cross_entropy, softmax, softmax_cross_entropy};
pub use net::{Network, Tape};
pub use optim::{lr_at, AdamHyper, OptState};

use num_traits::Float;
use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Floating-point storage type for parameters and activations.
pub trait Real:
    Float + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Send + Sync + 'static
{
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    #[inline(always)]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline(always)]
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline(always)]
    fn of(x: f64) -> Self {
        x
    }
    #[inline(always)]
    fn f64(self) -> f64 {
        self
    }
}

/// Converts a parameter vector between storage precisions.
pub fn cast_vec<A: Real, B: Real>(v: &[A]) -> Vec<B> {
    v.iter().map(|x| B::of(x.f64())).collect()
}
