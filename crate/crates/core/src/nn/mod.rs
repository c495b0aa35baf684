//! A small tensor and layer library: exactly the layers the classifiers
//! use, each with a hand-written backward pass.
//!
//! Everything is generic over [`Scalar`] so the same code trains in `f32`
//! and is gradient-checked in `f64`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::Serialize;

mod activation;
mod adam;
mod conv;
mod dense;
pub mod gradcheck;
pub mod init;
mod loss;
mod lstm;
mod network;
mod pool;
mod tensor;

pub use activation::{activation, activation_backward, Activation};
pub use adam::AdamState;
pub use conv::Conv1d;
pub use dense::Dense;
pub use gradcheck::{gradient_check, GradCheckReport, GradientCheckable, NetworkObjective, ParamCheck};
pub use loss::{loss, loss_gradient, LossKind, PROB_CLAMP};
pub use lstm::{DropoutSpec, Lstm, LstmCache};
pub use network::{Backward, Layer, Network};
pub use pool::{global_avg_pool, global_avg_pool_backward};
pub use tensor::{axpy, dot, Tensor};

/// Floating-point element type for tensors.
pub trait Scalar:
    Float
    + Debug
    + Default
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn of(value: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(value: f64) -> Self {
        value as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(value: f64) -> Self {
        value
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Training vs. inference, plus the seed that drives dropout masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    pub training: bool,
    pub seed: u64,
}

impl Mode {
    pub fn inference() -> Self {
        Mode { training: false, seed: 0 }
    }

    pub fn training(seed: u64) -> Self {
        Mode { training: true, seed }
    }

    /// Derives an independent stream for a sub-component (layer, example).
    pub fn derive(self, salt: u64) -> Self {
        Mode { training: self.training, seed: mix_seed(self.seed, salt) }
    }
}

/// SplitMix64-style combination of two seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
