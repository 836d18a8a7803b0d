//! Minimal neural-network engine: the fixed layer set needed by the two
//! gesture classifiers, with explicit backprop and finite-difference
//! gradient checking. No autodiff, no GPU.

pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod net;
pub mod tensor;

use core::fmt::Debug;
use num_traits::{Float, NumAssignOps};

pub use gradcheck::grad_check;
pub use layers::{
    BatchNorm2d, Conv2d, Dense, Dropout, Flatten, FrameMerge, FrameSplit, MaxPool2d, ReLU,
    Softmax, Standardize,
};
pub use lstm::LstmCell;
pub use net::{cross_entropy, sgd_step, Param, Sequential};
pub use tensor::Tensor;

/// Element type for tensors and layer math.
pub trait Scalar: Float + NumAssignOps + Debug + Default + Send + Sync + 'static {}
impl Scalar for f32 {}
impl Scalar for f64 {}

/// Forward-pass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, dropout active, caches recorded, running stats
    /// updated.
    Train,
    /// Deterministic inference: running statistics, dropout disabled,
    /// no caches.
    Eval,
    /// Train-mode math with frozen statistics and dropout disabled; the
    /// idempotent variant used by the gradient checker.
    Frozen,
}

impl Mode {
    pub fn records_cache(self) -> bool {
        !matches!(self, Mode::Eval)
    }
}

/// One layer of the network. Layers own their parameters, gradients, and
/// forward caches; `backward` must follow a cache-recording `forward`.
pub trait Layer<T: Scalar>: Send {
    fn kind(&self) -> &'static str;

    fn forward(
        &mut self,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut crate::rng::SimRng,
    ) -> crate::error::Result<Tensor<T>>;

    fn backward(&mut self, grad_out: &Tensor<T>) -> crate::error::Result<Tensor<T>>;

    fn params(&self) -> alloc::vec::Vec<&Param<T>> {
        alloc::vec::Vec::new()
    }

    fn params_mut(&mut self) -> alloc::vec::Vec<&mut Param<T>> {
        alloc::vec::Vec::new()
    }

    /// Trainable parameter count (running statistics excluded).
    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.numel()).sum()
    }

    /// Persistable tensors: trainable parameters plus any running
    /// statistics, in a stable order.
    fn state(&self) -> alloc::vec::Vec<(&'static str, &Tensor<T>)> {
        alloc::vec::Vec::new()
    }

    fn state_mut(&mut self) -> alloc::vec::Vec<(&'static str, &mut Tensor<T>)> {
        alloc::vec::Vec::new()
    }
}
