//! Minimal batch-first layer library with hand-written reverse-mode gradients.
//!
//! Every layer caches what its backward pass needs during [`Layer::forward`]; calling
//! [`Layer::backward`] without a recorded forward pass is an error. [`Layer::infer`] is the
//! cache-free, eval-mode path used by frozen models.

mod activation;
mod conv;
pub mod gemm;
pub mod gradcheck;
mod linear;
mod loss;
mod norm;
mod optim;
mod tensor;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use activation::{relu, sigmoid, Relu};
pub use conv::{conv_output_dim, Conv2d, MaxPool2d};
pub use linear::Linear;
pub use loss::{bce_batch, bce_loss, BCE_CLAMP};
pub use norm::{BatchNorm, Dropout};
pub use optim::{adam_step, sgd_step, OptimizerKind, OptimizerState};
pub use tensor::{Param, Tensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("kernel {kernel}×{kernel} is larger than the {height}×{width} input")]
    KernelLargerThanInput {
        kernel: usize,
        height: usize,
        width: usize,
    },
    #[error("backward called without a recorded forward pass")]
    NoForwardRecorded,
    #[error("parameter {0} has no gradient")]
    MissingGradient(String),
    #[error("label {0} is not 0 or 1")]
    LabelOutOfDomain(f64),
    #[error("invalid layer parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-call forward state: train/eval mode and the RNG that drives dropout.
pub struct ForwardCtx<'a> {
    pub mode: Mode,
    pub rng: &'a mut ChaCha8Rng,
}

impl<'a> ForwardCtx<'a> {
    pub fn new(mode: Mode, rng: &'a mut ChaCha8Rng) -> Self {
        ForwardCtx { mode, rng }
    }
}

pub trait Layer {
    fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError>;

    /// Accumulates parameter gradients and returns the gradient with respect to the input.
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError>;

    fn infer(&self, x: &Tensor) -> Result<Tensor, NnError>;

    /// [`forward`](Layer::forward) on an owned input; elementwise layers reuse its buffer.
    fn forward_owned(&mut self, x: Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        self.forward(&x, ctx)
    }

    /// [`backward`](Layer::backward) on an owned gradient; elementwise layers reuse its buffer.
    fn backward_owned(&mut self, grad_out: Tensor) -> Result<Tensor, NnError> {
        self.backward(&grad_out)
    }

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    /// True when the layer is non-differentiable at input value 0 (ReLU).
    fn kink_at_zero(&self) -> bool {
        false
    }
}

/// Uniform `±sqrt(1/fan_in)` initialization.
pub(crate) fn init_uniform(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<f64> {
    let bound = (1.0 / fan_in.max(1) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}

pub(crate) fn expect_shape(x: &Tensor, dims: &[Option<usize>]) -> Result<(), NnError> {
    let ok = x.shape().len() == dims.len()
        && x
            .shape()
            .iter()
            .zip(dims)
            .all(|(&s, d)| d.is_none_or(|d| d == s));
    if ok {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch {
            expected: format!("{dims:?}"),
            found: format!("{:?}", x.shape()),
        })
    }
}
