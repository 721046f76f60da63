//! Minimal differentiable numeric core.
//!
//! Dense row-major tensors over `f32` (training) or `f64` (gradient
//! checking), plus the layer set the two networks are built from:
//! 2D convolution, activations, batch normalization, cross-entropy,
//! Xavier initialization, and the two optimizers. No general autodiff;
//! every backward pass is written by hand and checked against central
//! finite differences.

mod activation;
mod conv;
mod gradcheck;
mod init;
mod loss;
mod norm;
mod optim;
mod rng;

pub use activation::{activate, activate_backward, Activation};
pub use conv::{conv2d, conv2d_backward, Conv2dGrads};
pub use gradcheck::{central_differences, finite_diff_check, max_relative_error};
pub use init::xavier_init;
pub use loss::{cross_entropy, cross_entropy_backward, CLAMP_DELTA};
pub use norm::{batch_norm, batch_norm_backward, standardize, standardize_backward, BatchNormCache};
pub use optim::{adam_step, sgd_momentum_step};
pub use rng::RngStream;

use std::fmt;
use thiserror::Error;

/// Errors from tensor construction and the core ops.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("data length {got} does not match shape {shape:?} ({expected} elements)")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("shape {0:?} has a zero extent")]
    ZeroExtent(Vec<usize>),
    #[error("tensor rank {got} where {expected} expected")]
    Rank { expected: usize, got: usize },
    #[error("kernel window {kh}x{kw} must be odd in both dimensions")]
    EvenKernel { kh: usize, kw: usize },
    #[error("{params} per-channel parameters for {channels} channels")]
    ChannelMismatch { channels: usize, params: usize },
    #[error("fan_in and fan_out must be at least 1")]
    ZeroFan,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

/// Scalar element type for tensors: `f32` for training, `f64` for
/// gradient-check mode.
pub trait Element:
    num_traits::Float
    + num_traits::NumAssign
    + std::iter::Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Element for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dense n-dimensional array, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<E: Element = f32> {
    shape: Vec<usize>,
    data: Vec<E>,
}

impl<E: Element> Tensor<E> {
    /// Zero-filled tensor. Extents must all be positive.
    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, E::zero())
    }

    /// Constant-filled tensor.
    pub fn full(shape: &[usize], value: E) -> Self {
        assert!(
            !shape.iter().any(|&d| d == 0),
            "tensor shape {shape:?} has a zero extent"
        );
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    /// Build from explicit data; length must match the shape product.
    pub fn from_vec(shape: &[usize], data: Vec<E>) -> Result<Self, TensorError> {
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::ZeroExtent(shape.to_vec()));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                shape: shape.to_vec(),
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Build by evaluating `f` at each flat (row-major) index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> E) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    /// Elementwise map into a new tensor of the same shape.
    pub fn map(&self, f: impl Fn(E) -> E) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped tensors.
    pub fn zip_map(&self, other: &Self, f: impl Fn(E, E) -> E) -> Result<Self, TensorError> {
        self.check_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self += other` elementwise.
    pub fn add_assign(&mut self, other: &Self) -> Result<(), TensorError> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self *= s` elementwise.
    pub fn scale_assign(&mut self, s: E) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn fill(&mut self, value: E) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn sum(&self) -> E {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Convert element precision (f32 <-> f64).
    pub fn cast<F: Element>(&self) -> Tensor<F> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| F::from_f64(v.to_f64())).collect(),
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<(), TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        Ok(())
    }
}

/// A learnable tensor with its gradient and optimizer-state slots.
///
/// `m` doubles as SGD velocity and Adam first moment; `v` is the Adam
/// second moment. Both start at zero.
#[derive(Clone, Debug)]
pub struct Parameter<E: Element = f32> {
    pub value: Tensor<E>,
    pub grad: Tensor<E>,
    pub m: Tensor<E>,
    pub v: Tensor<E>,
}

impl<E: Element> Parameter<E> {
    pub fn new(value: Tensor<E>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Parameter {
            grad: grad.clone(),
            m: grad.clone(),
            v: grad,
            value,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(E::zero());
    }

    /// Accumulate `g` into the stored gradient.
    pub fn accumulate(&mut self, g: &Tensor<E>) -> Result<(), TensorError> {
        self.grad.add_assign(g)
    }

    pub fn cast<F: Element>(&self) -> Parameter<F> {
        Parameter {
            value: self.value.cast(),
            grad: self.grad.cast(),
            m: self.m.cast(),
            v: self.v.cast(),
        }
    }
}
