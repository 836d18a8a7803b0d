//! Parameter bundles, the sequential container, loss, and the optimizer.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, Scalar, Tensor};
use crate::rng::SimRng;

/// A trainable tensor with its gradient accumulator and momentum buffer.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub momentum: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        let momentum = Tensor::zeros(value.shape());
        Self {
            value,
            grad,
            momentum,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Classic SGD with momentum: `v = m*v - lr*g; w += v`, in place.
pub fn sgd_step<T: Scalar>(params: &mut [&mut Param<T>], lr: T, momentum: T) {
    for p in params.iter_mut() {
        let g = p.grad.data();
        let v = p.momentum.data_mut();
        for i in 0..v.len() {
            v[i] = momentum * v[i] - lr * g[i];
        }
        let v = p.momentum.data();
        let w = p.value.data_mut();
        for i in 0..w.len() {
            w[i] += v[i];
        }
    }
}

/// Mean cross-entropy over the batch given class probabilities (softmax
/// output) and target class indices. Returns the loss and its gradient with
/// respect to the probabilities.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, targets: &[usize]) -> Result<(T, Tensor<T>)> {
    let n = probs.batch();
    let k = probs.stride0();
    if n != targets.len() {
        return Err(Error::ShapeMismatch {
            context: "cross_entropy".into(),
            expected: alloc::format!("{n} targets"),
            actual: alloc::format!("{}", targets.len()),
        });
    }
    let tiny = T::from(1e-12).unwrap();
    let scale = T::one() / T::from(n).unwrap();
    let mut grad = Tensor::zeros(probs.shape());
    let mut loss = T::zero();
    for (i, &t) in targets.iter().enumerate() {
        if t >= k {
            return Err(Error::ShapeMismatch {
                context: "cross_entropy target".into(),
                expected: alloc::format!("class < {k}"),
                actual: alloc::format!("{t}"),
            });
        }
        let p = probs.data()[i * k + t].max(tiny);
        loss -= scale * p.ln();
        grad.data_mut()[i * k + t] = -scale / p;
    }
    Ok((loss, grad))
}

/// An ordered stack of layers applied in sequence.
pub struct Sequential<T: Scalar> {
    layers: Vec<Box<dyn Layer<T>>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Box<dyn Layer<T>>>) -> Self {
        Self { layers }
    }

    pub fn push(&mut self, layer: Box<dyn Layer<T>>) {
        self.layers.push(layer);
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut SimRng) -> Result<Tensor<T>> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            cur = layer.forward(&cur, mode, rng).map_err(|e| match e {
                Error::ShapeMismatch {
                    context,
                    expected,
                    actual,
                } => Error::ShapeMismatch {
                    context: alloc::format!("layer {i} ({context})"),
                    expected,
                    actual,
                },
                other => other,
            })?;
        }
        Ok(cur)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mut grad = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(grad)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Persistable tensors as `(name, tensor)` pairs in traversal order.
    pub fn state(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, tensor) in layer.state() {
                out.push((alloc::format!("layer{:02}.{}.{}", i, layer.kind(), name), tensor));
            }
        }
        out
    }

    pub fn state_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let kind = layer.kind();
            for (name, tensor) in layer.state_mut() {
                out.push((alloc::format!("layer{i:02}.{kind}.{name}"), tensor));
            }
        }
        out
    }

    /// Apply one optimizer step to every parameter.
    pub fn step(&mut self, lr: T, momentum: T) {
        let mut params = self.params_mut();
        sgd_step(&mut params, lr, momentum);
    }
}
