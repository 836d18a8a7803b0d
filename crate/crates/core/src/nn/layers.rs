//! The fixed layer set: conv, pooling, batch norm, activations, dropout,
//! reshapes, dense, and softmax.
//!
//! Every layer caches what its backward pass needs during a cache-recording
//! forward (`Train`/`Frozen`); calling `backward` twice, or without a
//! forward, is a stale-cache error.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{Layer, Mode, Param, Scalar, Tensor};
use crate::rng::SimRng;

fn shape_err(context: &str, expected: alloc::string::String, actual: &[usize]) -> Error {
    Error::ShapeMismatch {
        context: context.into(),
        expected,
        actual: alloc::format!("{actual:?}"),
    }
}

/// Output coordinate range such that `coord + d` stays inside `[0, len)`.
fn shift_range(d: isize, len: usize) -> (usize, usize) {
    let start = if d < 0 { (-d) as usize } else { 0 };
    let end = len - if d > 0 { d as usize } else { 0 };
    (start, end)
}

// ---------------------------------------------------------------------
// Standardize
// ---------------------------------------------------------------------

/// Per-sample standardization: subtract the mean and divide by the standard
/// deviation of each sample's features. Gives the classifiers invariance to
/// constant dB offsets of the input window.
pub struct Standardize<T: Scalar> {
    eps: T,
    cache: Option<(Tensor<T>, Vec<T>)>,
}

impl<T: Scalar> Standardize<T> {
    pub fn new() -> Self {
        Self {
            eps: T::from(1e-6).unwrap(),
            cache: None,
        }
    }
}

impl<T: Scalar> Default for Standardize<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Layer<T> for Standardize<T> {
    fn kind(&self) -> &'static str {
        "standardize"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        let n = x.batch();
        let m = x.stride0();
        if m == 0 {
            return Err(shape_err("standardize", "non-empty samples".into(), x.shape()));
        }
        let mm = T::from(m).unwrap();
        let mut y = Tensor::zeros(x.shape());
        let mut inv_stds = Vec::with_capacity(n);
        for i in 0..n {
            let row = &x.data()[i * m..(i + 1) * m];
            let mean = row.iter().fold(T::zero(), |a, &b| a + b) / mm;
            let var = row
                .iter()
                .fold(T::zero(), |a, &b| a + (b - mean) * (b - mean))
                / mm;
            let inv_std = T::one() / (var + self.eps).sqrt();
            inv_stds.push(inv_std);
            let out = &mut y.data_mut()[i * m..(i + 1) * m];
            for (o, &v) in out.iter_mut().zip(row.iter()) {
                *o = (v - mean) * inv_std;
            }
        }
        if mode.records_cache() {
            self.cache = Some((y.clone(), inv_stds));
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (y, inv_stds) = self.cache.take().ok_or(Error::StaleCache("standardize"))?;
        let n = y.batch();
        let m = y.stride0();
        let mm = T::from(m).unwrap();
        let mut dx = Tensor::zeros(y.shape());
        for i in 0..n {
            let dy = &grad_out.data()[i * m..(i + 1) * m];
            let yy = &y.data()[i * m..(i + 1) * m];
            let mean_dy = dy.iter().fold(T::zero(), |a, &b| a + b) / mm;
            let mean_dy_y = dy
                .iter()
                .zip(yy.iter())
                .fold(T::zero(), |a, (&g, &v)| a + g * v)
                / mm;
            let out = &mut dx.data_mut()[i * m..(i + 1) * m];
            let s = inv_stds[i];
            for ((o, &g), &v) in out.iter_mut().zip(dy.iter()).zip(yy.iter()) {
                *o = s * (g - mean_dy - v * mean_dy_y);
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------

/// 3x3 convolution, stride 1, same (zero) padding, NCHW layout.
pub struct Conv2d<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_ch: usize,
    out_ch: usize,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    /// He-uniform initialization over fan-in `in_ch * 9`.
    pub fn new(in_ch: usize, out_ch: usize, rng: &mut SimRng) -> Self {
        let limit = (6.0 / (in_ch * 9) as f64).sqrt();
        let data: Vec<T> = (0..out_ch * in_ch * 9)
            .map(|_| T::from(rng.range(-limit, limit)).unwrap())
            .collect();
        Self {
            weight: Param::new(Tensor::from_vec(&[out_ch, in_ch, 3, 3], data).unwrap()),
            bias: Param::new(Tensor::zeros(&[out_ch])),
            in_ch,
            out_ch,
            cache: None,
        }
    }
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn kind(&self) -> &'static str {
        "conv2d"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        let &[n, c, h, w] = x.shape() else {
            return Err(shape_err("conv2d", "rank-4 NCHW input".into(), x.shape()));
        };
        if c != self.in_ch {
            return Err(shape_err(
                "conv2d",
                alloc::format!("{} input channels", self.in_ch),
                x.shape(),
            ));
        }
        let mut y = Tensor::zeros(&[n, self.out_ch, h, w]);
        let wd = self.weight.value.data();
        let bd = self.bias.value.data();
        let xd = x.data();
        let yd = y.data_mut();
        let plane = h * w;

        for ni in 0..n {
            for oc in 0..self.out_ch {
                let ybase = (ni * self.out_ch + oc) * plane;
                yd[ybase..ybase + plane].iter_mut().for_each(|v| *v = bd[oc]);
                for ic in 0..c {
                    let xbase = (ni * c + ic) * plane;
                    for ky in 0..3usize {
                        let dy = ky as isize - 1;
                        let (oy0, oy1) = shift_range(dy, h);
                        for kx in 0..3usize {
                            let dx = kx as isize - 1;
                            let (ox0, ox1) = shift_range(dx, w);
                            let wv = wd[((oc * c + ic) * 3 + ky) * 3 + kx];
                            for oy in oy0..oy1 {
                                let iy = (oy as isize + dy) as usize;
                                let yrow = ybase + oy * w;
                                let xrow = (xbase + iy * w) as isize + dx;
                                for ox in ox0..ox1 {
                                    yd[yrow + ox] += wv * xd[(xrow + ox as isize) as usize];
                                }
                            }
                        }
                    }
                }
            }
        }

        if mode.records_cache() {
            self.cache = Some(x.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or(Error::StaleCache("conv2d"))?;
        let &[n, c, h, w] = x.shape() else {
            unreachable!()
        };
        let plane = h * w;
        let mut dx = Tensor::zeros(x.shape());

        {
            let gd = grad_out.data();
            let db = self.bias.grad.data_mut();
            for ni in 0..n {
                for oc in 0..self.out_ch {
                    let base = (ni * self.out_ch + oc) * plane;
                    db[oc] += gd[base..base + plane].iter().fold(T::zero(), |a, &b| a + b);
                }
            }
        }

        let gd = grad_out.data();
        let xd = x.data();
        let wd = self.weight.value.data();
        let dwd = self.weight.grad.data_mut();
        let dxd = dx.data_mut();

        for ni in 0..n {
            for oc in 0..self.out_ch {
                let gbase = (ni * self.out_ch + oc) * plane;
                for ic in 0..c {
                    let xbase = (ni * c + ic) * plane;
                    for ky in 0..3usize {
                        let dy = ky as isize - 1;
                        let (oy0, oy1) = shift_range(dy, h);
                        for kx in 0..3usize {
                            let dx_off = kx as isize - 1;
                            let (ox0, ox1) = shift_range(dx_off, w);
                            let widx = ((oc * c + ic) * 3 + ky) * 3 + kx;
                            let wv = wd[widx];
                            let mut dwv = T::zero();
                            for oy in oy0..oy1 {
                                let iy = (oy as isize + dy) as usize;
                                let grow = gbase + oy * w;
                                let xrow = (xbase + iy * w) as isize + dx_off;
                                for ox in ox0..ox1 {
                                    let g = gd[grow + ox];
                                    let xi = (xrow + ox as isize) as usize;
                                    dwv += xd[xi] * g;
                                    dxd[xi] += wv * g;
                                }
                            }
                            dwd[widx] += dwv;
                        }
                    }
                }
            }
        }

        Ok(dx)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn state(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![("weight", &self.weight.value), ("bias", &self.bias.value)]
    }

    fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        vec![
            ("weight", &mut self.weight.value),
            ("bias", &mut self.bias.value),
        ]
    }
}

// ---------------------------------------------------------------------
// MaxPool2d
// ---------------------------------------------------------------------

/// 2x2 max pooling with stride 2; trailing odd rows/columns are dropped.
pub struct MaxPool2d<T: Scalar> {
    cache: Option<(Vec<usize>, Vec<u32>)>,
    _marker: core::marker::PhantomData<T>,
}

impl<T: Scalar> MaxPool2d<T> {
    pub fn new() -> Self {
        Self {
            cache: None,
            _marker: core::marker::PhantomData,
        }
    }
}

impl<T: Scalar> Default for MaxPool2d<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Layer<T> for MaxPool2d<T> {
    fn kind(&self) -> &'static str {
        "maxpool2d"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        let &[n, c, h, w] = x.shape() else {
            return Err(shape_err("maxpool2d", "rank-4 NCHW input".into(), x.shape()));
        };
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(shape_err(
                "maxpool2d",
                "spatial dims >= 2".into(),
                x.shape(),
            ));
        }
        let mut y = Tensor::zeros(&[n, c, oh, ow]);
        let mut argmax = vec![0u32; n * c * oh * ow];
        let xd = x.data();
        let yd = y.data_mut();
        for pc in 0..n * c {
            let xbase = pc * h * w;
            let ybase = pc * oh * ow;
            for oy in 0..oh {
                for ox in 0..ow {
                    let i00 = xbase + (2 * oy) * w + 2 * ox;
                    let candidates = [i00, i00 + 1, i00 + w, i00 + w + 1];
                    let mut best = candidates[0];
                    let mut best_v = xd[best];
                    for &idx in &candidates[1..] {
                        if xd[idx] > best_v {
                            best_v = xd[idx];
                            best = idx;
                        }
                    }
                    yd[ybase + oy * ow + ox] = best_v;
                    argmax[ybase + oy * ow + ox] = best as u32;
                }
            }
        }
        if mode.records_cache() {
            self.cache = Some((x.shape().to_vec(), argmax));
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, argmax) = self.cache.take().ok_or(Error::StaleCache("maxpool2d"))?;
        let mut dx = Tensor::zeros(&shape);
        let dxd = dx.data_mut();
        for (g, &src) in grad_out.data().iter().zip(argmax.iter()) {
            dxd[src as usize] += *g;
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------

/// Per-channel batch normalization over `(N, H, W)` with learnable scale and
/// shift. Running statistics (momentum 0.9) drive eval mode; `Frozen` uses
/// batch statistics without touching the running buffers.
pub struct BatchNorm2d<T: Scalar> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    running_mean: Tensor<T>,
    running_var: Tensor<T>,
    momentum: T,
    eps: T,
    cache: Option<(Tensor<T>, Vec<T>)>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        let mut gamma = Tensor::zeros(&[channels]);
        gamma.fill(T::one());
        let mut running_var = Tensor::zeros(&[channels]);
        running_var.fill(T::one());
        Self {
            gamma: Param::new(gamma),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var,
            momentum: T::from(0.9).unwrap(),
            eps: T::from(1e-5).unwrap(),
            cache: None,
        }
    }

    fn channels(&self) -> usize {
        self.gamma.value.numel()
    }
}

impl<T: Scalar> Layer<T> for BatchNorm2d<T> {
    fn kind(&self) -> &'static str {
        "batchnorm2d"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        let &[n, c, h, w] = x.shape() else {
            return Err(shape_err("batchnorm2d", "rank-4 NCHW input".into(), x.shape()));
        };
        if c != self.channels() {
            return Err(shape_err(
                "batchnorm2d",
                alloc::format!("{} channels", self.channels()),
                x.shape(),
            ));
        }
        let plane = h * w;
        let m = T::from(n * plane).unwrap();
        let mut y = Tensor::zeros(x.shape());
        let mut inv_stds = Vec::with_capacity(c);

        for ch in 0..c {
            let (mean, var) = match mode {
                Mode::Eval => (self.running_mean.data()[ch], self.running_var.data()[ch]),
                Mode::Train | Mode::Frozen => {
                    let mut sum = T::zero();
                    for ni in 0..n {
                        let base = (ni * c + ch) * plane;
                        sum = x.data()[base..base + plane]
                            .iter()
                            .fold(sum, |a, &b| a + b);
                    }
                    let mean = sum / m;
                    let mut ss = T::zero();
                    for ni in 0..n {
                        let base = (ni * c + ch) * plane;
                        ss = x.data()[base..base + plane]
                            .iter()
                            .fold(ss, |a, &b| a + (b - mean) * (b - mean));
                    }
                    (mean, ss / m)
                }
            };
            if mode == Mode::Train {
                let rm = self.running_mean.data_mut();
                rm[ch] = self.momentum * rm[ch] + (T::one() - self.momentum) * mean;
                let rv = self.running_var.data_mut();
                rv[ch] = self.momentum * rv[ch] + (T::one() - self.momentum) * var;
            }
            let inv_std = T::one() / (var + self.eps).sqrt();
            inv_stds.push(inv_std);
            let g = self.gamma.value.data()[ch];
            let b = self.beta.value.data()[ch];
            for ni in 0..n {
                let base = (ni * c + ch) * plane;
                let xs = &x.data()[base..base + plane];
                let ys = &mut y.data_mut()[base..base + plane];
                for (o, &v) in ys.iter_mut().zip(xs.iter()) {
                    *o = g * (v - mean) * inv_std + b;
                }
            }
        }

        if mode.records_cache() {
            // Cache normalized activations (xhat) rather than y.
            let mut xhat = Tensor::zeros(x.shape());
            for ch in 0..c {
                let g = self.gamma.value.data()[ch];
                let b = self.beta.value.data()[ch];
                for ni in 0..n {
                    let base = (ni * c + ch) * plane;
                    let ys = &y.data()[base..base + plane];
                    let xh = &mut xhat.data_mut()[base..base + plane];
                    for (o, &v) in xh.iter_mut().zip(ys.iter()) {
                        *o = (v - b) / g;
                    }
                }
            }
            self.cache = Some((xhat, inv_stds));
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (xhat, inv_stds) = self.cache.take().ok_or(Error::StaleCache("batchnorm2d"))?;
        let &[n, c, h, w] = xhat.shape() else {
            unreachable!()
        };
        let plane = h * w;
        let m = T::from(n * plane).unwrap();
        let mut dx = Tensor::zeros(xhat.shape());

        for ch in 0..c {
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for ni in 0..n {
                let base = (ni * c + ch) * plane;
                let gs = &grad_out.data()[base..base + plane];
                let xs = &xhat.data()[base..base + plane];
                for (&g, &xh) in gs.iter().zip(xs.iter()) {
                    sum_dy += g;
                    sum_dy_xhat += g * xh;
                }
            }
            self.gamma.grad.data_mut()[ch] += sum_dy_xhat;
            self.beta.grad.data_mut()[ch] += sum_dy;

            let scale = self.gamma.value.data()[ch] * inv_stds[ch] / m;
            for ni in 0..n {
                let base = (ni * c + ch) * plane;
                let gs = &grad_out.data()[base..base + plane];
                let xs = &xhat.data()[base..base + plane];
                let ds = &mut dx.data_mut()[base..base + plane];
                for ((o, &g), &xh) in ds.iter_mut().zip(gs.iter()).zip(xs.iter()) {
                    *o = scale * (m * g - sum_dy - xh * sum_dy_xhat);
                }
            }
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn state(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![
            ("gamma", &self.gamma.value),
            ("beta", &self.beta.value),
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ]
    }

    fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        vec![
            ("gamma", &mut self.gamma.value),
            ("beta", &mut self.beta.value),
            ("running_mean", &mut self.running_mean),
            ("running_var", &mut self.running_var),
        ]
    }
}

// ---------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------

pub struct ReLU<T: Scalar> {
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> ReLU<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }
}

impl<T: Scalar> Default for ReLU<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Layer<T> for ReLU<T> {
    fn kind(&self) -> &'static str {
        "relu"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        let mut y = x.clone();
        let mut mask = Tensor::zeros(x.shape());
        for (o, m) in y.data_mut().iter_mut().zip(mask.data_mut().iter_mut()) {
            if *o > T::zero() {
                *m = T::one();
            } else {
                *o = T::zero();
            }
        }
        if mode.records_cache() {
            self.cache = Some(mask);
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self.cache.take().ok_or(Error::StaleCache("relu"))?;
        let mut dx = grad_out.clone();
        for (g, &m) in dx.data_mut().iter_mut().zip(mask.data().iter()) {
            *g *= m;
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------

/// Inverted dropout: kept activations are scaled by `1/(1-p)` in train mode
/// so the eval path needs no rescale. `Eval` and `Frozen` are identity.
pub struct Dropout<T: Scalar> {
    p: f64,
    cache: Option<Option<Tensor<T>>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(p: f64) -> Self {
        Self { p, cache: None }
    }
}

impl<T: Scalar> Layer<T> for Dropout<T> {
    fn kind(&self) -> &'static str {
        "dropout"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut SimRng) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => {
                let keep_scale = T::from(1.0 / (1.0 - self.p)).unwrap();
                let mut mask = Tensor::zeros(x.shape());
                for m in mask.data_mut().iter_mut() {
                    if !rng.bernoulli(self.p) {
                        *m = keep_scale;
                    }
                }
                let mut y = x.clone();
                for (o, &m) in y.data_mut().iter_mut().zip(mask.data().iter()) {
                    *o *= m;
                }
                self.cache = Some(Some(mask));
                Ok(y)
            }
            Mode::Frozen => {
                self.cache = Some(None);
                Ok(x.clone())
            }
            Mode::Eval => Ok(x.clone()),
        }
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self.cache.take().ok_or(Error::StaleCache("dropout"))?;
        match mask {
            Some(mask) => {
                let mut dx = grad_out.clone();
                for (g, &m) in dx.data_mut().iter_mut().zip(mask.data().iter()) {
                    *g *= m;
                }
                Ok(dx)
            }
            None => Ok(grad_out.clone()),
        }
    }
}

// ---------------------------------------------------------------------
// Reshapes
// ---------------------------------------------------------------------

/// `(N, ...) -> (N, features)`.
pub struct Flatten<T: Scalar> {
    cache: Option<Vec<usize>>,
    _marker: core::marker::PhantomData<T>,
}

impl<T: Scalar> Flatten<T> {
    pub fn new() -> Self {
        Self {
            cache: None,
            _marker: core::marker::PhantomData,
        }
    }
}

impl<T: Scalar> Default for Flatten<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Layer<T> for Flatten<T> {
    fn kind(&self) -> &'static str {
        "flatten"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        if mode.records_cache() {
            self.cache = Some(x.shape().to_vec());
        }
        x.reshaped(&[x.batch(), x.stride0()])
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.cache.take().ok_or(Error::StaleCache("flatten"))?;
        grad_out.reshaped(&shape)
    }
}

/// `(N, L, ...) -> (N*L, ...)`: lets a shared per-frame trunk process every
/// frame of every sequence as one batch.
pub struct FrameMerge<T: Scalar> {
    cache: Option<Vec<usize>>,
    _marker: core::marker::PhantomData<T>,
}

impl<T: Scalar> FrameMerge<T> {
    pub fn new() -> Self {
        Self {
            cache: None,
            _marker: core::marker::PhantomData,
        }
    }
}

impl<T: Scalar> Layer<T> for FrameMerge<T> {
    fn kind(&self) -> &'static str {
        "frame_merge"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        if x.shape().len() < 2 {
            return Err(shape_err("frame_merge", "rank >= 2".into(), x.shape()));
        }
        if mode.records_cache() {
            self.cache = Some(x.shape().to_vec());
        }
        let mut shape = vec![x.shape()[0] * x.shape()[1]];
        shape.extend_from_slice(&x.shape()[2..]);
        x.reshaped(&shape)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.cache.take().ok_or(Error::StaleCache("frame_merge"))?;
        grad_out.reshaped(&shape)
    }
}

/// `(N*L, ...) -> (N, L, ...)`: regroups per-frame features into sequences.
pub struct FrameSplit<T: Scalar> {
    seq_len: usize,
    cache: Option<Vec<usize>>,
    _marker: core::marker::PhantomData<T>,
}

impl<T: Scalar> FrameSplit<T> {
    pub fn new(seq_len: usize) -> Self {
        Self {
            seq_len,
            cache: None,
            _marker: core::marker::PhantomData,
        }
    }
}

impl<T: Scalar> Layer<T> for FrameSplit<T> {
    fn kind(&self) -> &'static str {
        "frame_split"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        let nl = x.batch();
        if self.seq_len == 0 || nl % self.seq_len != 0 {
            return Err(shape_err(
                "frame_split",
                alloc::format!("batch divisible by {}", self.seq_len),
                x.shape(),
            ));
        }
        if mode.records_cache() {
            self.cache = Some(x.shape().to_vec());
        }
        let mut shape = vec![nl / self.seq_len, self.seq_len];
        shape.extend_from_slice(&x.shape()[1..]);
        x.reshaped(&shape)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.cache.take().ok_or(Error::StaleCache("frame_split"))?;
        grad_out.reshaped(&shape)
    }
}

// ---------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------

/// Fully connected layer: `y = x W + b` with `W` of shape `(in, out)`.
pub struct Dense<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_dim: usize,
    out_dim: usize,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    /// He-uniform initialization over fan-in.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut SimRng) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        let data: Vec<T> = (0..in_dim * out_dim)
            .map(|_| T::from(rng.range(-limit, limit)).unwrap())
            .collect();
        Self::with_weights(
            Tensor::from_vec(&[in_dim, out_dim], data).unwrap(),
            Tensor::zeros(&[out_dim]),
        )
    }

    pub fn with_weights(weight: Tensor<T>, bias: Tensor<T>) -> Self {
        let in_dim = weight.shape()[0];
        let out_dim = weight.shape()[1];
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            in_dim,
            out_dim,
            cache: None,
        }
    }
}

impl<T: Scalar> Layer<T> for Dense<T> {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        let n = x.batch();
        if x.stride0() != self.in_dim || x.shape().len() != 2 {
            return Err(shape_err(
                "dense",
                alloc::format!("(N, {})", self.in_dim),
                x.shape(),
            ));
        }
        let mut y = Tensor::zeros(&[n, self.out_dim]);
        let xd = x.data();
        let wd = self.weight.value.data();
        let bd = self.bias.value.data();
        let yd = y.data_mut();
        for ni in 0..n {
            let yrow = &mut yd[ni * self.out_dim..(ni + 1) * self.out_dim];
            yrow.copy_from_slice(bd);
            let xrow = &xd[ni * self.in_dim..(ni + 1) * self.in_dim];
            for (i, &xv) in xrow.iter().enumerate() {
                let wrow = &wd[i * self.out_dim..(i + 1) * self.out_dim];
                for (o, &wv) in yrow.iter_mut().zip(wrow.iter()) {
                    *o += xv * wv;
                }
            }
        }
        if mode.records_cache() {
            self.cache = Some(x.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or(Error::StaleCache("dense"))?;
        let n = x.batch();
        let mut dx = Tensor::zeros(x.shape());
        let gd = grad_out.data();
        let xd = x.data();
        let wd = self.weight.value.data();

        {
            let dbd = self.bias.grad.data_mut();
            for ni in 0..n {
                let grow = &gd[ni * self.out_dim..(ni + 1) * self.out_dim];
                for (db, &g) in dbd.iter_mut().zip(grow.iter()) {
                    *db += g;
                }
            }
        }
        {
            let dwd = self.weight.grad.data_mut();
            for ni in 0..n {
                let grow = &gd[ni * self.out_dim..(ni + 1) * self.out_dim];
                let xrow = &xd[ni * self.in_dim..(ni + 1) * self.in_dim];
                for (i, &xv) in xrow.iter().enumerate() {
                    let dwrow = &mut dwd[i * self.out_dim..(i + 1) * self.out_dim];
                    for (dw, &g) in dwrow.iter_mut().zip(grow.iter()) {
                        *dw += xv * g;
                    }
                }
            }
        }
        {
            let dxd = dx.data_mut();
            for ni in 0..n {
                let grow = &gd[ni * self.out_dim..(ni + 1) * self.out_dim];
                let dxrow = &mut dxd[ni * self.in_dim..(ni + 1) * self.in_dim];
                for (i, dxv) in dxrow.iter_mut().enumerate() {
                    let wrow = &wd[i * self.out_dim..(i + 1) * self.out_dim];
                    let mut acc = T::zero();
                    for (&wv, &g) in wrow.iter().zip(grow.iter()) {
                        acc += wv * g;
                    }
                    *dxv = acc;
                }
            }
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn state(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![("weight", &self.weight.value), ("bias", &self.bias.value)]
    }

    fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        vec![
            ("weight", &mut self.weight.value),
            ("bias", &mut self.bias.value),
        ]
    }
}

// ---------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------

/// Row-wise softmax over the last dimension of an `(N, K)` input.
pub struct Softmax<T: Scalar> {
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Softmax<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }
}

impl<T: Scalar> Default for Softmax<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Layer<T> for Softmax<T> {
    fn kind(&self) -> &'static str {
        "softmax"
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode, _rng: &mut SimRng) -> Result<Tensor<T>> {
        let n = x.batch();
        let k = x.stride0();
        let mut y = x.clone();
        for i in 0..n {
            let row = &mut y.data_mut()[i * k..(i + 1) * k];
            let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let mut sum = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v = *v / sum;
            }
        }
        if mode.records_cache() {
            self.cache = Some(y.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.cache.take().ok_or(Error::StaleCache("softmax"))?;
        let n = y.batch();
        let k = y.stride0();
        let mut dx = Tensor::zeros(y.shape());
        for i in 0..n {
            let yrow = &y.data()[i * k..(i + 1) * k];
            let grow = &grad_out.data()[i * k..(i + 1) * k];
            let dot = yrow
                .iter()
                .zip(grow.iter())
                .fold(T::zero(), |a, (&yv, &g)| a + yv * g);
            let drow = &mut dx.data_mut()[i * k..(i + 1) * k];
            for ((d, &yv), &g) in drow.iter_mut().zip(yrow.iter()).zip(grow.iter()) {
                *d = yv * (g - dot);
            }
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::net::cross_entropy;
    use crate::rng::SimRng;
    use approx::assert_relative_eq;

    fn rng() -> SimRng {
        SimRng::new(7)
    }

    #[test]
    fn identity_dense_is_identity() {
        let mut w = Tensor::zeros(&[4, 4]);
        for i in 0..4 {
            w.data_mut()[i * 4 + i] = 1.0f64;
        }
        let mut dense = Dense::with_weights(w, Tensor::zeros(&[4]));
        let x = Tensor::from_vec(&[2, 4], vec![1.0, -2.0, 3.5, 0.0, 4.0, 5.0, -6.0, 7.0]).unwrap();
        let y = dense.forward(&x, Mode::Eval, &mut rng()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn dense_gradient_matches_closed_form() {
        // Single weight, scalar sample: loss = (w x - t)^2, dL/dw = 2 (w x - t) x.
        let w0 = 0.8f64;
        let x0 = 1.7;
        let t = 0.4;
        let mut dense = Dense::with_weights(
            Tensor::from_vec(&[1, 1], vec![w0]).unwrap(),
            Tensor::zeros(&[1]),
        );
        let x = Tensor::from_vec(&[1, 1], vec![x0]).unwrap();
        let y = dense.forward(&x, Mode::Train, &mut rng()).unwrap();
        let resid = y.data()[0] - t;
        let dy = Tensor::from_vec(&[1, 1], vec![2.0 * resid]).unwrap();
        dense.backward(&dy).unwrap();
        assert_relative_eq!(
            dense.weight.grad.data()[0],
            2.0 * (w0 * x0 - t) * x0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_loss_grad_gives_zero_gradients() {
        let mut r = rng();
        let mut conv = Conv2d::<f64>::new(1, 3, &mut r);
        let x = Tensor::from_vec(&[1, 1, 4, 4], (0..16).map(|i| i as f64).collect()).unwrap();
        let y = conv.forward(&x, Mode::Train, &mut r).unwrap();
        let zeros = Tensor::zeros(y.shape());
        conv.backward(&zeros).unwrap();
        assert!(conv.weight.grad.data().iter().all(|&g| g == 0.0));
        assert!(conv.bias.grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn sgd_with_zero_lr_leaves_parameters_unchanged() {
        let mut r = rng();
        let mut dense = Dense::<f64>::new(3, 2, &mut r);
        let before = dense.weight.value.clone();
        dense.weight.grad.fill(1.0);
        crate::nn::net::sgd_step(&mut dense.params_mut(), 0.0, 0.9);
        assert_eq!(dense.weight.value, before);
    }

    #[test]
    fn conv_shape_on_rdi_input() {
        let mut r = rng();
        let mut conv = Conv2d::<f32>::new(1, 8, &mut r);
        let x = Tensor::zeros(&[2, 1, 9, 49]);
        let y = conv.forward(&x, Mode::Eval, &mut r).unwrap();
        assert_eq!(y.shape(), &[2, 8, 9, 49]);
        let bad = Tensor::<f32>::zeros(&[2, 3, 9, 49]);
        assert!(conv.forward(&bad, Mode::Eval, &mut r).is_err());
    }

    #[test]
    fn conv_matches_manual_correlation() {
        // 1x1x3x3 input, single filter: same-padded center output is the
        // full elementwise product sum.
        let mut r = rng();
        let mut conv = Conv2d::<f64>::new(1, 1, &mut r);
        let x = Tensor::from_vec(&[1, 1, 3, 3], (1..=9).map(|v| v as f64).collect()).unwrap();
        let y = conv.forward(&x, Mode::Eval, &mut r).unwrap();
        let wd = conv.weight.value.data();
        let expected_center: f64 = wd
            .iter()
            .zip(x.data().iter())
            .map(|(&w, &v)| w * v)
            .sum();
        assert_relative_eq!(y.data()[4], expected_center, max_relative = 1e-12);
    }

    #[test]
    fn maxpool_picks_maxima_and_routes_gradients() {
        let mut pool = MaxPool2d::<f64>::new();
        let x = Tensor::from_vec(
            &[1, 1, 2, 4],
            vec![1.0, 5.0, 2.0, 0.0, 3.0, -1.0, 9.0, 4.0],
        )
        .unwrap();
        let y = pool.forward(&x, Mode::Train, &mut rng()).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 2]);
        assert_eq!(y.data(), &[5.0, 9.0]);
        let dy = Tensor::from_vec(&[1, 1, 1, 2], vec![10.0, 20.0]).unwrap();
        let dx = pool.backward(&dy).unwrap();
        assert_eq!(dx.data()[1], 10.0);
        assert_eq!(dx.data()[6], 20.0);
        assert_eq!(dx.data().iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn batchnorm_train_mode_normalizes_per_channel() {
        let mut bn = BatchNorm2d::<f64>::new(2);
        let mut r = rng();
        let mut data = Vec::new();
        for _ in 0..4 * 2 * 5 * 5 {
            data.push(r.normal() * 3.0 + 2.0);
        }
        let x = Tensor::from_vec(&[4, 2, 5, 5], data).unwrap();
        let y = bn.forward(&x, Mode::Train, &mut r).unwrap();
        for ch in 0..2 {
            let mut vals = Vec::new();
            for n in 0..4 {
                let base = (n * 2 + ch) * 25;
                vals.extend_from_slice(&y.data()[base..base + 25]);
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            assert_relative_eq!(m, 0.0, epsilon = 1e-10);
            assert_relative_eq!(v, 1.0, max_relative = 1e-4); // eps shifts variance slightly
        }
    }

    #[test]
    fn batchnorm_eval_uses_running_stats_and_is_deterministic() {
        let mut bn = BatchNorm2d::<f64>::new(1);
        let mut r = rng();
        let x = Tensor::from_vec(&[2, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
            .unwrap();
        // Before any training, running stats are (0, 1): eval is near-identity.
        let y = bn.forward(&x, Mode::Eval, &mut r).unwrap();
        for (a, b) in x.data().iter().zip(y.data().iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-4);
        }
        bn.forward(&x, Mode::Train, &mut r).unwrap();
        let e1 = bn.forward(&x, Mode::Eval, &mut r).unwrap();
        let e2 = bn.forward(&x, Mode::Eval, &mut r).unwrap();
        assert_eq!(e1, e2, "eval must be bit-deterministic");
        // Frozen must not move running statistics.
        let before = bn.state().iter().map(|(_, t)| (*t).clone()).collect::<Vec<_>>();
        bn.forward(&x, Mode::Frozen, &mut r).unwrap();
        let after = bn.state().iter().map(|(_, t)| (*t).clone()).collect::<Vec<_>>();
        assert_eq!(before[2], after[2]);
        assert_eq!(before[3], after[3]);
    }

    #[test]
    fn dropout_expectation_matches_input() {
        let mut drop = Dropout::<f64>::new(0.5);
        let mut r = rng();
        let x = Tensor::from_vec(&[1, 4], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let trials = 10_000;
        let mut sums = [0.0f64; 4];
        for _ in 0..trials {
            let y = drop.forward(&x, Mode::Train, &mut r).unwrap();
            for (s, &v) in sums.iter_mut().zip(y.data().iter()) {
                *s += v;
            }
        }
        // Each kept value is x/(1-p): variance per draw is x^2 p/(1-p).
        for (i, &xv) in x.data().iter().enumerate() {
            let mean = sums[i] / trials as f64;
            let sigma = (xv * xv * 0.5 / 0.5 / trials as f64).sqrt();
            assert!(
                (mean - xv).abs() <= 3.0 * sigma,
                "dropout expectation {mean} vs {xv} (3 sigma {})",
                3.0 * sigma
            );
        }
        // Eval is identity.
        let y = drop.forward(&x, Mode::Eval, &mut r).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut sm = Softmax::<f64>::new();
        let mut r = rng();
        let x = Tensor::from_vec(&[3, 5], (0..15).map(|i| (i as f64) * 0.37 - 2.0).collect())
            .unwrap();
        let y = sm.forward(&x, Mode::Eval, &mut r).unwrap();
        for i in 0..3 {
            let sum: f64 = y.data()[i * 5..(i + 1) * 5].iter().sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn standardize_zero_mean_unit_std() {
        let mut layer = Standardize::<f64>::new();
        let mut r = rng();
        let x = Tensor::from_vec(&[2, 6], (0..12).map(|i| i as f64 * 2.5 + 4.0).collect())
            .unwrap();
        let y = layer.forward(&x, Mode::Eval, &mut r).unwrap();
        for i in 0..2 {
            let row = &y.data()[i * 6..(i + 1) * 6];
            let mean: f64 = row.iter().sum::<f64>() / 6.0;
            let var: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 6.0;
            assert_relative_eq!(mean, 0.0, epsilon = 1e-12);
            assert_relative_eq!(var, 1.0, max_relative = 1e-5);
        }
        // Constant dB offset leaves the output unchanged.
        let mut shifted = x.clone();
        for v in shifted.data_mut() {
            *v += 17.0;
        }
        let y2 = layer.forward(&shifted, Mode::Eval, &mut r).unwrap();
        for (a, b) in y.data().iter().zip(y2.data().iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn frame_merge_split_round_trip() {
        let mut merge = FrameMerge::<f32>::new();
        let mut split = FrameSplit::<f32>::new(5);
        let mut r = rng();
        let x = Tensor::from_vec(&[2, 5, 3], (0..30).map(|i| i as f32).collect()).unwrap();
        let merged = merge.forward(&x, Mode::Train, &mut r).unwrap();
        assert_eq!(merged.shape(), &[10, 3]);
        let back = split.forward(&merged, Mode::Train, &mut r).unwrap();
        assert_eq!(back.shape(), &[2, 5, 3]);
        assert_eq!(back.data(), x.data());
    }

    #[test]
    fn backward_without_forward_is_stale() {
        let mut relu = ReLU::<f64>::new();
        let g = Tensor::zeros(&[1, 2]);
        assert!(matches!(
            relu.backward(&g),
            Err(Error::StaleCache("relu"))
        ));
    }

    #[test]
    fn cross_entropy_matches_hand_computation() {
        let probs = Tensor::from_vec(&[2, 2], vec![0.75, 0.25, 0.4, 0.6]).unwrap();
        let (loss, grad) = cross_entropy(&probs, &[0, 1]).unwrap();
        let expected = -(0.75f64.ln() + 0.6f64.ln()) / 2.0;
        assert_relative_eq!(loss, expected, max_relative = 1e-12);
        assert_relative_eq!(grad.data()[0], -0.5 / 0.75, max_relative = 1e-12);
        assert_relative_eq!(grad.data()[3], -0.5 / 0.6, max_relative = 1e-12);
        assert_eq!(grad.data()[1], 0.0);
    }
}
