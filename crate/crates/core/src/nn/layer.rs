use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Layer kinds. Convolutions are 3x3, stride 1, zero pad 1; pooling is 2x2
/// stride 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv2d { out_channels: usize },
    BatchNorm,
    Relu,
    MaxPool,
    Dense { out_units: usize },
    Sigmoid,
    Tanh,
    Softmax,
    Flatten,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
    /// `[out, in, 3, 3]`
    pub weight: Vec<f64>,
    /// Absent when the convolution feeds a batchnorm, whose shift makes a
    /// bias redundant.
    pub bias: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_units: usize,
    pub out_units: usize,
    /// `[out, in]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    BatchNorm(BatchNorm),
    Relu,
    MaxPool,
    Dense(Dense),
    Sigmoid,
    Tanh,
    Softmax,
    Flatten,
}

/// Initial weight distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// U(-sqrt(6/fan_in), +sqrt(6/fan_in))
    HeUniform,
    /// U(-sqrt(6/(fan_in+fan_out)), ...)
    XavierUniform,
}

fn uniform_weights(n: usize, bound: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

impl Conv2d {
    pub fn new(
        in_shape: [usize; 3],
        out_channels: usize,
        bias: bool,
        init: Init,
        rng: &mut impl Rng,
    ) -> Self {
        let [c, h, w] = in_shape;
        let fan_in = (c * 9) as f64;
        let fan_out = (out_channels * 9) as f64;
        let bound = match init {
            Init::HeUniform => (6.0 / fan_in).sqrt(),
            Init::XavierUniform => (6.0 / (fan_in + fan_out)).sqrt(),
        };
        Conv2d {
            in_channels: c,
            out_channels,
            height: h,
            width: w,
            weight: uniform_weights(out_channels * c * 9, bound, rng),
            bias: bias.then(|| vec![0.0; out_channels]),
        }
    }

    /// Unfold one `[C, H, W]` sample into `[C*9, H*W]` patch columns.
    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &x[c * hw..(c + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &mut cols[(c * 9 + ky * 3 + kx) * hw..][..hw];
                    let x0 = 1usize.saturating_sub(kx);
                    let x1 = (w + 1 - kx).min(w);
                    for y in 0..h {
                        let out = &mut row[y * w..(y + 1) * w];
                        let sy = y + ky;
                        if sy < 1 || sy > h {
                            out.fill(0.0);
                            continue;
                        }
                        let src = &plane[(sy - 1) * w..sy * w];
                        out[..x0].fill(0.0);
                        out[x1..].fill(0.0);
                        for xx in x0..x1 {
                            out[xx] = src[xx + kx - 1];
                        }
                    }
                }
            }
        }
    }

    /// Inverse of [`Self::im2col`], accumulating overlapping patches.
    fn col2im(&self, cols: &[f64], dx: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        let hw = h * w;
        for c in 0..self.in_channels {
            let plane = &mut dx[c * hw..(c + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &cols[(c * 9 + ky * 3 + kx) * hw..][..hw];
                    let x0 = 1usize.saturating_sub(kx);
                    let x1 = (w + 1 - kx).min(w);
                    for y in 0..h {
                        let sy = y + ky;
                        if sy < 1 || sy > h {
                            continue;
                        }
                        let src = &row[y * w..(y + 1) * w];
                        let dst = &mut plane[(sy - 1) * w..sy * w];
                        for xx in x0..x1 {
                            dst[xx + kx - 1] += src[xx];
                        }
                    }
                }
            }
        }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let n = x.batch();
        let hw = self.height * self.width;
        let k = self.in_channels * 9;
        let o = self.out_channels;
        let mut cols = vec![0.0; k * hw];
        let mut out = vec![0.0; n * o * hw];
        for i in 0..n {
            self.im2col(x.sample(i), &mut cols);
            let y = &mut out[i * o * hw..(i + 1) * o * hw];
            gemm(o, k, hw, &self.weight, false, &cols, false, 0.0, y);
            if let Some(b) = &self.bias {
                for (ch, bv) in b.iter().enumerate() {
                    y[ch * hw..(ch + 1) * hw].iter_mut().for_each(|v| *v += bv);
                }
            }
        }
        Tensor::new(vec![n, o, self.height, self.width], out).expect("conv output shape")
    }

    fn backward(
        &self,
        x: &Tensor,
        dy: &Tensor,
        dw: &mut [f64],
        db: Option<&mut [f64]>,
        need_dx: bool,
    ) -> Option<Tensor> {
        let n = x.batch();
        let hw = self.height * self.width;
        let k = self.in_channels * 9;
        let o = self.out_channels;
        let mut cols = vec![0.0; k * hw];
        let mut dcols = vec![0.0; k * hw];
        let mut dx = need_dx.then(|| Tensor::zeros(x.shape().to_vec()));
        for i in 0..n {
            let g = dy.sample(i);
            self.im2col(x.sample(i), &mut cols);
            gemm(o, hw, k, g, false, &cols, true, 1.0, dw);
            if let Some(dx) = dx.as_mut() {
                gemm(k, o, hw, &self.weight, true, g, false, 0.0, &mut dcols);
                let per = x.sample_len();
                self.col2im(&dcols, &mut dx.data_mut()[i * per..(i + 1) * per]);
            }
        }
        if let Some(db) = db {
            for i in 0..n {
                let g = dy.sample(i);
                for (ch, d) in db.iter_mut().enumerate() {
                    *d += g[ch * hw..(ch + 1) * hw].iter().sum::<f64>();
                }
            }
        }
        dx
    }
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: BN_EPSILON,
            momentum: BN_MOMENTUM,
        }
    }

    /// Elements per channel per sample (1 for flat inputs).
    fn spatial(&self, x: &Tensor) -> usize {
        x.sample_len() / self.channels
    }

    fn forward_eval(&self, x: Tensor) -> Tensor {
        let sp = self.spatial(&x);
        let mut out = x;
        for s in out.data_mut().chunks_mut(self.channels * sp) {
            for c in 0..self.channels {
                let scale = self.gamma[c] / (self.running_var[c] + self.eps).sqrt();
                let shift = self.beta[c] - self.running_mean[c] * scale;
                s[c * sp..(c + 1) * sp]
                    .iter_mut()
                    .for_each(|v| *v = *v * scale + shift);
            }
        }
        out
    }

    fn forward_train(&self, x: Tensor) -> (Tensor, BnCache) {
        let sp = self.spatial(&x);
        let m = (x.batch() * sp) as f64;
        let stride = self.channels * sp;
        let mut mean = vec![0.0; self.channels];
        let mut var = vec![0.0; self.channels];
        for s in x.data().chunks(stride) {
            for c in 0..self.channels {
                mean[c] += s[c * sp..(c + 1) * sp].iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        for s in x.data().chunks(stride) {
            for c in 0..self.channels {
                let mu = mean[c];
                var[c] += s[c * sp..(c + 1) * sp].iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
            }
        }
        var.iter_mut().for_each(|v| *v /= m);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = x;
        for s in xhat.data_mut().chunks_mut(stride) {
            for c in 0..self.channels {
                let (mu, k) = (mean[c], inv_std[c]);
                s[c * sp..(c + 1) * sp].iter_mut().for_each(|v| *v = (*v - mu) * k);
            }
        }
        let mut out = xhat.clone();
        for s in out.data_mut().chunks_mut(stride) {
            for c in 0..self.channels {
                let (g, b) = (self.gamma[c], self.beta[c]);
                s[c * sp..(c + 1) * sp].iter_mut().for_each(|v| *v = g * *v + b);
            }
        }
        (
            out,
            BnCache {
                xhat,
                inv_std,
                mean,
                var,
            },
        )
    }

    fn backward(&self, cache: &BnCache, dy: &Tensor, dgamma: &mut [f64], dbeta: &mut [f64]) -> Tensor {
        let sp = self.spatial(dy);
        let n = dy.batch();
        let m = (n * sp) as f64;
        let stride = self.channels * sp;
        let xh = cache.xhat.data();
        let g = dy.data();
        let mut sum_dy = vec![0.0; self.channels];
        let mut sum_dy_xh = vec![0.0; self.channels];
        for i in 0..n {
            for c in 0..self.channels {
                for j in i * stride + c * sp..i * stride + (c + 1) * sp {
                    sum_dy[c] += g[j];
                    sum_dy_xh[c] += g[j] * xh[j];
                }
            }
        }
        for c in 0..self.channels {
            dgamma[c] += sum_dy_xh[c];
            dbeta[c] += sum_dy[c];
        }
        let mut dx = Tensor::zeros(dy.shape().to_vec());
        let d = dx.data_mut();
        for i in 0..n {
            for c in 0..self.channels {
                let k = self.gamma[c] * cache.inv_std[c] / m;
                for j in i * stride + c * sp..i * stride + (c + 1) * sp {
                    d[j] = k * (m * g[j] - sum_dy[c] - xh[j] * sum_dy_xh[c]);
                }
            }
        }
        dx
    }

    /// Blend batch statistics into the running estimates.
    pub fn update_running(&mut self, mean: &[f64], var: &[f64]) {
        let a = self.momentum;
        for c in 0..self.channels {
            self.running_mean[c] = (1.0 - a) * self.running_mean[c] + a * mean[c];
            self.running_var[c] = (1.0 - a) * self.running_var[c] + a * var[c];
        }
    }
}

impl Dense {
    pub fn new(in_units: usize, out_units: usize, init: Init, rng: &mut impl Rng) -> Self {
        let bound = match init {
            Init::HeUniform => (6.0 / in_units as f64).sqrt(),
            Init::XavierUniform => (6.0 / (in_units + out_units) as f64).sqrt(),
        };
        Dense {
            in_units,
            out_units,
            weight: uniform_weights(in_units * out_units, bound, rng),
            bias: vec![0.0; out_units],
        }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let n = x.batch();
        let mut out = vec![0.0; n * self.out_units];
        for row in out.chunks_mut(self.out_units) {
            row.copy_from_slice(&self.bias);
        }
        gemm(n, self.in_units, self.out_units, x.data(), false, &self.weight, true, 1.0, &mut out);
        Tensor::new(vec![n, self.out_units], out).expect("dense output shape")
    }

    fn backward(&self, x: &Tensor, dy: &Tensor, dw: &mut [f64], db: &mut [f64], need_dx: bool) -> Option<Tensor> {
        let n = x.batch();
        gemm(self.out_units, n, self.in_units, dy.data(), true, x.data(), false, 1.0, dw);
        for row in dy.data().chunks(self.out_units) {
            for (d, g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
        need_dx.then(|| {
            let mut dx = vec![0.0; n * self.in_units];
            gemm(n, self.out_units, self.in_units, dy.data(), false, &self.weight, false, 0.0, &mut dx);
            Tensor::new(vec![n, self.in_units], dx).expect("dense input shape")
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// What each layer keeps from a training forward pass for its backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Input(Tensor),
    Output(Tensor),
    Mask(Vec<bool>),
    BatchNorm(BnCache),
    Argmax(Vec<usize>, Vec<usize>),
    Shape(Vec<usize>),
    None,
}

/// Row-wise softmax, shifted by the row maximum for stability.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let width = logits.sample_len();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(width) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

fn map(mut x: Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    x.data_mut().iter_mut().for_each(|v| *v = f(*v));
    x
}

fn maxpool_forward(x: &Tensor) -> (Tensor, Vec<usize>) {
    let s = x.shape();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    let d = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let mut best = base + 2 * y * w + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = base + (2 * y + dy) * w + 2 * xx + dx;
                    // Strict comparison keeps the first maximum in row-major order.
                    if d[j] > d[best] {
                        best = j;
                    }
                }
                out.push(d[best]);
                arg.push(best);
            }
        }
    }
    (Tensor::new(vec![n, c, oh, ow], out).expect("pool shape"), arg)
}

impl Layer {
    /// Output shape (without batch) for a given input shape, or an error if
    /// the layer cannot accept it.
    pub fn output_shape(spec: &LayerSpec, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |what: &str| {
            Err(Error::ShapeMismatch(format!(
                "{spec:?} expects {what}, got input shape {input:?}"
            )))
        };
        match *spec {
            LayerSpec::Conv2d { out_channels } => match input {
                [_, h, w] if out_channels > 0 => Ok(vec![out_channels, *h, *w]),
                _ => bad("[channels, height, width] and out_channels >= 1"),
            },
            LayerSpec::MaxPool => match input {
                [c, h, w] if *h >= 2 && *w >= 2 => Ok(vec![*c, h / 2, w / 2]),
                _ => bad("[channels, height >= 2, width >= 2]"),
            },
            LayerSpec::Flatten => match input {
                [] => bad("a non-scalar input"),
                _ => Ok(vec![input.iter().product()]),
            },
            LayerSpec::Dense { out_units } => match input {
                [_] if out_units > 0 => Ok(vec![out_units]),
                _ => bad("a flat input and out_units >= 1"),
            },
            LayerSpec::BatchNorm => match input {
                [_] | [_, _, _] => Ok(input.to_vec()),
                _ => bad("a flat or [channels, height, width] input"),
            },
            LayerSpec::Softmax => match input {
                [_] => Ok(input.to_vec()),
                _ => bad("a flat input"),
            },
            LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Tanh => Ok(input.to_vec()),
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv2d(c) => LayerSpec::Conv2d {
                out_channels: c.out_channels,
            },
            Layer::BatchNorm(_) => LayerSpec::BatchNorm,
            Layer::Relu => LayerSpec::Relu,
            Layer::MaxPool => LayerSpec::MaxPool,
            Layer::Dense(d) => LayerSpec::Dense {
                out_units: d.out_units,
            },
            Layer::Sigmoid => LayerSpec::Sigmoid,
            Layer::Tanh => LayerSpec::Tanh,
            Layer::Softmax => LayerSpec::Softmax,
            Layer::Flatten => LayerSpec::Flatten,
        }
    }

    /// Trainable tensors in a fixed order.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::Conv2d(c) => {
                let mut v = vec![&c.weight];
                v.extend(c.bias.as_ref());
                v
            }
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta],
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Conv2d(c) => {
                let mut v = vec![&mut c.weight];
                v.extend(c.bias.as_mut());
                v
            }
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            _ => vec![],
        }
    }

    /// Which of [`Self::params`] are weight matrices (subject to L2).
    pub fn weight_flags(&self) -> Vec<bool> {
        match self {
            Layer::Conv2d(c) => {
                let mut v = vec![true];
                if c.bias.is_some() {
                    v.push(false);
                }
                v
            }
            Layer::BatchNorm(_) => vec![false, false],
            Layer::Dense(_) => vec![true, false],
            _ => vec![],
        }
    }

    /// Forward pass consuming the input; activations are computed in place
    /// where the layer allows it.
    pub(crate) fn forward(&self, x: Tensor, train: bool) -> (Tensor, Cache) {
        match self {
            Layer::Conv2d(c) => {
                let y = c.forward(&x);
                (y, if train { Cache::Input(x) } else { Cache::None })
            }
            Layer::BatchNorm(b) => {
                if train {
                    let (y, cache) = b.forward_train(x);
                    (y, Cache::BatchNorm(cache))
                } else {
                    (b.forward_eval(x), Cache::None)
                }
            }
            Layer::Relu => {
                let mut y = x;
                let mask = if train {
                    y.data().iter().map(|v| *v > 0.0).collect()
                } else {
                    Vec::new()
                };
                y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                (y, if train { Cache::Mask(mask) } else { Cache::None })
            }
            Layer::MaxPool => {
                let (y, arg) = maxpool_forward(&x);
                let cache = if train {
                    Cache::Argmax(arg, x.shape().to_vec())
                } else {
                    Cache::None
                };
                (y, cache)
            }
            Layer::Dense(d) => {
                let y = d.forward(&x);
                (y, if train { Cache::Input(x) } else { Cache::None })
            }
            Layer::Sigmoid => {
                let y = map(x, |v| 1.0 / (1.0 + (-v).exp()));
                let c = if train { Cache::Output(y.clone()) } else { Cache::None };
                (y, c)
            }
            Layer::Tanh => {
                let y = map(x, f64::tanh);
                let c = if train { Cache::Output(y.clone()) } else { Cache::None };
                (y, c)
            }
            Layer::Softmax => (softmax_rows(&x), Cache::None),
            Layer::Flatten => {
                let shape = x.shape().to_vec();
                let n = x.batch();
                let per = x.sample_len();
                (x.reshape(vec![n, per]).expect("flatten"), Cache::Shape(shape))
            }
        }
    }

    /// Backward pass. `grads` holds this layer's parameter gradients in
    /// [`Self::params`] order and is accumulated into. Returns the input
    /// gradient when `need_dx`.
    pub(crate) fn backward(
        &self,
        cache: &Cache,
        dy: Tensor,
        grads: &mut [Vec<f64>],
        need_dx: bool,
    ) -> Option<Tensor> {
        match (self, cache) {
            (Layer::Conv2d(c), Cache::Input(x)) => {
                let (dw, rest) = grads.split_first_mut().expect("conv grads");
                let db = rest.first_mut().map(|v| v.as_mut_slice());
                c.backward(x, &dy, dw, db, need_dx)
            }
            (Layer::BatchNorm(b), Cache::BatchNorm(cache)) => {
                let [dg, db] = grads else { panic!("batchnorm grads") };
                Some(b.backward(cache, &dy, dg, db))
            }
            (Layer::Relu, Cache::Mask(mask)) => {
                let mut dx = dy;
                for (d, &on) in dx.data_mut().iter_mut().zip(mask) {
                    *d = if on { *d } else { 0.0 };
                }
                Some(dx)
            }
            (Layer::MaxPool, Cache::Argmax(arg, shape)) => {
                let mut dx = Tensor::zeros(shape.clone());
                let d = dx.data_mut();
                for (&j, g) in arg.iter().zip(dy.data()) {
                    d[j] += g;
                }
                Some(dx)
            }
            (Layer::Dense(l), Cache::Input(x)) => {
                let [dw, db] = grads else { panic!("dense grads") };
                l.backward(x, &dy, dw, db, need_dx)
            }
            (Layer::Sigmoid, Cache::Output(y)) => {
                let mut dx = dy;
                for (d, s) in dx.data_mut().iter_mut().zip(y.data()) {
                    *d *= s * (1.0 - s);
                }
                Some(dx)
            }
            (Layer::Tanh, Cache::Output(y)) => {
                let mut dx = dy;
                for (d, t) in dx.data_mut().iter_mut().zip(y.data()) {
                    *d *= 1.0 - t * t;
                }
                Some(dx)
            }
            (Layer::Flatten, Cache::Shape(shape)) => Some(dy.reshape(shape.clone()).expect("unflatten")),
            (layer, _) => panic!("no backward pass for {:?} with this cache", layer.spec()),
        }
    }
}
