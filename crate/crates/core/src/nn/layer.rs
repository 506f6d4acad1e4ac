//! The layer set: 3x3 convolution, 2x2 transposed convolution, 2x2 max
//! pooling, batch normalization, ReLU, log-sigmoid, and channel
//! concatenation. Each layer implements an analytic backward pass; the test
//! suite holds every one of them against central finite differences.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Forward evaluation mode. Only batch normalization distinguishes the two:
/// in `Train` it normalizes by batch statistics and updates its running
/// stats, in `Infer` it applies the frozen running stats as an affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// 3x3 convolution, stride 1, padding 1 (spatial extent preserved).
/// Weight layout `[out_c, in_c, 3, 3]`, bias `[out_c]`.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// 2x2 transposed convolution, stride 2, no padding (spatial extent exactly
/// doubled). Weight layout `[in_c, out_c, 2, 2]`, bias `[out_c]`.
#[derive(Debug, Clone)]
pub struct Deconv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Per-channel batch normalization. Batch statistics are taken over
/// (batch, height, width). Running stats start at mean 0 / variance 1 and
/// update as `running = momentum * running + (1 - momentum) * batch`.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub channels: usize,
    pub scale: Tensor<T>,
    pub shift: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            scale: Tensor::full(&[channels], T::one()),
            shift: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            momentum: 0.9,
            epsilon: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    Deconv(Deconv2d<T>),
    MaxPool,
    BatchNorm(BatchNorm<T>),
    Relu,
    LogSigmoid,
    Concat,
}

/// Saved forward context needed by the backward pass.
#[derive(Debug, Clone)]
pub enum Aux<T> {
    None,
    /// Flat index of the window argmax for every output element.
    MaxPool(Vec<u32>),
    /// Normalized activations and per-channel 1/sqrt(var+eps) from a
    /// train-mode forward.
    BatchNorm { xhat: Tensor<T>, inv_std: Vec<T> },
}

impl<T: Scalar> Layer<T> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "Conv3x3",
            Layer::Deconv(_) => "Deconv2x2",
            Layer::MaxPool => "MaxPool2x2",
            Layer::BatchNorm(_) => "BatchNorm",
            Layer::Relu => "ReLU",
            Layer::LogSigmoid => "LogSigmoid",
            Layer::Concat => "Concat",
        }
    }

    /// Trainable parameters, in the fixed order the optimizer and the
    /// checkpoint manifest use: Conv/Deconv -> [weight, bias],
    /// BatchNorm -> [scale, shift].
    pub fn params(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv(c) => vec![&c.weight, &c.bias],
            Layer::Deconv(d) => vec![&d.weight, &d.bias],
            Layer::BatchNorm(b) => vec![&b.scale, &b.shift],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Deconv(d) => vec![&mut d.weight, &mut d.bias],
            Layer::BatchNorm(b) => vec![&mut b.scale, &mut b.shift],
            _ => vec![],
        }
    }

    /// Non-trainable state carried in checkpoints (batch-norm running stats).
    pub fn state(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::BatchNorm(b) => vec![&b.running_mean, &b.running_var],
            _ => vec![],
        }
    }

    pub fn state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::BatchNorm(b) => vec![&mut b.running_mean, &mut b.running_var],
            _ => vec![],
        }
    }

    /// Parameters followed by state, under a single mutable borrow
    /// (checkpoint loading fills both).
    pub fn params_and_state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Deconv(d) => vec![&mut d.weight, &mut d.bias],
            Layer::BatchNorm(b) => {
                vec![&mut b.scale, &mut b.shift, &mut b.running_mean, &mut b.running_var]
            }
            _ => vec![],
        }
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        match self {
            Layer::Conv(_) | Layer::Deconv(_) => vec!["weight", "bias"],
            Layer::BatchNorm(_) => vec!["scale", "shift"],
            _ => vec![],
        }
    }

    pub fn state_names(&self) -> Vec<&'static str> {
        match self {
            Layer::BatchNorm(_) => vec!["running_mean", "running_var"],
            _ => vec![],
        }
    }

    /// Output shape (NCHW) from input shapes, without evaluating.
    pub fn output_shape(&self, inputs: &[&[usize]]) -> Result<Vec<usize>> {
        let arity = if matches!(self, Layer::Concat) { 2 } else { 1 };
        if inputs.len() != arity {
            return Err(Error::ShapeMismatch(format!(
                "{} takes {} input(s), got {}",
                self.kind_name(),
                arity,
                inputs.len()
            )));
        }
        let a = inputs[0];
        if a.len() != 4 {
            return Err(Error::ShapeMismatch(format!("{}: expected 4D input, got {:?}", self.kind_name(), a)));
        }
        let (n, c, h, w) = (a[0], a[1], a[2], a[3]);
        match self {
            Layer::Conv(conv) => {
                if c != conv.in_channels {
                    return Err(Error::ShapeMismatch(format!(
                        "Conv3x3 expects {} input channels, got {}",
                        conv.in_channels, c
                    )));
                }
                Ok(vec![n, conv.out_channels, h, w])
            }
            Layer::Deconv(d) => {
                if c != d.in_channels {
                    return Err(Error::ShapeMismatch(format!(
                        "Deconv2x2 expects {} input channels, got {}",
                        d.in_channels, c
                    )));
                }
                Ok(vec![n, d.out_channels, 2 * h, 2 * w])
            }
            Layer::MaxPool => {
                if h % 2 != 0 || w % 2 != 0 {
                    return Err(Error::ShapeMismatch(format!("MaxPool2x2 needs even extent, got {}x{}", h, w)));
                }
                Ok(vec![n, c, h / 2, w / 2])
            }
            Layer::BatchNorm(b) => {
                if c != b.channels {
                    return Err(Error::ShapeMismatch(format!(
                        "BatchNorm expects {} channels, got {}",
                        b.channels, c
                    )));
                }
                Ok(a.to_vec())
            }
            Layer::Relu | Layer::LogSigmoid => Ok(a.to_vec()),
            Layer::Concat => {
                let b = inputs[1];
                if b.len() != 4 || a[0] != b[0] || a[2] != b[2] || a[3] != b[3] {
                    return Err(Error::ShapeMismatch(format!(
                        "Concat inputs must agree on batch and spatial dims: {:?} vs {:?}",
                        a, b
                    )));
                }
                Ok(vec![n, a[1] + b[1], h, w])
            }
        }
    }

    /// Forward pass. `&mut self` because train-mode batch norm updates its
    /// running statistics.
    pub fn forward(&mut self, inputs: &[&Tensor<T>], mode: Mode) -> Result<(Tensor<T>, Aux<T>)> {
        let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape.as_slice()).collect();
        let out_shape = self.output_shape(&shapes)?;
        let (out, aux) = match self {
            Layer::Conv(c) => (conv_forward(c, inputs[0]), Aux::None),
            Layer::Deconv(d) => (deconv_forward(d, inputs[0]), Aux::None),
            Layer::MaxPool => {
                let (out, arg) = maxpool_forward(inputs[0]);
                (out, Aux::MaxPool(arg))
            }
            Layer::BatchNorm(b) => match mode {
                Mode::Train => {
                    let (out, xhat, inv_std) = bn_forward_train(b, inputs[0]);
                    (out, Aux::BatchNorm { xhat, inv_std })
                }
                Mode::Infer => (bn_forward_infer(b, inputs[0]), Aux::None),
            },
            Layer::Relu => (inputs[0].map(|v| if v > T::zero() { v } else { T::zero() }), Aux::None),
            Layer::LogSigmoid => (inputs[0].map(log_sigmoid), Aux::None),
            Layer::Concat => (concat_forward(inputs[0], inputs[1]), Aux::None),
        };
        debug_assert_eq!(out.shape, out_shape);
        // finiteness can only be lost where values are combined; the gating
        // and copying layers preserve it from their (already checked) inputs
        if matches!(self, Layer::Conv(_) | Layer::Deconv(_) | Layer::BatchNorm(_)) {
            out.check_finite(self.kind_name())?;
        }
        Ok((out, aux))
    }

    /// Backward pass: gradients of a scalar loss w.r.t. each input and each
    /// parameter (in `params()` order), given the gradient w.r.t. the output.
    pub fn backward(
        &self,
        inputs: &[&Tensor<T>],
        aux: &Aux<T>,
        upstream: &Tensor<T>,
    ) -> Result<(Vec<Tensor<T>>, Vec<Tensor<T>>)> {
        match self {
            Layer::Conv(c) => {
                let (dx, dw, db) = conv_backward(c, inputs[0], upstream);
                Ok((vec![dx], vec![dw, db]))
            }
            Layer::Deconv(d) => {
                let (dx, dw, db) = deconv_backward(d, inputs[0], upstream);
                Ok((vec![dx], vec![dw, db]))
            }
            Layer::MaxPool => {
                let Aux::MaxPool(arg) = aux else {
                    return Err(Error::ShapeMismatch("missing forward context for MaxPool backward".into()));
                };
                Ok((vec![maxpool_backward(inputs[0], upstream, arg)], vec![]))
            }
            Layer::BatchNorm(b) => {
                let Aux::BatchNorm { xhat, inv_std } = aux else {
                    return Err(Error::ShapeMismatch(
                        "missing forward context for BatchNorm backward (train-mode forward required)".into(),
                    ));
                };
                let (dx, dscale, dshift) = bn_backward(b, xhat, inv_std, upstream);
                Ok((vec![dx], vec![dscale, dshift]))
            }
            Layer::Relu => {
                let x = inputs[0];
                let mut dx = upstream.clone();
                for (g, &v) in dx.data.iter_mut().zip(&x.data) {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                }
                Ok((vec![dx], vec![]))
            }
            Layer::LogSigmoid => {
                // d/dx log(sigmoid(x)) = sigmoid(-x)
                let x = inputs[0];
                let mut dx = upstream.clone();
                for (g, &v) in dx.data.iter_mut().zip(&x.data) {
                    *g *= sigmoid(-v);
                }
                Ok((vec![dx], vec![]))
            }
            Layer::Concat => {
                let (da, db) = concat_backward(inputs[0], inputs[1], upstream);
                Ok((vec![da, db], vec![]))
            }
        }
    }
}

/// Below this many multiply-adds a kernel runs serial; the fork-join
/// overhead outweighs two-way parallelism on tiny decoder tensors.
const PARALLEL_MAC_THRESHOLD: usize = 200_000;

/// Run `body` over equal chunks of `data`, in parallel when `work_macs`
/// justifies it. `body` receives (chunk index, chunk slice).
fn for_each_chunk<T: Send, F>(data: &mut [T], chunk: usize, work_macs: usize, body: F)
where
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if work_macs < PARALLEL_MAC_THRESHOLD {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| body(i, c));
    } else {
        data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| body(i, c));
    }
}

/// Dot product with four independent accumulator lanes; the strict
/// left-to-right sum otherwise serializes on the FP add latency.
#[inline]
fn dot_unrolled<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let chunks = n / 4;
    let mut s0 = T::zero();
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    let mut s3 = T::zero();
    for k in 0..chunks {
        let i = 4 * k;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for i in 4 * chunks..n {
        s0 += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3)
}

#[inline]
fn sum_unrolled<T: Scalar>(a: &[T]) -> T {
    let n = a.len();
    let chunks = n / 4;
    let mut s0 = T::zero();
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    let mut s3 = T::zero();
    for k in 0..chunks {
        let i = 4 * k;
        s0 += a[i];
        s1 += a[i + 1];
        s2 += a[i + 2];
        s3 += a[i + 3];
    }
    for i in 4 * chunks..n {
        s0 += a[i];
    }
    (s0 + s1) + (s2 + s3)
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn log_sigmoid<T: Scalar>(x: T) -> T {
    // -softplus(-x), split by sign for stability
    if x >= T::zero() {
        -(T::one() + (-x).exp()).ln()
    } else {
        x - (T::one() + x.exp()).ln()
    }
}

/// Shifted-patch matrix for a 3x3 stride-1 pad-1 convolution: row
/// (c*9 + ky*3 + kx) holds the input plane of channel c shifted by
/// (ky-1, kx-1) with zero padding, flattened to `plane` entries. Built once
/// per batch item and shared across all output channels.
fn build_patch_rows<T: Scalar>(planes: &[T], channels: usize, h: usize, w: usize, cols: &mut Vec<T>) {
    let plane = h * w;
    cols.clear();
    cols.resize(channels * 9 * plane, T::zero());
    for c in 0..channels {
        let src_plane = &planes[c * plane..(c + 1) * plane];
        for ky in 0..3usize {
            for kx in 0..3usize {
                let row = &mut cols[(c * 9 + ky * 3 + kx) * plane..(c * 9 + ky * 3 + kx + 1) * plane];
                for y in 0..h {
                    let sy = y + ky;
                    if sy < 1 || sy > h {
                        continue;
                    }
                    let src = &src_plane[(sy - 1) * w..sy * w];
                    let dst = &mut row[y * w..(y + 1) * w];
                    // shift by kx-1 with zero fill at the edges
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
}

/// out[o] = sum_k weights[o*k_len + k] * cols[k] + bias[o], accumulating
/// four output channels per pass so each patch row is loaded once per four
/// channels.
fn patch_matmul<T: Scalar>(
    weights: &[T],
    k_len: usize,
    cols: &[T],
    plane: usize,
    bias: Option<&[T]>,
    out_block: &mut [T],
    work: usize,
) {
    for_each_chunk(out_block, 4 * plane, work, |chunk, block| {
        let o0 = chunk * 4;
        let rows = block.len() / plane;
        block.fill(T::zero());
        let mut k = 0;
        for col_row in cols.chunks_exact(plane) {
            match rows {
                4 => {
                    let w0 = weights[o0 * k_len + k];
                    let w1 = weights[(o0 + 1) * k_len + k];
                    let w2 = weights[(o0 + 2) * k_len + k];
                    let w3 = weights[(o0 + 3) * k_len + k];
                    let (a0, rest) = block.split_at_mut(plane);
                    let (a1, rest) = rest.split_at_mut(plane);
                    let (a2, a3) = rest.split_at_mut(plane);
                    for p in 0..plane {
                        let v = col_row[p];
                        a0[p] += w0 * v;
                        a1[p] += w1 * v;
                        a2[p] += w2 * v;
                        a3[p] += w3 * v;
                    }
                }
                _ => {
                    for r in 0..rows {
                        let wv = weights[(o0 + r) * k_len + k];
                        let acc = &mut block[r * plane..(r + 1) * plane];
                        for p in 0..plane {
                            acc[p] += wv * col_row[p];
                        }
                    }
                }
            }
            k += 1;
        }
        if let Some(bias) = bias {
            for r in 0..rows {
                let bv = bias[o0 + r];
                for v in &mut block[r * plane..(r + 1) * plane] {
                    *v += bv;
                }
            }
        }
    });
}

fn conv_forward<T: Scalar>(conv: &Conv2d<T>, input: &Tensor<T>) -> Tensor<T> {
    let (n, in_c, h, w) = input.dims4().expect("checked by output_shape");
    let out_c = conv.out_channels;
    let plane = h * w;
    let k_len = in_c * 9;
    let mut out = Tensor::zeros(&[n, out_c, h, w]);
    let work = out_c * in_c * plane * 9;
    let mut cols = Vec::new();
    for b in 0..n {
        build_patch_rows(&input.data[b * in_c * plane..(b + 1) * in_c * plane], in_c, h, w, &mut cols);
        patch_matmul(
            &conv.weight.data,
            k_len,
            &cols,
            plane,
            Some(&conv.bias.data),
            &mut out.data[b * out_c * plane..(b + 1) * out_c * plane],
            work,
        );
    }
    out
}

fn conv_backward<T: Scalar>(
    conv: &Conv2d<T>,
    input: &Tensor<T>,
    upstream: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, in_c, h, w) = input.dims4().expect("recorded forward shape");
    let out_c = conv.out_channels;
    let plane = h * w;
    let wts = &conv.weight.data;
    let up = &upstream.data;
    let work = out_c * in_c * plane * 9;

    // Input gradient: correlating upstream with the kernel reflected in
    // both spatial directions is itself a 3x3 convolution, so it reuses the
    // patch kernel with transposed, reflected weights.
    let mut flipped = vec![T::zero(); in_c * out_c * 9];
    for o in 0..out_c {
        for c in 0..in_c {
            for ky in 0..3 {
                for kx in 0..3 {
                    flipped[(c * out_c + o) * 9 + ky * 3 + kx] =
                        wts[(o * in_c + c) * 9 + (2 - ky) * 3 + (2 - kx)];
                }
            }
        }
    }
    let mut dx = Tensor::zeros(&[n, in_c, h, w]);
    let mut cols = Vec::new();
    for b in 0..n {
        build_patch_rows(&up[b * out_c * plane..(b + 1) * out_c * plane], out_c, h, w, &mut cols);
        patch_matmul(
            &flipped,
            out_c * 9,
            &cols,
            plane,
            None,
            &mut dx.data[b * in_c * plane..(b + 1) * in_c * plane],
            work,
        );
    }

    // Weight gradient: dw[o][c,ky,kx] = dot(upstream plane o, patch row
    // (c,ky,kx)); bias gradient sums the upstream planes.
    let mut dw = Tensor::zeros(&conv.weight.shape);
    let mut db = Tensor::zeros(&[out_c]);
    for b in 0..n {
        for o in 0..out_c {
            let up_plane = &up[(b * out_c + o) * plane..(b * out_c + o + 1) * plane];
            db.data[o] += sum_unrolled(up_plane);
        }
    }
    let k_len = in_c * 9;
    let mut cols = Vec::new();
    for b in 0..n {
        build_patch_rows(&input.data[b * in_c * plane..(b + 1) * in_c * plane], in_c, h, w, &mut cols);
        let cols_ref = &cols;
        for_each_chunk(&mut dw.data, k_len, work, |o, dw_o| {
            let up_plane = &up[(b * out_c + o) * plane..(b * out_c + o + 1) * plane];
            for (k, col_row) in cols_ref.chunks_exact(plane).enumerate() {
                dw_o[k] += dot_unrolled(up_plane, col_row);
            }
        });
    }

    (dx, dw, db)
}

fn deconv_forward<T: Scalar>(d: &Deconv2d<T>, input: &Tensor<T>) -> Tensor<T> {
    let (n, in_c, h, w) = input.dims4().expect("checked by output_shape");
    let out_c = d.out_channels;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor::zeros(&[n, out_c, oh, ow]);
    let oplane = oh * ow;
    let iplane = h * w;
    let wts = &d.weight.data;
    let input_data = &input.data;

    let work = n * out_c * in_c * iplane * 4;
    for_each_chunk(&mut out.data, oplane, work, |chunk, out_plane| {
        let b = chunk / out_c;
        let o = chunk % out_c;
        out_plane.fill(d.bias.data[o]);
        for c in 0..in_c {
            let in_plane = &input_data[(b * in_c + c) * iplane..(b * in_c + c + 1) * iplane];
            let wbase = (c * out_c + o) * 4;
            let w00 = wts[wbase];
            let w01 = wts[wbase + 1];
            let w10 = wts[wbase + 2];
            let w11 = wts[wbase + 3];
            for y in 0..h {
                let src = &in_plane[y * w..(y + 1) * w];
                let (top, rest) = out_plane[2 * y * ow..].split_at_mut(ow);
                let bottom = &mut rest[..ow];
                for x in 0..w {
                    let v = src[x];
                    top[2 * x] += w00 * v;
                    top[2 * x + 1] += w01 * v;
                    bottom[2 * x] += w10 * v;
                    bottom[2 * x + 1] += w11 * v;
                }
            }
        }
    });
    out
}

fn deconv_backward<T: Scalar>(
    d: &Deconv2d<T>,
    input: &Tensor<T>,
    upstream: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, in_c, h, w) = input.dims4().expect("recorded forward shape");
    let out_c = d.out_channels;
    let (oh, ow) = (2 * h, 2 * w);
    let oplane = oh * ow;
    let iplane = h * w;
    let wts = &d.weight.data;
    let up = &upstream.data;
    let input_data = &input.data;

    let work = n * out_c * in_c * iplane * 4;
    let mut dx = Tensor::zeros(&[n, in_c, h, w]);
    for_each_chunk(&mut dx.data, iplane, work, |chunk, dx_plane| {
        let b = chunk / in_c;
        let c = chunk % in_c;
        for o in 0..out_c {
            let up_plane = &up[(b * out_c + o) * oplane..(b * out_c + o + 1) * oplane];
            let wbase = (c * out_c + o) * 4;
            let w00 = wts[wbase];
            let w01 = wts[wbase + 1];
            let w10 = wts[wbase + 2];
            let w11 = wts[wbase + 3];
            for y in 0..h {
                let top = &up_plane[2 * y * ow..(2 * y + 1) * ow];
                let bottom = &up_plane[(2 * y + 1) * ow..(2 * y + 2) * ow];
                let dst = &mut dx_plane[y * w..(y + 1) * w];
                for x in 0..w {
                    dst[x] += w00 * top[2 * x]
                        + w01 * top[2 * x + 1]
                        + w10 * bottom[2 * x]
                        + w11 * bottom[2 * x + 1];
                }
            }
        }
    });

    let mut dw = Tensor::zeros(&d.weight.shape);
    let dw_chunk = out_c * 4;
    for_each_chunk(&mut dw.data, dw_chunk, work, |c, dw_c| {
        for b in 0..n {
            let in_plane = &input_data[(b * in_c + c) * iplane..(b * in_c + c + 1) * iplane];
            for o in 0..out_c {
                let up_plane = &up[(b * out_c + o) * oplane..(b * out_c + o + 1) * oplane];
                let mut a00 = T::zero();
                let mut a01 = T::zero();
                let mut a10 = T::zero();
                let mut a11 = T::zero();
                for y in 0..h {
                    let src = &in_plane[y * w..(y + 1) * w];
                    let top = &up_plane[2 * y * ow..(2 * y + 1) * ow];
                    let bottom = &up_plane[(2 * y + 1) * ow..(2 * y + 2) * ow];
                    for x in 0..w {
                        let v = src[x];
                        a00 += v * top[2 * x];
                        a01 += v * top[2 * x + 1];
                        a10 += v * bottom[2 * x];
                        a11 += v * bottom[2 * x + 1];
                    }
                }
                dw_c[o * 4] += a00;
                dw_c[o * 4 + 1] += a01;
                dw_c[o * 4 + 2] += a10;
                dw_c[o * 4 + 3] += a11;
            }
        }
    });

    let mut db = Tensor::zeros(&[out_c]);
    for b in 0..n {
        for o in 0..out_c {
            let up_plane = &up[(b * out_c + o) * oplane..(b * out_c + o + 1) * oplane];
            db.data[o] += sum_unrolled(up_plane);
        }
    }

    (dx, dw, db)
}

fn maxpool_forward<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let (n, c, h, w) = input.dims4().expect("checked by output_shape");
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let mut argmax = vec![0u32; out.numel()];
    let iplane = h * w;
    let oplane = oh * ow;
    for p in 0..n * c {
        let in_plane = &input.data[p * iplane..(p + 1) * iplane];
        let out_plane = &mut out.data[p * oplane..(p + 1) * oplane];
        let arg_plane = &mut argmax[p * oplane..(p + 1) * oplane];
        for y in 0..oh {
            for x in 0..ow {
                // row-major window order; strict > keeps the first max on ties
                let mut best_idx = 2 * y * w + 2 * x;
                let mut best = in_plane[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (2 * y + dy) * w + 2 * x + dx;
                    if in_plane[idx] > best {
                        best = in_plane[idx];
                        best_idx = idx;
                    }
                }
                out_plane[y * ow + x] = best;
                arg_plane[y * ow + x] = best_idx as u32;
            }
        }
    }
    (out, argmax)
}

fn maxpool_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>, argmax: &[u32]) -> Tensor<T> {
    let (n, c, h, w) = input.dims4().expect("recorded forward shape");
    let (oh, ow) = (h / 2, w / 2);
    let mut dx = Tensor::zeros(&[n, c, h, w]);
    let iplane = h * w;
    let oplane = oh * ow;
    for p in 0..n * c {
        let dx_plane = &mut dx.data[p * iplane..(p + 1) * iplane];
        let up_plane = &upstream.data[p * oplane..(p + 1) * oplane];
        let arg_plane = &argmax[p * oplane..(p + 1) * oplane];
        for i in 0..oplane {
            dx_plane[arg_plane[i] as usize] += up_plane[i];
        }
    }
    dx
}

fn bn_forward_train<T: Scalar>(bn: &mut BatchNorm<T>, input: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Vec<T>) {
    let (n, c, h, w) = input.dims4().expect("checked by output_shape");
    let plane = h * w;
    let m = T::from_f64((n * plane) as f64);
    let eps = T::from_f64(bn.epsilon);
    let mom = T::from_f64(bn.momentum);
    let one_minus = T::one() - mom;

    let mut out = Tensor::zeros(&input.shape[..]);
    let mut xhat = Tensor::zeros(&input.shape[..]);
    let mut inv_std = vec![T::zero(); c];

    for ch in 0..c {
        let mut sum = T::zero();
        let mut sumsq = T::zero();
        for b in 0..n {
            let xs = &input.data[(b * c + ch) * plane..(b * c + ch + 1) * plane];
            sum += sum_unrolled(xs);
            sumsq += dot_unrolled(xs, xs);
        }
        let mean = sum / m;
        let var = (sumsq / m - mean * mean).max(T::zero());
        let istd = T::one() / (var + eps).sqrt();
        inv_std[ch] = istd;
        let gamma = bn.scale.data[ch];
        let beta = bn.shift.data[ch];
        for b in 0..n {
            let base = (b * c + ch) * plane;
            let xs = &input.data[base..base + plane];
            let xh = &mut xhat.data[base..base + plane];
            let os = &mut out.data[base..base + plane];
            for i in 0..plane {
                let v = (xs[i] - mean) * istd;
                xh[i] = v;
                os[i] = gamma * v + beta;
            }
        }
        bn.running_mean.data[ch] = mom * bn.running_mean.data[ch] + one_minus * mean;
        bn.running_var.data[ch] = mom * bn.running_var.data[ch] + one_minus * var;
    }
    (out, xhat, inv_std)
}

fn bn_forward_infer<T: Scalar>(bn: &BatchNorm<T>, input: &Tensor<T>) -> Tensor<T> {
    let (n, c, _h, _w) = input.dims4().expect("checked by output_shape");
    let plane = input.numel() / (n * c);
    let eps = T::from_f64(bn.epsilon);
    let mut out = Tensor::zeros(&input.shape[..]);
    for ch in 0..c {
        let istd = T::one() / (bn.running_var.data[ch] + eps).sqrt();
        let gamma = bn.scale.data[ch];
        let beta = bn.shift.data[ch];
        let mean = bn.running_mean.data[ch];
        for b in 0..n {
            let base = (b * c + ch) * plane;
            let xs = &input.data[base..base + plane];
            let os = &mut out.data[base..base + plane];
            for i in 0..plane {
                os[i] = gamma * (xs[i] - mean) * istd + beta;
            }
        }
    }
    out
}

fn bn_backward<T: Scalar>(
    bn: &BatchNorm<T>,
    xhat: &Tensor<T>,
    inv_std: &[T],
    upstream: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, c, h, w) = xhat.dims4().expect("recorded forward shape");
    let plane = h * w;
    let m = T::from_f64((n * plane) as f64);

    let mut dx = Tensor::zeros(&xhat.shape[..]);
    let mut dscale = Tensor::zeros(&[c]);
    let mut dshift = Tensor::zeros(&[c]);

    for ch in 0..c {
        let mut sum_dy = T::zero();
        let mut sum_dy_xhat = T::zero();
        for b in 0..n {
            let base = (b * c + ch) * plane;
            sum_dy += sum_unrolled(&upstream.data[base..base + plane]);
            sum_dy_xhat += dot_unrolled(&upstream.data[base..base + plane], &xhat.data[base..base + plane]);
        }
        dscale.data[ch] = sum_dy_xhat;
        dshift.data[ch] = sum_dy;
        let gamma_istd = bn.scale.data[ch] * inv_std[ch];
        let mean_dy = sum_dy / m;
        let mean_dy_xhat = sum_dy_xhat / m;
        for b in 0..n {
            let base = (b * c + ch) * plane;
            let dys = &upstream.data[base..base + plane];
            let xhs = &xhat.data[base..base + plane];
            let dxs = &mut dx.data[base..base + plane];
            for i in 0..plane {
                dxs[i] = gamma_istd * (dys[i] - mean_dy - xhs[i] * mean_dy_xhat);
            }
        }
    }
    (dx, dscale, dshift)
}

fn concat_forward<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (n, ca, h, w) = a.dims4().expect("checked by output_shape");
    let cb = b.shape[1];
    let plane = h * w;
    let mut out = Tensor::zeros(&[n, ca + cb, h, w]);
    for batch in 0..n {
        let dst_base = batch * (ca + cb) * plane;
        out.data[dst_base..dst_base + ca * plane]
            .copy_from_slice(&a.data[batch * ca * plane..(batch + 1) * ca * plane]);
        out.data[dst_base + ca * plane..dst_base + (ca + cb) * plane]
            .copy_from_slice(&b.data[batch * cb * plane..(batch + 1) * cb * plane]);
    }
    out
}

fn concat_backward<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, upstream: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    let (n, ca, h, w) = a.dims4().expect("recorded forward shape");
    let cb = b.shape[1];
    let plane = h * w;
    let mut da = Tensor::zeros(&a.shape[..]);
    let mut db = Tensor::zeros(&b.shape[..]);
    for batch in 0..n {
        let src_base = batch * (ca + cb) * plane;
        da.data[batch * ca * plane..(batch + 1) * ca * plane]
            .copy_from_slice(&upstream.data[src_base..src_base + ca * plane]);
        db.data[batch * cb * plane..(batch + 1) * cb * plane]
            .copy_from_slice(&upstream.data[src_base + ca * plane..src_base + (ca + cb) * plane]);
    }
    (da, db)
}
