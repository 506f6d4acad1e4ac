//! Parameter initialization: fan-in scaled uniform for convolution kernels
//! (suited to ReLU stacks), zero biases, unit batch-norm scale.

use rand::Rng;

use crate::nn::layer::{Conv2d, Deconv2d};
use crate::nn::tensor::{Scalar, Tensor};

fn uniform_tensor<T: Scalar, R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::from_f64(rng.gen_range(-bound..bound))).collect();
    Tensor { shape: shape.to_vec(), data }
}

pub fn kaiming_conv<T: Scalar, R: Rng>(in_channels: usize, out_channels: usize, rng: &mut R) -> Conv2d<T> {
    let fan_in = (in_channels * 9) as f64;
    let bound = (6.0 / fan_in).sqrt();
    Conv2d {
        in_channels,
        out_channels,
        weight: uniform_tensor(&[out_channels, in_channels, 3, 3], bound, rng),
        bias: Tensor::zeros(&[out_channels]),
    }
}

pub fn kaiming_deconv<T: Scalar, R: Rng>(in_channels: usize, out_channels: usize, rng: &mut R) -> Deconv2d<T> {
    // each output element sees exactly one input element per channel
    let fan_in = in_channels as f64;
    let bound = (6.0 / fan_in).sqrt();
    Deconv2d {
        in_channels,
        out_channels,
        weight: uniform_tensor(&[in_channels, out_channels, 2, 2], bound, rng),
        bias: Tensor::zeros(&[out_channels]),
    }
}
