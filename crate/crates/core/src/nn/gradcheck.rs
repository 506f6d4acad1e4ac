//! Central finite-difference gradient verification.
//!
//! These helpers only ever call forward passes, so they stay independent of
//! the analytic backward implementations they are used to check. Run them on
//! the f64 instantiation: the default perturbation 1e-4 drowns in f32
//! rounding.

use crate::nn::tensor::{Scalar, Tensor};

/// Default central-difference perturbation.
pub const DEFAULT_PERTURBATION: f64 = 1e-4;

/// Relative error between an analytic derivative and a finite-difference
/// estimate, guarded against division by ~0.
pub fn relative_error(analytic: f64, estimate: f64) -> f64 {
    let denom = analytic.abs().max(estimate.abs()).max(1e-8);
    (analytic - estimate).abs() / denom
}

/// Central finite difference of a scalar-valued function w.r.t. one entry of
/// a tensor that the closure reads.
pub fn central_difference<T: Scalar, F>(tensor: &mut Tensor<T>, index: usize, h: f64, mut eval: F) -> f64
where
    F: FnMut(&Tensor<T>) -> f64,
{
    let original = tensor.data[index];
    tensor.data[index] = original + T::from_f64(h);
    let plus = eval(tensor);
    tensor.data[index] = original - T::from_f64(h);
    let minus = eval(tensor);
    tensor.data[index] = original;
    (plus - minus) / (2.0 * h)
}

/// Check every entry of `analytic` against finite differences of `eval`
/// applied to `tensor`. Returns the worst relative error.
pub fn max_relative_error<T: Scalar, F>(
    tensor: &mut Tensor<T>,
    analytic: &Tensor<T>,
    h: f64,
    mut eval: F,
) -> f64
where
    F: FnMut(&Tensor<T>) -> f64,
{
    assert_eq!(tensor.shape, analytic.shape, "gradient shape mismatch");
    let mut worst = 0.0f64;
    for i in 0..tensor.data.len() {
        let fd = central_difference(tensor, i, h, &mut eval);
        let err = relative_error(analytic.data[i].into_f64(), fd);
        if err > worst {
            worst = err;
        }
    }
    worst
}
