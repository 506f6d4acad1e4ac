//! Binary cross-entropy against per-tissue mask targets.
//!
//! The network's output activation is a log-sigmoid, so the loss accepts
//! either log-space predictions (the default, numerically robust path) or
//! probability-space predictions in (0, 1); the choice is a configuration
//! flag. Targets are binary masks.

use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Which space the prediction tensor lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossSpace {
    /// Predictions are log-probabilities (log-sigmoid outputs, <= 0).
    Log,
    /// Predictions are probabilities in (0, 1).
    Probability,
}

/// Probabilities are clamped into [CLAMP, 1 - CLAMP] to keep the logs finite
/// with saturated sigmoids.
pub const CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient w.r.t. the prediction tensor.
///
/// loss = -mean(t * ln p + (1 - t) * ln(1 - p))
pub fn cross_entropy<T: Scalar>(
    prediction: &Tensor<T>,
    target: &Tensor<T>,
    space: LossSpace,
) -> Result<(f64, Tensor<T>)> {
    if prediction.shape != target.shape {
        return Err(Error::ShapeMismatch(format!(
            "cross_entropy: prediction {:?} vs target {:?}",
            prediction.shape, target.shape
        )));
    }
    if target.data.iter().any(|&t| !(t == T::zero() || t == T::one())) {
        return Err(Error::ShapeMismatch("cross_entropy: targets must be binary".into()));
    }
    let n = prediction.numel();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let inv_n = 1.0 / n as f64;
    let clamp_lo = CLAMP;
    let clamp_hi = 1.0 - CLAMP;

    let mut loss = 0.0f64;
    let mut grad = Tensor::zeros(&prediction.shape[..]);
    match space {
        LossSpace::Probability => {
            for i in 0..n {
                let p_raw = prediction.data[i].into_f64();
                if !(0.0..=1.0).contains(&p_raw) {
                    return Err(Error::NonFinite(format!(
                        "cross_entropy: probability {} outside [0,1]",
                        p_raw
                    )));
                }
                let p = p_raw.clamp(clamp_lo, clamp_hi);
                let t = target.data[i].into_f64();
                loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
                // d/dp of -[t ln p + (1-t) ln(1-p)] = (p - t) / (p (1 - p))
                grad.data[i] = T::from_f64(inv_n * (p - t) / (p * (1.0 - p)));
            }
        }
        LossSpace::Log => {
            for i in 0..n {
                let l_raw = prediction.data[i].into_f64();
                // clamp in probability space: l in [ln eps, ln(1 - eps)]
                let l = l_raw.clamp(clamp_lo.ln(), clamp_hi.ln());
                let p = l.exp();
                let t = target.data[i].into_f64();
                loss -= t * l + (1.0 - t) * (-p).ln_1p();
                // d/dl of -[t l + (1-t) ln(1 - e^l)] = -t + (1-t) p / (1-p)
                grad.data[i] = T::from_f64(inv_n * (-t + (1.0 - t) * p / (1.0 - p)));
            }
        }
    }
    Ok((loss * inv_n, grad))
}
