//! Bias-corrected ADAM parameter updates.

use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<Tensor<T>>,
    second_moment: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Moment accumulators are allocated to match `param_shapes`, i.e. the
    /// flattened parameter list of the network being trained.
    pub fn new(param_shapes: &[Vec<usize>], learning_rate: f64) -> Self {
        Self {
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            second_moment: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// One update over the flattened parameter list. `params` and `grads`
    /// must match the shapes the state was created with.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != self.first_moment.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam: {} parameters, {} gradients, state built for {}",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one = T::one();
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        // fold the bias corrections into one scalar step size
        let alpha = T::from_f64(self.learning_rate / bias1);
        let inv_sqrt_bias2 = T::from_f64(1.0 / bias2.sqrt());
        let eps = T::from_f64(self.epsilon);

        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            if param.shape != grad.shape || param.shape != m.shape {
                return Err(Error::ShapeMismatch(format!(
                    "adam: parameter {:?} vs gradient {:?} vs state {:?}",
                    param.shape, grad.shape, m.shape
                )));
            }
            for i in 0..param.data.len() {
                let g = grad.data[i];
                m.data[i] = b1 * m.data[i] + (one - b1) * g;
                v.data[i] = b2 * v.data[i] + (one - b2) * g * g;
                let denom = (v.data[i]).sqrt() * inv_sqrt_bias2 + eps;
                param.data[i] = param.data[i] - alpha * m.data[i] / denom;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_sign() {
        let mut p = Tensor::from_vec(&[2], vec![1.0f64, -2.0]).unwrap();
        let g = Tensor::from_vec(&[2], vec![0.3f64, -0.7]).unwrap();
        let mut adam = AdamState::new(&[vec![2]], 1e-3);
        adam.step(&mut [&mut p], &[g]).unwrap();
        // bias-corrected first step is -lr * g / (|g| + ~0) = -lr * sign(g)
        assert!((p.data[0] - (1.0 - 1e-3)).abs() < 1e-6, "{}", p.data[0]);
        assert!((p.data[1] - (-2.0 + 1e-3)).abs() < 1e-6, "{}", p.data[1]);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut p = Tensor::from_vec(&[3], vec![1.0f64, 2.0, 3.0]).unwrap();
        let original = p.clone();
        let mut adam = AdamState::new(&[vec![3]], 1e-2);
        for _ in 0..10 {
            let g = Tensor::zeros(&[3]);
            adam.step(&mut [&mut p], &[g]).unwrap();
        }
        assert_eq!(p.data, original.data);
    }

    #[test]
    fn identical_states_give_identical_results() {
        let run = || {
            let mut p = Tensor::from_vec(&[2], vec![0.5f64, -0.1]).unwrap();
            let mut adam = AdamState::new(&[vec![2]], 5e-3);
            for k in 0..5 {
                let g = Tensor::from_vec(&[2], vec![0.1 * (k as f64 + 1.0), -0.2]).unwrap();
                adam.step(&mut [&mut p], &[g]).unwrap();
            }
            p.data
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut p = Tensor::from_vec(&[2], vec![0.0f64; 2]).unwrap();
        let g = Tensor::zeros(&[3]);
        let mut adam = AdamState::new(&[vec![2]], 1e-3);
        assert!(adam.step(&mut [&mut p], &[g]).is_err());
    }
}
