//! Training: shuffled 90/10 slice split, mini-batches (default 2), ADAM on
//! the summed per-track cross-entropy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::adam::AdamState;
use crate::nn::layer::Mode;
use crate::nn::loss::{cross_entropy, LossSpace};
use crate::nn::tensor::{Scalar, Tensor};
use crate::volume::{extract_label_slice, extract_slice, slice_count, Axis, LabelVolume, ScalarVolume};

use super::build::OutputMode;
use super::graph::{ArchKind, NetworkGraph, Tape};

/// Paired MRI/label volumes sliced along one axis.
pub struct SliceDataset {
    pub volumes: Vec<(ScalarVolume, LabelVolume)>,
    pub axis: Axis,
}

impl SliceDataset {
    pub fn new(volumes: Vec<(ScalarVolume, LabelVolume)>, axis: Axis) -> Result<Self> {
        for (mri, labels) in &volumes {
            if mri.dims != labels.dims {
                return Err(Error::MisalignedDims(format!(
                    "mri {:?} vs labels {:?}",
                    mri.dims, labels.dims
                )));
            }
        }
        Ok(Self { volumes, axis })
    }

    /// Global (volume, slice) index list.
    pub fn slice_ids(&self) -> Vec<(usize, usize)> {
        let mut ids = Vec::new();
        for (v, (mri, _)) in self.volumes.iter().enumerate() {
            for k in 0..slice_count(mri.dims, self.axis) {
                ids.push((v, k));
            }
        }
        ids
    }
}

#[derive(Debug, Clone)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Fraction of shuffled slices used for training; the rest validate.
    pub split: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 2, learning_rate: 1e-3, seed: 0, split: 0.9 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LossTrace {
    /// Mean training loss per epoch.
    pub train: Vec<f64>,
    /// Mean validation loss per epoch (empty when the split leaves no
    /// validation slices).
    pub validation: Vec<f64>,
}

/// Deterministic shuffled split of the slice list.
pub fn split_dataset(ids: &[(usize, usize)], split: f64, seed: u64) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut shuffled = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let train_count = ((split * shuffled.len() as f64).round() as usize).clamp(1, shuffled.len());
    let validation = shuffled.split_off(train_count);
    (shuffled, validation)
}

fn batch_input<T: Scalar>(dataset: &SliceDataset, ids: &[(usize, usize)], extent: usize) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(ids.len() * extent * extent);
    for &(v, k) in ids {
        let slice = extract_slice(&dataset.volumes[v].0, dataset.axis, k)?;
        if slice.width != extent || slice.height != extent {
            return Err(Error::ShapeMismatch(format!(
                "slice {}x{} does not match network extent {}",
                slice.width, slice.height, extent
            )));
        }
        data.extend(slice.data.iter().map(|&x| T::from_f64(f64::from(x))));
    }
    Tensor::from_vec(&[ids.len(), 1, extent, extent], data)
}

/// Per-tissue binary target for one track, stacked over the batch.
fn batch_target<T: Scalar>(
    dataset: &SliceDataset,
    ids: &[(usize, usize)],
    tissue: u8,
    extent: usize,
) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(ids.len() * extent * extent);
    for &(v, k) in ids {
        let slice = extract_label_slice(&dataset.volumes[v].1, dataset.axis, k)?;
        data.extend(slice.data.iter().map(|&l| if l == tissue { T::one() } else { T::zero() }));
    }
    Tensor::from_vec(&[ids.len(), 1, extent, extent], data)
}

/// All-tissue target with one channel per tissue (U-net path).
fn batch_target_stacked<T: Scalar>(
    dataset: &SliceDataset,
    ids: &[(usize, usize)],
    channels: usize,
    extent: usize,
) -> Result<Tensor<T>> {
    let plane = extent * extent;
    let mut data = vec![T::zero(); ids.len() * channels * plane];
    for (b, &(v, k)) in ids.iter().enumerate() {
        let slice = extract_label_slice(&dataset.volumes[v].1, dataset.axis, k)?;
        for (i, &l) in slice.data.iter().enumerate() {
            if l >= 1 && (l as usize) <= channels {
                data[(b * channels + l as usize - 1) * plane + i] = T::one();
            }
        }
    }
    Tensor::from_vec(&[ids.len(), channels, extent, extent], data)
}

/// Loss over all tracks for one forward tape; returns (loss, per-output
/// gradients). ForkNet sums the per-track mean cross-entropies; the U-net
/// path evaluates all tissue channels at once with the same scale.
fn batch_loss<T: Scalar>(
    net: &NetworkGraph<T>,
    tape: &Tape<T>,
    dataset: &SliceDataset,
    ids: &[(usize, usize)],
    output_mode: OutputMode,
) -> Result<(f64, Vec<Tensor<T>>)> {
    let extent = net.input_shape[1];
    let space = match output_mode {
        OutputMode::LogSigmoid => LossSpace::Log,
        OutputMode::Probability => LossSpace::Probability,
    };
    let to_space = |t: &Tensor<T>| -> Tensor<T> {
        match output_mode {
            OutputMode::LogSigmoid => t.clone(),
            OutputMode::Probability => t.map(|v| v.exp()),
        }
    };
    // chain rule through p = exp(l) when the loss runs in probability space
    let out_grad = |grad: Tensor<T>, out: &Tensor<T>| -> Tensor<T> {
        match output_mode {
            OutputMode::LogSigmoid => grad,
            OutputMode::Probability => {
                let mut g = grad;
                for (gi, &l) in g.data.iter_mut().zip(&out.data) {
                    *gi *= l.exp();
                }
                g
            }
        }
    };
    match net.arch {
        ArchKind::ForkNet => {
            let mut total = 0.0;
            let mut grads = Vec::with_capacity(net.outputs.len());
            for track in 0..net.outputs.len() {
                let out = tape.output(net, track);
                let target = batch_target::<T>(dataset, ids, (track + 1) as u8, extent)?;
                let (loss, grad) = cross_entropy(&to_space(out), &target, space)?;
                total += loss;
                grads.push(out_grad(grad, out));
            }
            Ok((total, grads))
        }
        ArchKind::UNet => {
            let out = tape.output(net, 0);
            let channels = out.shape[1];
            let target = batch_target_stacked::<T>(dataset, ids, channels, extent)?;
            let (loss, grad) = cross_entropy(&to_space(out), &target, space)?;
            // scale to the sum-over-tissues convention
            let scale = T::from_f64(channels as f64);
            let mut grad = out_grad(grad, out);
            for g in grad.data.iter_mut() {
                *g *= scale;
            }
            Ok((loss * channels as f64, vec![grad]))
        }
    }
}

/// Train in place; returns the per-epoch loss trace.
pub fn train<T: Scalar>(
    net: &mut NetworkGraph<T>,
    dataset: &SliceDataset,
    schedule: &TrainSchedule,
    output_mode: OutputMode,
) -> Result<LossTrace> {
    crate::runtime::keep_step_buffers_heap_resident();
    let ids = dataset.slice_ids();
    if ids.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train_ids, val_ids) = split_dataset(&ids, schedule.split, schedule.seed);
    let mut adam = AdamState::new(&net.param_shapes(), schedule.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed.wrapping_add(1));
    let mut trace = LossTrace::default();

    for _epoch in 0..schedule.epochs {
        let mut order = train_ids.clone();
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(schedule.batch_size.max(1)) {
            let input = batch_input::<T>(dataset, batch, net.input_shape[1])?;
            let tape = net.forward(&input, Mode::Train)?;
            let (loss, output_grads) = batch_loss(net, &tape, dataset, batch, output_mode)?;
            let grads = net.backward(&input, &tape, &output_grads)?;
            let flat: Vec<Tensor<T>> = grads.param_grads.into_iter().flatten().collect();
            let mut params = net.parameters_mut();
            adam.step(&mut params, &flat)?;
            epoch_loss += loss;
            batches += 1;
        }
        trace.train.push(epoch_loss / batches.max(1) as f64);

        if !val_ids.is_empty() {
            let mut val_loss = 0.0;
            let mut val_batches = 0usize;
            for batch in val_ids.chunks(schedule.batch_size.max(1)) {
                let input = batch_input::<T>(dataset, batch, net.input_shape[1])?;
                let tape = net.forward(&input, Mode::Infer)?;
                let (loss, _) = batch_loss(net, &tape, dataset, batch, output_mode)?;
                val_loss += loss;
                val_batches += 1;
            }
            trace.validation.push(val_loss / val_batches.max(1) as f64);
        }
    }
    Ok(trace)
}
