//! Layer DAG with shared encoder and parallel decoder tracks, plus the
//! forward/backward machinery over it.
//!
//! Execution exploits the architecture's shape: the shared prefix (the
//! encoder) runs once, then the decoder tracks — disjoint contiguous node
//! ranges that only read encoder outputs — run in parallel. Per-track work
//! is independent and merges happen in track order, so results are bitwise
//! deterministic under any thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::layer::{Aux, Layer, Mode};
use crate::nn::tensor::{Scalar, Tensor};

/// Where a node reads its input from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Src {
    /// The network input tensor.
    Input,
    /// The output of an earlier node.
    Node(usize),
}

#[derive(Debug, Clone)]
pub struct Node<T> {
    pub name: String,
    pub layer: Layer<T>,
    pub inputs: Vec<Src>,
}

/// Walker metadata: one entry per architecture module (encoder stage,
/// decoder stage, skip merge, output map), pointing at the node whose output
/// is the module's output.
#[derive(Debug, Clone)]
pub struct ModuleInfo {
    pub name: String,
    pub output_node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    ForkNet,
    UNet,
}

#[derive(Debug, Clone)]
pub struct NetworkGraph<T> {
    pub nodes: Vec<Node<T>>,
    /// One output node per decoder track (ForkNet) or the single
    /// multi-channel output node (U-net).
    pub outputs: Vec<usize>,
    /// Input tensor shape (channels, height, width); batch is prepended at
    /// run time.
    pub input_shape: [usize; 3],
    pub modules: Vec<ModuleInfo>,
    pub arch: ArchKind,
    /// Nodes below this index form the shared prefix evaluated once;
    /// the rest belong to the disjoint per-track ranges.
    pub(crate) shared_end: usize,
    /// Contiguous absolute node ranges, one per decoder track.
    pub(crate) track_ranges: Vec<(usize, usize)>,
}

/// Activations and per-node context saved by a forward pass, consumed by the
/// backward pass.
pub struct Tape<T> {
    pub node_outputs: Vec<Tensor<T>>,
    pub aux: Vec<Aux<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn output(&self, graph: &NetworkGraph<T>, track: usize) -> &Tensor<T> {
        &self.node_outputs[graph.outputs[track]]
    }
}

/// Gradients from one backward pass: per-node parameter gradients (in each
/// layer's `params()` order) plus the gradient w.r.t. the network input.
pub struct GradStore<T> {
    pub param_grads: Vec<Vec<Tensor<T>>>,
    pub input_grad: Tensor<T>,
}

fn resolve<'a, T>(
    src: &Src,
    input: &'a Tensor<T>,
    prefix: &'a [Tensor<T>],
    local_base: usize,
    local: &'a [Tensor<T>],
) -> &'a Tensor<T> {
    match src {
        Src::Input => input,
        Src::Node(j) if *j < prefix.len() => &prefix[*j],
        Src::Node(j) => &local[*j - local_base],
    }
}

impl<T: Scalar> NetworkGraph<T> {
    /// Infer every node's output shape for a batch of `batch` inputs without
    /// evaluating anything.
    pub fn infer_shapes(&self, batch: usize) -> Result<Vec<Vec<usize>>> {
        let input_shape = vec![batch, self.input_shape[0], self.input_shape[1], self.input_shape[2]];
        let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let input_shapes: Vec<&[usize]> = node
                .inputs
                .iter()
                .map(|src| match src {
                    Src::Input => input_shape.as_slice(),
                    Src::Node(i) => shapes[*i].as_slice(),
                })
                .collect();
            shapes.push(node.layer.output_shape(&input_shapes)?);
        }
        Ok(shapes)
    }

    pub fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tape<T>> {
        if input.shape.len() != 4
            || input.shape[1..] != [self.input_shape[0], self.input_shape[1], self.input_shape[2]]
        {
            return Err(Error::ShapeMismatch(format!(
                "network input {:?}, expected [batch, {}, {}, {}]",
                input.shape, self.input_shape[0], self.input_shape[1], self.input_shape[2]
            )));
        }

        // shared prefix, evaluated once for all tracks
        let shared_end = self.shared_end;
        let mut prefix_outputs: Vec<Tensor<T>> = Vec::with_capacity(shared_end);
        let mut prefix_aux: Vec<Aux<T>> = Vec::with_capacity(shared_end);
        for i in 0..shared_end {
            let node = &mut self.nodes[i];
            let inputs: Vec<&Tensor<T>> = node
                .inputs
                .iter()
                .map(|src| resolve(src, input, &prefix_outputs, shared_end, &[]))
                .collect();
            let (out, aux) = node.layer.forward(&inputs, mode)?;
            prefix_outputs.push(out);
            prefix_aux.push(aux);
        }

        // per-track ranges as disjoint mutable slices
        let ranges = self.track_ranges.clone();
        let mut rest: &mut [Node<T>] = &mut self.nodes[shared_end..];
        let mut track_slices: Vec<(usize, &mut [Node<T>])> = Vec::with_capacity(ranges.len());
        for &(start, end) in &ranges {
            let (head, tail) = rest.split_at_mut(end - start);
            track_slices.push((start, head));
            rest = tail;
        }

        let prefix_ref = &prefix_outputs;
        let track_results: Vec<Result<(Vec<Tensor<T>>, Vec<Aux<T>>)>> = track_slices
            .into_par_iter()
            .map(|(start, nodes)| {
                let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(nodes.len());
                let mut auxes: Vec<Aux<T>> = Vec::with_capacity(nodes.len());
                for node in nodes.iter_mut() {
                    let inputs: Vec<&Tensor<T>> = node
                        .inputs
                        .iter()
                        .map(|src| resolve(src, input, prefix_ref, start, &outputs))
                        .collect();
                    let (out, aux) = node.layer.forward(&inputs, mode)?;
                    outputs.push(out);
                    auxes.push(aux);
                }
                Ok((outputs, auxes))
            })
            .collect();

        let mut node_outputs = prefix_outputs;
        let mut aux = prefix_aux;
        for result in track_results {
            let (outputs, auxes) = result?;
            node_outputs.extend(outputs);
            aux.extend(auxes);
        }
        Ok(Tape { node_outputs, aux })
    }

    /// Reverse-mode pass. `output_grads` supplies the loss gradient w.r.t.
    /// each output node, in `outputs` order.
    pub fn backward(&self, input: &Tensor<T>, tape: &Tape<T>, output_grads: &[Tensor<T>]) -> Result<GradStore<T>> {
        if output_grads.len() != self.outputs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} output gradients for {} outputs",
                output_grads.len(),
                self.outputs.len()
            )));
        }
        let shared_end = self.shared_end;
        let mut seeds: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        for (grad, &node_id) in output_grads.iter().zip(&self.outputs) {
            accumulate(&mut seeds[node_id], grad)?;
        }

        // per-track backward, in parallel; each track reports its parameter
        // gradients plus contributions to the shared prefix and the input
        struct TrackGrads<T> {
            start: usize,
            param_grads: Vec<Vec<Tensor<T>>>,
            prefix_grads: Vec<(usize, Tensor<T>)>,
            input_grad: Option<Tensor<T>>,
        }

        let track_results: Vec<Result<TrackGrads<T>>> = self
            .track_ranges
            .par_iter()
            .map(|&(start, end)| {
                let mut local_grads: Vec<Option<Tensor<T>>> = seeds[start..end].to_vec();
                let mut param_grads: Vec<Vec<Tensor<T>>> = vec![Vec::new(); end - start];
                let mut prefix_grads: Vec<(usize, Tensor<T>)> = Vec::new();
                let mut input_grad: Option<Tensor<T>> = None;
                for i in (start..end).rev() {
                    let Some(upstream) = local_grads[i - start].take() else {
                        continue;
                    };
                    let node = &self.nodes[i];
                    let inputs: Vec<&Tensor<T>> = node
                        .inputs
                        .iter()
                        .map(|src| match src {
                            Src::Input => input,
                            Src::Node(j) => &tape.node_outputs[*j],
                        })
                        .collect();
                    let (input_gs, param_gs) = node.layer.backward(&inputs, &tape.aux[i], &upstream)?;
                    param_grads[i - start] = param_gs;
                    for (src, g) in node.inputs.iter().zip(input_gs) {
                        match src {
                            Src::Input => accumulate(&mut input_grad, &g)?,
                            Src::Node(j) if *j >= start => accumulate(&mut local_grads[*j - start], &g)?,
                            Src::Node(j) => prefix_grads.push((*j, g)),
                        }
                    }
                }
                Ok(TrackGrads { start, param_grads, prefix_grads, input_grad })
            })
            .collect();

        let mut node_grads: Vec<Option<Tensor<T>>> = seeds;
        let mut param_grads: Vec<Vec<Tensor<T>>> = vec![Vec::new(); self.nodes.len()];
        let mut input_grad = Tensor::zeros(&input.shape[..]);
        for result in track_results {
            let track = result?;
            for (offset, grads) in track.param_grads.into_iter().enumerate() {
                param_grads[track.start + offset] = grads;
            }
            for (j, g) in track.prefix_grads {
                accumulate(&mut node_grads[j], &g)?;
            }
            if let Some(g) = track.input_grad {
                input_grad.add_assign(&g)?;
            }
        }

        // shared prefix backward, sequential
        for i in (0..shared_end).rev() {
            let Some(upstream) = node_grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            let inputs: Vec<&Tensor<T>> = node
                .inputs
                .iter()
                .map(|src| match src {
                    Src::Input => input,
                    Src::Node(j) => &tape.node_outputs[*j],
                })
                .collect();
            let (input_gs, param_gs) = node.layer.backward(&inputs, &tape.aux[i], &upstream)?;
            param_grads[i] = param_gs;
            for (src, g) in node.inputs.iter().zip(input_gs) {
                match src {
                    Src::Input => input_grad.add_assign(&g)?,
                    Src::Node(j) => accumulate(&mut node_grads[*j], &g)?,
                }
            }
        }

        // a node that feeds no output contributes zero gradients
        for (i, node) in self.nodes.iter().enumerate() {
            if param_grads[i].is_empty() && !node.layer.params().is_empty() {
                param_grads[i] = node.layer.params().iter().map(|p| Tensor::zeros(&p.shape)).collect();
            }
        }
        Ok(GradStore { param_grads, input_grad })
    }

    /// Flattened trainable parameters, in node order then layer param order.
    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        self.nodes.iter().flat_map(|n| n.layer.params()).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.nodes.iter_mut().flat_map(|n| n.layer.params_mut()).collect()
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.parameters().iter().map(|p| p.shape.clone()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.numel()).sum()
    }

    /// Move the whole graph to another scalar type (used to run the trained
    /// f32 network under the f64 gradient checker).
    pub fn cast<U: Scalar>(&self) -> NetworkGraph<U> {
        NetworkGraph {
            nodes: self
                .nodes
                .iter()
                .map(|n| Node {
                    name: n.name.clone(),
                    layer: cast_layer(&n.layer),
                    inputs: n.inputs.clone(),
                })
                .collect(),
            outputs: self.outputs.clone(),
            input_shape: self.input_shape,
            modules: self.modules.clone(),
            arch: self.arch,
            shared_end: self.shared_end,
            track_ranges: self.track_ranges.clone(),
        }
    }
}

fn cast_layer<T: Scalar, U: Scalar>(layer: &Layer<T>) -> Layer<U> {
    use crate::nn::layer::{BatchNorm, Conv2d, Deconv2d};
    match layer {
        Layer::Conv(c) => Layer::Conv(Conv2d {
            in_channels: c.in_channels,
            out_channels: c.out_channels,
            weight: c.weight.cast(),
            bias: c.bias.cast(),
        }),
        Layer::Deconv(d) => Layer::Deconv(Deconv2d {
            in_channels: d.in_channels,
            out_channels: d.out_channels,
            weight: d.weight.cast(),
            bias: d.bias.cast(),
        }),
        Layer::BatchNorm(b) => Layer::BatchNorm(BatchNorm {
            channels: b.channels,
            scale: b.scale.cast(),
            shift: b.shift.cast(),
            running_mean: b.running_mean.cast(),
            running_var: b.running_var.cast(),
            momentum: b.momentum,
            epsilon: b.epsilon,
        }),
        Layer::MaxPool => Layer::MaxPool,
        Layer::Relu => Layer::Relu,
        Layer::LogSigmoid => Layer::LogSigmoid,
        Layer::Concat => Layer::Concat,
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, grad: &Tensor<T>) -> Result<()> {
    match slot {
        None => {
            *slot = Some(grad.clone());
            Ok(())
        }
        Some(acc) => acc.add_assign(grad),
    }
}
