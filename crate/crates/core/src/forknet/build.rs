//! Construction of the segmentation networks.
//!
//! Both architectures share the same encoder: depth `D` stages of
//! Conv(3x3) -> BN -> ReLU -> MaxPool(2x2), stage `i` producing `2^(i+2)`
//! channels. The input is a square slice of extent `2^(D+2)`, so the
//! bottleneck after the last pooling is `2^(D+2)` channels at 4x4.
//!
//! ForkNet attaches `N` independent decoder tracks to that shared encoder.
//! A track runs, for levels j = D..1, a DecMod (Deconv(2x2) -> BN -> ReLU ->
//! Conv(3x3) -> BN -> ReLU) producing `2^(j+1)` channels at doubled extent;
//! between DecMods, the pooled encoder output of the matching level is
//! concatenated and squeezed by a ConvMod (Conv(3x3) -> BN -> ReLU) back to
//! `2^(j+2)` channels. The track ends in a 1-channel 3x3 convolution with a
//! log-sigmoid activation.
//!
//! The U-net variant keeps a single decoder track whose last DecMod/ConvMod
//! carry one channel per tissue (13), ending in a 13-channel map with the
//! same log-sigmoid output activation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::init::{kaiming_conv, kaiming_deconv};
use crate::nn::layer::{BatchNorm, Layer};
use crate::nn::tensor::Scalar;
use crate::volume::TISSUE_COUNT;

use super::graph::{ArchKind, ModuleInfo, NetworkGraph, Node, Src};

/// Network configuration. Defaults match the full-scale architecture:
/// 13 decoder tracks, 6 encoder levels, 256x256 input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForkNetConfig {
    /// Number of decoder tracks (one per tissue).
    pub degree: usize,
    /// Encoder depth.
    pub depth: usize,
    /// Square input extent; must equal `2^(depth+2)`-compatible sizes,
    /// i.e. be divisible by `2^depth`.
    pub extent: usize,
    /// Space the map outputs feed into the loss with.
    pub output_mode: OutputMode,
    /// Weight initialization seed.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    /// Loss consumes the log-sigmoid outputs directly.
    LogSigmoid,
    /// Loss consumes probabilities exp(log-sigmoid).
    Probability,
}

impl OutputMode {
    pub fn name(self) -> &'static str {
        match self {
            OutputMode::LogSigmoid => "log",
            OutputMode::Probability => "prob",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "log" => Ok(OutputMode::LogSigmoid),
            "prob" => Ok(OutputMode::Probability),
            other => Err(Error::Config(format!("unknown output mode {:?}", other))),
        }
    }
}

/// Initial bias of the per-tissue output maps: logit of a ~2% foreground
/// prior.
const MAP_BIAS_PRIOR: f64 = -4.0;

impl Default for ForkNetConfig {
    fn default() -> Self {
        Self {
            degree: TISSUE_COUNT,
            depth: 6,
            extent: 256,
            output_mode: OutputMode::LogSigmoid,
            seed: 0,
        }
    }
}

impl ForkNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::Config("degree must be >= 1".into()));
        }
        if self.depth < 2 {
            return Err(Error::Config("depth must be >= 2".into()));
        }
        if self.extent % (1 << self.depth) != 0 || self.extent == 0 {
            return Err(Error::Config(format!(
                "extent {} not divisible by 2^{}",
                self.extent, self.depth
            )));
        }
        Ok(())
    }

    /// Channel count out of encoder stage i (1-based).
    pub fn encoder_channels(&self, i: usize) -> usize {
        1 << (i + 2)
    }

    /// Channel count out of a decoder stage j (1-based).
    pub fn decoder_channels(&self, j: usize) -> usize {
        1 << (j + 1)
    }
}

struct Builder<T: Scalar> {
    nodes: Vec<Node<T>>,
    modules: Vec<ModuleInfo>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Builder<T> {
    fn new(seed: u64) -> Self {
        Self { nodes: Vec::new(), modules: Vec::new(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn push(&mut self, name: String, layer: Layer<T>, inputs: Vec<Src>) -> usize {
        self.nodes.push(Node { name, layer, inputs });
        self.nodes.len() - 1
    }

    fn conv_bn_relu(&mut self, prefix: &str, src: Src, in_c: usize, out_c: usize) -> usize {
        let conv_layer = Layer::Conv(kaiming_conv(in_c, out_c, &mut self.rng));
        let conv = self.push(format!("{prefix}.conv"), conv_layer, vec![src]);
        let bn = self.push(format!("{prefix}.bn"), Layer::BatchNorm(BatchNorm::new(out_c)), vec![Src::Node(conv)]);
        self.push(format!("{prefix}.relu"), Layer::Relu, vec![Src::Node(bn)])
    }

    fn module(&mut self, name: String, output_node: usize) {
        self.modules.push(ModuleInfo { name, output_node });
    }

    /// Shared encoder; returns the pooled output node of each stage,
    /// index 0 = stage 1.
    fn encoder(&mut self, depth: usize) -> Vec<usize> {
        let mut pooled = Vec::with_capacity(depth);
        let mut src = Src::Input;
        let mut in_c = 1;
        for i in 1..=depth {
            let out_c = 1 << (i + 2);
            let relu = self.conv_bn_relu(&format!("enc{i}"), src, in_c, out_c);
            let pool = self.push(format!("enc{i}.pool"), Layer::MaxPool, vec![Src::Node(relu)]);
            self.module(format!("EncMod{i}"), pool);
            pooled.push(pool);
            src = Src::Node(pool);
            in_c = out_c;
        }
        pooled
    }

    /// DecMod: Deconv -> BN -> ReLU -> Conv, `out_c` channels. The module
    /// ends with the bare convolution; the consumer (a Concat+ConvMod pair,
    /// the next module, or the output activation) supplies what follows.
    fn dec_mod(&mut self, prefix: &str, src: Src, in_c: usize, out_c: usize) -> usize {
        let deconv_layer = Layer::Deconv(kaiming_deconv(in_c, out_c, &mut self.rng));
        let deconv = self.push(format!("{prefix}.deconv"), deconv_layer, vec![src]);
        let bn = self.push(format!("{prefix}.bn"), Layer::BatchNorm(BatchNorm::new(out_c)), vec![Src::Node(deconv)]);
        let relu = self.push(format!("{prefix}.relu"), Layer::Relu, vec![Src::Node(bn)]);
        let conv_layer = Layer::Conv(kaiming_conv(out_c, out_c, &mut self.rng));
        self.push(format!("{prefix}.conv"), conv_layer, vec![Src::Node(relu)])
    }

    /// One decoder track: d_D -> (concat e_{D-1} -> c_{D-1} -> d_{D-1}) -> ...
    /// -> (concat e_1 -> c_1 -> d_1). When `final_channels` is set (the
    /// U-net variant), the level-1 ConvMod and DecMod carry that channel
    /// count instead of the standard widths.
    fn decoder_track(
        &mut self,
        track_label: &str,
        suffix: &str,
        depth: usize,
        pooled: &[usize],
        final_channels: Option<usize>,
    ) -> usize {
        let bottleneck_c = 1 << (depth + 2);
        let mut x = self.dec_mod(
            &format!("dec{depth}{track_label}"),
            Src::Node(pooled[depth - 1]),
            bottleneck_c,
            1 << (depth + 1),
        );
        self.module(format!("DecMod{depth}{suffix}"), x);
        for j in (1..depth).rev() {
            // decoder output of level j+1 has 2^(j+2) channels, the pooled
            // encoder output of level j has 2^(j+2): concat -> 2^(j+3)
            let cat = self.push(
                format!("cat{j}{track_label}"),
                Layer::Concat,
                vec![Src::Node(x), Src::Node(pooled[j - 1])],
            );
            self.module(format!("Concat{j}{suffix}"), cat);
            let cat_c = 1 << (j + 3);
            let (conv_c, dec_c) = match final_channels {
                Some(c) if j == 1 => (c, c),
                _ => (1 << (j + 2), 1 << (j + 1)),
            };
            let cm = self.conv_bn_relu(&format!("cm{j}{track_label}"), Src::Node(cat), cat_c, conv_c);
            self.module(format!("ConvMod{j}{suffix}"), cm);
            x = self.dec_mod(&format!("dec{j}{track_label}"), Src::Node(cm), conv_c, dec_c);
            self.module(format!("DecMod{j}{suffix}"), x);
        }
        x
    }
}

/// Build a ForkNet of the configured degree and depth.
pub fn build_forknet<T: Scalar>(config: &ForkNetConfig) -> Result<NetworkGraph<T>> {
    config.validate()?;
    let mut b = Builder::new(config.seed);
    let pooled = b.encoder(config.depth);
    let shared_end = b.nodes.len();

    let mut outputs = Vec::with_capacity(config.degree);
    let mut track_ranges = Vec::with_capacity(config.degree);
    for n in 1..=config.degree {
        let start = b.nodes.len();
        let d1 = b.decoder_track(&format!(".t{n}"), &format!(",{n}"), config.depth, &pooled, None);
        let mut map_conv_params = kaiming_conv(4, 1, &mut b.rng);
        // start each tissue map near the background base rate instead of
        // 0.5; a single tissue covers a small fraction of the slice and the
        // tracks otherwise spend their first steps re-deriving that
        map_conv_params.bias.data.fill(T::from_f64(MAP_BIAS_PRIOR));
        let map_conv = b.push(format!("map.t{n}.conv"), Layer::Conv(map_conv_params), vec![Src::Node(d1)]);
        let map = b.push(format!("map.t{n}.logsigmoid"), Layer::LogSigmoid, vec![Src::Node(map_conv)]);
        b.module(format!("Map{n}"), map);
        outputs.push(map);
        track_ranges.push((start, b.nodes.len()));
    }

    Ok(NetworkGraph {
        nodes: b.nodes,
        outputs,
        input_shape: [1, config.extent, config.extent],
        modules: b.modules,
        arch: ArchKind::ForkNet,
        shared_end,
        track_ranges,
    })
}

/// Build the single-track U-net baseline with one output channel per tissue
/// (`config.degree` channels).
pub fn build_unet<T: Scalar>(config: &ForkNetConfig) -> Result<NetworkGraph<T>> {
    config.validate()?;
    let mut b = Builder::new(config.seed);
    let pooled = b.encoder(config.depth);
    let shared_end = b.nodes.len();
    let out = b.decoder_track("", "", config.depth, &pooled, Some(config.degree));
    // same foreground-prior start as the ForkNet maps
    if let Layer::Conv(conv) = &mut b.nodes[out].layer {
        conv.bias.data.fill(T::from_f64(MAP_BIAS_PRIOR));
    }
    let sig = b.push("output.logsigmoid".into(), Layer::LogSigmoid, vec![Src::Node(out)]);
    b.module("Output".into(), sig);
    let track_ranges = vec![(shared_end, b.nodes.len())];

    Ok(NetworkGraph {
        nodes: b.nodes,
        outputs: vec![sig],
        input_shape: [1, config.extent, config.extent],
        modules: b.modules,
        arch: ArchKind::UNet,
        shared_end,
        track_ranges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Mode;
    use crate::nn::tensor::Tensor;

    #[test]
    fn invalid_extent_rejected() {
        let config = ForkNetConfig { degree: 2, depth: 4, extent: 60, ..Default::default() };
        assert!(build_forknet::<f32>(&config).is_err());
    }

    #[test]
    fn degree_one_is_a_single_track_unet_shape() {
        // degree 1 ForkNet: shared encoder, one decoder track, one map
        let config = ForkNetConfig { degree: 1, depth: 3, extent: 32, ..Default::default() };
        let fork = build_forknet::<f32>(&config).unwrap();
        let unet = build_unet::<f32>(&config).unwrap();
        assert_eq!(fork.outputs.len(), 1);
        assert_eq!(unet.outputs.len(), 1);
        let fork_shapes = fork.infer_shapes(1).unwrap();
        let unet_shapes = unet.infer_shapes(1).unwrap();
        // both end in a single 32x32 map
        assert_eq!(fork_shapes[fork.outputs[0]], vec![1, 1, 32, 32]);
        assert_eq!(unet_shapes[unet.outputs[0]], vec![1, 1, 32, 32]);
        // shared encoder sections agree module for module
        for (fm, um) in fork.modules.iter().zip(&unet.modules) {
            if fm.name.starts_with("EncMod") {
                assert_eq!(fm.name, um.name);
                assert_eq!(fork_shapes[fm.output_node], unet_shapes[um.output_node]);
            }
        }
    }

    #[test]
    fn forward_shapes_match_inference() {
        let config = ForkNetConfig { degree: 2, depth: 3, extent: 32, seed: 1, ..Default::default() };
        let mut net = build_forknet::<f32>(&config).unwrap();
        let shapes = net.infer_shapes(1).unwrap();
        let input = Tensor::zeros(&[1, 1, 32, 32]);
        let tape = net.forward(&input, Mode::Infer).unwrap();
        for (i, out) in tape.node_outputs.iter().enumerate() {
            assert_eq!(out.shape, shapes[i], "node {} ({})", i, net.nodes[i].name);
        }
    }

    #[test]
    fn unet_output_channels() {
        let config = ForkNetConfig { degree: 13, depth: 3, extent: 32, ..Default::default() };
        let net = build_unet::<f32>(&config).unwrap();
        let shapes = net.infer_shapes(1).unwrap();
        assert_eq!(shapes[net.outputs[0]], vec![1, 13, 32, 32]);
    }
}
