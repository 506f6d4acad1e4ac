//! Structural walker: reports every architecture module's output shape (and
//! layer counts) so tests can hold the graph against the closed-form size
//! algebra exactly.

use crate::error::Result;
use crate::nn::tensor::Scalar;

use super::graph::NetworkGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleShape {
    pub name: String,
    /// (channels, height, width) of the module output for batch 1.
    pub shape: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct StructureReport {
    pub modules: Vec<ModuleShape>,
    /// Count of architecture modules (encoder/decoder/conv/concat/map
    /// entries).
    pub module_count: usize,
    /// Count of primitive layers (every conv, BN, ReLU, pool, deconv,
    /// concat, activation node).
    pub primitive_count: usize,
    pub parameter_count: usize,
}

impl StructureReport {
    pub fn shape_of(&self, name: &str) -> Option<[usize; 3]> {
        self.modules.iter().find(|m| m.name == name).map(|m| m.shape)
    }
}

/// Walk the graph, inferring shapes without evaluation.
pub fn structure_report<T: Scalar>(net: &NetworkGraph<T>) -> Result<StructureReport> {
    let shapes = net.infer_shapes(1)?;
    let modules = net
        .modules
        .iter()
        .map(|m| {
            let s = &shapes[m.output_node];
            ModuleShape { name: m.name.clone(), shape: [s[1], s[2], s[3]] }
        })
        .collect::<Vec<_>>();
    Ok(StructureReport {
        module_count: modules.len(),
        primitive_count: net.nodes.len(),
        parameter_count: net.parameter_count(),
        modules,
    })
}
