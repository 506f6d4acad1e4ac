//! Checkpoint format: a UTF-8 manifest (network config followed by one line
//! per tensor entry, layer by layer) terminated by an `end` line, then the
//! contiguous little-endian f32 payload in manifest order. Entries cover
//! trainable parameters and batch-norm running statistics.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

use super::build::{build_forknet, build_unet, ForkNetConfig, OutputMode};
use super::graph::{ArchKind, NetworkGraph};

const MAGIC: &str = "headfield-checkpoint v1";

fn manifest_entries<T: Scalar>(net: &NetworkGraph<T>) -> Vec<(String, String, Vec<usize>)> {
    let mut entries = Vec::new();
    for node in &net.nodes {
        let names = [node.layer.param_names(), node.layer.state_names()].concat();
        let tensors = [node.layer.params(), node.layer.state()].concat();
        for (name, tensor) in names.iter().zip(tensors) {
            entries.push((node.name.clone(), format!("{}.{}", node.name, name), tensor.shape.clone()));
        }
    }
    entries
}

fn all_tensors<T: Scalar>(net: &NetworkGraph<T>) -> Vec<&Tensor<T>> {
    net.nodes
        .iter()
        .flat_map(|n| [n.layer.params(), n.layer.state()].concat())
        .collect()
}

fn all_tensors_mut<T: Scalar>(net: &mut NetworkGraph<T>) -> Vec<&mut Tensor<T>> {
    net.nodes.iter_mut().flat_map(|n| n.layer.params_and_state_mut()).collect()
}

pub fn save_checkpoint<T: Scalar>(net: &NetworkGraph<T>, config: &ForkNetConfig, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    header.push_str(&format!(
        "arch={}\ndegree={}\ndepth={}\nextent={}\nmode={}\n",
        match net.arch {
            ArchKind::ForkNet => "forknet",
            ArchKind::UNet => "unet",
        },
        config.degree,
        config.depth,
        config.extent,
        config.output_mode.name(),
    ));
    for (node, entry, shape) in manifest_entries(net) {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        header.push_str(&format!("tensor={} node={} shape={}\n", entry, node, dims.join(",")));
    }
    header.push_str("end\n");
    file.write_all(header.as_bytes())?;

    let mut payload = Vec::new();
    for tensor in all_tensors(net) {
        for &v in &tensor.data {
            payload.extend_from_slice(&(v.into_f64() as f32).to_le_bytes());
        }
    }
    file.write_all(&payload)?;
    Ok(())
}

/// Reads the config lines of a checkpoint and rebuilds the matching
/// freshly-initialized network, then overwrites every tensor from the
/// payload.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(NetworkGraph<T>, ForkNetConfig)> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);

    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {:?}", line.trim_end())));
    }

    let mut kv = std::collections::BTreeMap::new();
    let mut manifest: Vec<(String, Vec<usize>)> = Vec::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Checkpoint("unexpected end of header".into()));
        }
        let line = line.trim_end();
        if line == "end" {
            break;
        }
        if let Some(rest) = line.strip_prefix("tensor=") {
            let mut entry = None;
            let mut shape = None;
            for field in rest.split_whitespace() {
                if let Some(s) = field.strip_prefix("shape=") {
                    let dims: std::result::Result<Vec<usize>, _> = s.split(',').map(str::parse).collect();
                    shape = Some(dims.map_err(|_| Error::Checkpoint(format!("bad shape {:?}", s)))?);
                } else if entry.is_none() {
                    entry = Some(field.to_string());
                }
            }
            match (entry, shape) {
                (Some(e), Some(s)) => manifest.push((e, s)),
                _ => return Err(Error::Checkpoint(format!("bad tensor line {:?}", line))),
            }
        } else if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.to_string(), v.to_string());
        } else {
            return Err(Error::Checkpoint(format!("bad header line {:?}", line)));
        }
    }

    let get = |key: &str| -> Result<&String> {
        kv.get(key).ok_or_else(|| Error::Checkpoint(format!("missing header key {:?}", key)))
    };
    let config = ForkNetConfig {
        degree: get("degree")?.parse().map_err(|_| Error::Checkpoint("bad degree".into()))?,
        depth: get("depth")?.parse().map_err(|_| Error::Checkpoint("bad depth".into()))?,
        extent: get("extent")?.parse().map_err(|_| Error::Checkpoint("bad extent".into()))?,
        output_mode: OutputMode::from_name(get("mode")?)?,
        seed: 0,
    };
    let mut net: NetworkGraph<T> = match get("arch")?.as_str() {
        "forknet" => build_forknet(&config)?,
        "unet" => build_unet(&config)?,
        other => return Err(Error::Checkpoint(format!("unknown arch {:?}", other))),
    };

    // validate manifest against the rebuilt graph
    let expected = manifest_entries(&net);
    if expected.len() != manifest.len() {
        return Err(Error::Checkpoint(format!(
            "manifest has {} entries, architecture needs {}",
            manifest.len(),
            expected.len()
        )));
    }
    for ((_, name, shape), (entry, dims)) in expected.iter().zip(&manifest) {
        if name != entry || shape != dims {
            return Err(Error::Checkpoint(format!(
                "manifest entry {:?} {:?} does not match architecture entry {:?} {:?}",
                entry, dims, name, shape
            )));
        }
    }

    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let total: usize = manifest.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if payload.len() != 4 * total {
        return Err(Error::Checkpoint(format!(
            "payload {} bytes, manifest needs {}",
            payload.len(),
            4 * total
        )));
    }

    let mut offset = 0;
    for tensor in all_tensors_mut(&mut net) {
        for v in tensor.data.iter_mut() {
            let bytes = [
                payload[offset],
                payload[offset + 1],
                payload[offset + 2],
                payload[offset + 3],
            ];
            *v = T::from_f64(f64::from(f32::from_le_bytes(bytes)));
            offset += 4;
        }
    }
    Ok((net, config))
}
