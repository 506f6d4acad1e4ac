//! Slice-level inference: map an MRI slice to per-tissue probability maps
//! and reduce them to a labeled slice by per-pixel argmax.

use crate::error::{Error, Result};
use crate::nn::layer::Mode;
use crate::nn::tensor::{Scalar, Tensor};
use crate::volume::{Axis, LabelVolume, ScalarVolume, Slice2D};

use super::graph::{ArchKind, NetworkGraph};

/// Run the network over one slice; returns one probability map per tissue
/// track, values in [0, 1]. Batch-norm runs on its frozen running stats.
pub fn segment_slice<T: Scalar>(net: &mut NetworkGraph<T>, slice: &Slice2D<f32>) -> Result<Vec<Slice2D<f32>>> {
    let [c, h, w] = net.input_shape;
    if c != 1 || slice.height != h || slice.width != w {
        return Err(Error::ShapeMismatch(format!(
            "slice {}x{} does not match network input {}x{}",
            slice.width, slice.height, w, h
        )));
    }
    let input = Tensor::from_vec(
        &[1, 1, h, w],
        slice.data.iter().map(|&v| T::from_f64(f64::from(v))).collect(),
    )?;
    let tape = net.forward(&input, Mode::Infer)?;

    let mut maps = Vec::new();
    match net.arch {
        ArchKind::ForkNet => {
            for track in 0..net.outputs.len() {
                let out = tape.output(net, track);
                maps.push(Slice2D {
                    axis: slice.axis,
                    index: slice.index,
                    width: w,
                    height: h,
                    data: out.data.iter().map(|&v| v.into_f64().exp() as f32).collect(),
                });
            }
        }
        ArchKind::UNet => {
            // single output node carrying one channel per tissue
            let out = tape.output(net, 0);
            let channels = out.shape[1];
            let plane = h * w;
            for ch in 0..channels {
                maps.push(Slice2D {
                    axis: slice.axis,
                    index: slice.index,
                    width: w,
                    height: h,
                    data: out.data[ch * plane..(ch + 1) * plane]
                        .iter()
                        .map(|&v| v.into_f64().exp() as f32)
                        .collect(),
                });
            }
        }
    }
    Ok(maps)
}

/// Per-pixel argmax over the per-tissue maps; the winning map index n
/// (1-based) becomes the tissue label. Ties break to the lowest index.
///
/// With `background_threshold` set, pixels whose best map value stays below
/// the threshold are labeled 0 (background). Without it every pixel gets a
/// tissue label.
pub fn argmax_labels(maps: &[Slice2D<f32>], background_threshold: Option<f32>) -> Result<Slice2D<u8>> {
    let Some(first) = maps.first() else {
        return Err(Error::EmptyMapSet);
    };
    for m in maps {
        if m.width != first.width || m.height != first.height {
            return Err(Error::ShapeMismatch(format!(
                "map {}x{} vs {}x{}",
                m.width, m.height, first.width, first.height
            )));
        }
    }
    let mut data = vec![0u8; first.data.len()];
    for i in 0..data.len() {
        let mut best = maps[0].data[i];
        let mut best_n = 1usize;
        for (n, m) in maps.iter().enumerate().skip(1) {
            if m.data[i] > best {
                best = m.data[i];
                best_n = n + 1;
            }
        }
        data[i] = match background_threshold {
            Some(theta) if best < theta => 0,
            _ => best_n as u8,
        };
    }
    Ok(Slice2D {
        axis: first.axis,
        index: first.index,
        width: first.width,
        height: first.height,
        data,
    })
}

/// Segment every slice of a volume along one axis and reassemble the labeled
/// slices into a LabelVolume.
pub fn segment_volume<T: Scalar>(
    net: &mut NetworkGraph<T>,
    volume: &ScalarVolume,
    axis: Axis,
    background_threshold: Option<f32>,
) -> Result<LabelVolume> {
    let count = crate::volume::slice_count(volume.dims, axis);
    let mut labeled = Vec::with_capacity(count);
    for k in 0..count {
        let slice = crate::volume::extract_slice(volume, axis, k)?;
        let maps = segment_slice(net, &slice)?;
        labeled.push(argmax_labels(&maps, background_threshold)?);
    }
    crate::volume::assemble_labels(&labeled, axis, volume.dims, volume.spacing)
}
