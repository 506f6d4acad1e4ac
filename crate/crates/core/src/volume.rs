//! Volumetric data types, raw-volume file I/O, intensity normalization,
//! slice extraction/assembly, and synthetic phantom generation.
//!
//! Volumes are stored x-fastest (index `x + nx*(y + ny*z)`) with millimeter
//! voxel spacing. The on-disk format is a raw little-endian payload next to a
//! UTF-8 `key=value` sidecar header (`<path>.hdr`) declaring `dims`, `spacing`,
//! `kind` and `order`.
//!
//! Axis convention: x is the sagittal index, y the coronal index, z the axial
//! index. An axial slice fixes z, a sagittal slice fixes x, a coronal slice
//! fixes y.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kv::KvBlock;

/// Number of distinct tissue classes (label IDs 1..=13); 0 is background/air.
pub const TISSUE_COUNT: usize = 13;

/// Slicing directions through a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Fixed z; in-plane (x, y).
    Axial,
    /// Fixed x; in-plane (y, z).
    Sagittal,
    /// Fixed y; in-plane (x, z).
    Coronal,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Axial, Axis::Sagittal, Axis::Coronal];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Axial => "axial",
            Axis::Sagittal => "sagittal",
            Axis::Coronal => "coronal",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "axial" => Ok(Axis::Axial),
            "sagittal" => Ok(Axis::Sagittal),
            "coronal" => Ok(Axis::Coronal),
            other => Err(Error::Config(format!("unknown axis {:?}", other))),
        }
    }
}

/// Dense 3D scalar voxel grid (f32 payload) with spacing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub data: Vec<f32>,
}

/// Dense 3D tissue-ID grid; IDs are 0 (background/air) or 1..=13.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub data: Vec<u8>,
}

fn check_dims(dims: [usize; 3], spacing: [f64; 3], len: usize) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::DimsTooSmall(format!("dims {:?} must be >= 1", dims)));
    }
    if spacing.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Header(format!("spacing {:?} must be > 0", spacing)));
    }
    let n = dims[0] * dims[1] * dims[2];
    if len != n {
        return Err(Error::SizeMismatch(format!(
            "data length {} does not match dims {:?} ({} voxels)",
            len, dims, n
        )));
    }
    Ok(())
}

impl ScalarVolume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<f32>) -> Result<Self> {
        check_dims(dims, spacing, data.len())?;
        Ok(Self { dims, spacing, data })
    }

    pub fn zeros(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        Self { dims, spacing, data: vec![0.0; dims[0] * dims[1] * dims[2]] }
    }

    pub fn voxel_count(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.idx(x, y, z)]
    }
}

impl LabelVolume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<u8>) -> Result<Self> {
        check_dims(dims, spacing, data.len())?;
        if let Some(&bad) = data.iter().find(|&&v| v as usize > TISSUE_COUNT) {
            return Err(Error::UnmappedLabel(bad));
        }
        Ok(Self { dims, spacing, data })
    }

    pub fn zeros(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        Self { dims, spacing, data: vec![0; dims[0] * dims[1] * dims[2]] }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.idx(x, y, z)]
    }

    /// Voxel count per label ID, indexed 0..=13.
    pub fn label_counts(&self) -> [usize; TISSUE_COUNT + 1] {
        let mut counts = [0usize; TISSUE_COUNT + 1];
        for &v in &self.data {
            counts[v as usize] += 1;
        }
        counts
    }

    /// Binary mask for one tissue ID.
    pub fn mask(&self, label: u8) -> Vec<bool> {
        self.data.iter().map(|&v| v == label).collect()
    }
}

/// Either volume kind, as read back from disk.
#[derive(Debug, Clone)]
pub enum Volume {
    Scalar(ScalarVolume),
    Label(LabelVolume),
}

impl Volume {
    pub fn dims(&self) -> [usize; 3] {
        match self {
            Volume::Scalar(v) => v.dims,
            Volume::Label(v) => v.dims,
        }
    }

    pub fn into_scalar(self) -> Result<ScalarVolume> {
        match self {
            Volume::Scalar(v) => Ok(v),
            Volume::Label(_) => Err(Error::UnknownElementKind("expected scalar, found label".into())),
        }
    }

    pub fn into_label(self) -> Result<LabelVolume> {
        match self {
            Volume::Label(v) => Ok(v),
            Volume::Scalar(_) => Err(Error::UnknownElementKind("expected label, found scalar".into())),
        }
    }
}

/// A 2D slice through a volume. `data` is row-major, index `u + width * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2D<T> {
    pub axis: Axis,
    pub index: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Slice2D<T> {
    #[inline]
    pub fn at(&self, u: usize, v: usize) -> T {
        self.data[u + self.width * v]
    }
}

/// Sidecar header path for a data file: `<path>.hdr`.
pub fn header_path(data_path: &Path) -> PathBuf {
    let mut os = data_path.as_os_str().to_os_string();
    os.push(".hdr");
    PathBuf::from(os)
}

#[derive(Debug, Clone)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub kind: ElementKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Scalar,
    Label,
}

impl VolumeHeader {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KvBlock::parse(text)?;
        let dims = kv.parse_triple::<usize>("dims")?;
        let spacing = kv.parse_triple::<f64>("spacing")?;
        let kind = match kv.require("kind")? {
            "scalar" => ElementKind::Scalar,
            "label" => ElementKind::Label,
            other => return Err(Error::UnknownElementKind(other.to_string())),
        };
        let order = kv.require("order")?;
        if order != "little-endian,x-fastest" {
            return Err(Error::Header(format!("unsupported order {:?}", order)));
        }
        Ok(Self { dims, spacing, kind })
    }

    pub fn render(&self) -> String {
        format!(
            "dims={},{},{}\nspacing={},{},{}\nkind={}\norder=little-endian,x-fastest\n",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.spacing[0],
            self.spacing[1],
            self.spacing[2],
            match self.kind {
                ElementKind::Scalar => "scalar",
                ElementKind::Label => "label",
            }
        )
    }
}

/// Load a volume from a raw payload plus an explicit sidecar header path.
pub fn load_volume_with_header(data_path: &Path, header_path: &Path) -> Result<Volume> {
    let header_text = std::fs::read_to_string(header_path)?;
    let header = VolumeHeader::parse(&header_text)?;
    let n = header.dims[0] * header.dims[1] * header.dims[2];

    let mut file = std::fs::File::open(data_path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;

    match header.kind {
        ElementKind::Scalar => {
            if bytes.len() != 4 * n {
                return Err(Error::SizeMismatch(format!(
                    "scalar payload {} bytes, expected {} for dims {:?}",
                    bytes.len(),
                    4 * n,
                    header.dims
                )));
            }
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(Volume::Scalar(ScalarVolume::new(header.dims, header.spacing, data)?))
        }
        ElementKind::Label => {
            if bytes.len() != n {
                return Err(Error::SizeMismatch(format!(
                    "label payload {} bytes, expected {} for dims {:?}",
                    bytes.len(),
                    n,
                    header.dims
                )));
            }
            Ok(Volume::Label(LabelVolume::new(header.dims, header.spacing, bytes)?))
        }
    }
}

/// Load a volume using the `<path>.hdr` sidecar convention.
pub fn load_volume(data_path: &Path) -> Result<Volume> {
    load_volume_with_header(data_path, &header_path(data_path))
}

pub fn save_scalar(volume: &ScalarVolume, data_path: &Path) -> Result<()> {
    let header = VolumeHeader {
        dims: volume.dims,
        spacing: volume.spacing,
        kind: ElementKind::Scalar,
    };
    std::fs::write(header_path(data_path), header.render())?;
    let mut file = std::fs::File::create(data_path)?;
    let mut bytes = Vec::with_capacity(volume.data.len() * 4);
    for &v in &volume.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&bytes)?;
    Ok(())
}

pub fn save_label(volume: &LabelVolume, data_path: &Path) -> Result<()> {
    let header = VolumeHeader {
        dims: volume.dims,
        spacing: volume.spacing,
        kind: ElementKind::Label,
    };
    std::fs::write(header_path(data_path), header.render())?;
    std::fs::write(data_path, &volume.data)?;
    Ok(())
}

/// Normalize MRI intensities: z-score to zero mean / unit variance, then
/// affine-map onto [0, 1]. The composition is equivalent to min-max scaling,
/// which makes the output invariant under positive affine transforms of the
/// input. Constant volumes are rejected.
pub fn normalize_mri(volume: &ScalarVolume) -> Result<ScalarVolume> {
    let n = volume.data.len() as f64;
    let mean = volume.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = volume
        .data
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    if var == 0.0 {
        return Err(Error::ConstantVolume);
    }
    let std = var.sqrt();
    let z: Vec<f64> = volume.data.iter().map(|&v| (v as f64 - mean) / std).collect();
    let zmin = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = zmax - zmin;
    let data = z.iter().map(|&v| (((v - zmin) / range) as f32).clamp(0.0, 1.0)).collect();
    ScalarVolume::new(volume.dims, volume.spacing, data)
}

/// In-plane extent (width, height) of slices along an axis.
pub fn slice_shape(dims: [usize; 3], axis: Axis) -> (usize, usize) {
    match axis {
        Axis::Axial => (dims[0], dims[1]),
        Axis::Sagittal => (dims[1], dims[2]),
        Axis::Coronal => (dims[0], dims[2]),
    }
}

/// Number of slices along an axis.
pub fn slice_count(dims: [usize; 3], axis: Axis) -> usize {
    match axis {
        Axis::Axial => dims[2],
        Axis::Sagittal => dims[0],
        Axis::Coronal => dims[1],
    }
}

#[inline]
fn slice_source_index(dims: [usize; 3], axis: Axis, k: usize, u: usize, v: usize) -> usize {
    let (x, y, z) = match axis {
        Axis::Axial => (u, v, k),
        Axis::Sagittal => (k, u, v),
        Axis::Coronal => (u, k, v),
    };
    x + dims[0] * (y + dims[1] * z)
}

fn check_slice_index(dims: [usize; 3], axis: Axis, k: usize) -> Result<()> {
    let count = slice_count(dims, axis);
    if k >= count {
        return Err(Error::IndexOutOfRange(format!(
            "slice {} along {} axis, volume has {}",
            k,
            axis.name(),
            count
        )));
    }
    Ok(())
}

fn extract_generic<T: Copy>(data: &[T], dims: [usize; 3], axis: Axis, k: usize) -> Result<Slice2D<T>> {
    check_slice_index(dims, axis, k)?;
    let (width, height) = slice_shape(dims, axis);
    let mut out = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            out.push(data[slice_source_index(dims, axis, k, u, v)]);
        }
    }
    Ok(Slice2D { axis, index: k, width, height, data: out })
}

pub fn extract_slice(volume: &ScalarVolume, axis: Axis, k: usize) -> Result<Slice2D<f32>> {
    extract_generic(&volume.data, volume.dims, axis, k)
}

pub fn extract_label_slice(volume: &LabelVolume, axis: Axis, k: usize) -> Result<Slice2D<u8>> {
    extract_generic(&volume.data, volume.dims, axis, k)
}

/// Assemble one labeled slice per index along `axis` into a LabelVolume.
/// The slice set must be complete (one slice per index) and uniform in shape.
pub fn assemble_labels(
    slices: &[Slice2D<u8>],
    axis: Axis,
    dims: [usize; 3],
    spacing: [f64; 3],
) -> Result<LabelVolume> {
    let count = slice_count(dims, axis);
    if slices.len() != count {
        return Err(Error::RaggedSlices(format!(
            "{} slices supplied, {} needed along {} axis",
            slices.len(),
            count,
            axis.name()
        )));
    }
    let (width, height) = slice_shape(dims, axis);
    let mut seen = vec![false; count];
    let mut out = LabelVolume::zeros(dims, spacing);
    for slice in slices {
        if slice.axis != axis {
            return Err(Error::RaggedSlices(format!(
                "slice {} has axis {}, expected {}",
                slice.index,
                slice.axis.name(),
                axis.name()
            )));
        }
        if slice.width != width || slice.height != height {
            return Err(Error::RaggedSlices(format!(
                "slice {} is {}x{}, expected {}x{}",
                slice.index, slice.width, slice.height, width, height
            )));
        }
        check_slice_index(dims, axis, slice.index)?;
        if seen[slice.index] {
            return Err(Error::RaggedSlices(format!("duplicate slice index {}", slice.index)));
        }
        seen[slice.index] = true;
        for v in 0..height {
            for u in 0..width {
                out.data[slice_source_index(dims, axis, slice.index, u, v)] = slice.at(u, v);
            }
        }
    }
    Ok(out)
}

/// Phantom geometry and intensity parameters.
#[derive(Debug, Clone)]
pub struct PhantomConfig {
    /// Standard deviation of the additive Gaussian intensity noise.
    pub noise_level: f64,
    /// Relative jitter applied to the ellipsoid center and semi-axes, drawn
    /// per volume so that corpus members differ.
    pub jitter: f64,
    /// Fraction of the half-extent used by the outermost shell.
    pub margin: f64,
    /// Exponent on the shell radius fractions. 1 spaces shell radii evenly
    /// (inner shells get few voxels); smaller values thicken the inner
    /// shells at the cost of the outer ones.
    pub shell_power: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self { noise_level: 0.005, jitter: 0.05, margin: 0.92, shell_power: 0.75 }
    }
}

/// Mean intensity assigned to a tissue ID: equally spaced in [0.1, 0.9].
/// Background (ID 0) maps to 0.
pub fn phantom_tissue_intensity(label: u8) -> f64 {
    if label == 0 {
        0.0
    } else {
        0.1 + 0.8 * f64::from(label - 1) / (TISSUE_COUNT as f64 - 1.0)
    }
}

/// Generate a synthetic head phantom: 13 concentric ellipsoidal shells
/// (label 1 outermost, label 13 the core) inside background air, plus an MRI
/// intensity volume with one mean per tissue and additive Gaussian noise,
/// normalized onto [0, 1].
///
/// Deterministic for a fixed seed.
pub fn generate_phantom(
    seed: u64,
    dims: [usize; 3],
    config: &PhantomConfig,
) -> Result<(ScalarVolume, LabelVolume)> {
    if dims.iter().any(|&d| d < 32) {
        return Err(Error::DimsTooSmall(format!(
            "dims {:?}: need >= 32 per axis to fit {} shells",
            dims, TISSUE_COUNT
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = [1.0, 1.0, 1.0];

    let half = [dims[0] as f64 / 2.0, dims[1] as f64 / 2.0, dims[2] as f64 / 2.0];
    let jitter = config.jitter;
    let center: Vec<f64> = (0..3)
        .map(|a| half[a] - 0.5 + rng.gen_range(-jitter..=jitter) * half[a] * 0.5)
        .collect();
    let semi_axes: Vec<f64> = (0..3)
        .map(|a| half[a] * config.margin * (1.0 + rng.gen_range(-jitter..=jitter)))
        .collect();

    // Shell thresholds: label t occupies normalized radius
    // (f(t+1), f(t)] with f(t) = ((14-t)/13)^shell_power, so f(1) = 1 and
    // f(14) = 0 and every label is a closed shell around the next.
    let power = config.shell_power;
    let threshold =
        |t: usize| ((TISSUE_COUNT + 1 - t) as f64 / TISSUE_COUNT as f64).powf(power);
    let mut labels = LabelVolume::zeros(dims, spacing);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let dx = (x as f64 - center[0]) / semi_axes[0];
                let dy = (y as f64 - center[1]) / semi_axes[1];
                let dz = (z as f64 - center[2]) / semi_axes[2];
                let rho = (dx * dx + dy * dy + dz * dz).sqrt();
                let idx = labels.idx(x, y, z);
                if rho <= 1.0 {
                    let mut t = 1;
                    while t < TISSUE_COUNT && rho <= threshold(t + 1) {
                        t += 1;
                    }
                    labels.data[idx] = t as u8;
                }
            }
        }
    }

    let noise = Normal::new(0.0, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut intensity = ScalarVolume::zeros(dims, spacing);
    for i in 0..intensity.data.len() {
        let mean = phantom_tissue_intensity(labels.data[i]);
        let n = if config.noise_level > 0.0 {
            noise.sample(&mut rng) * config.noise_level
        } else {
            0.0
        };
        intensity.data[i] = (mean + n) as f32;
    }
    let normalized = normalize_mri(&intensity)?;
    Ok((normalized, labels))
}
