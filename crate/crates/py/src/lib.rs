//! Python bindings: the main volume types and pipeline operations.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use headfield::coil::{build_figure_eight, vector_potential, CoilParams, CoilPose, GridGeometry};
use headfield::forknet::{
    build_forknet, load_checkpoint, segment_volume, structure_report, ForkNetConfig,
};
use headfield::fusion::{fuse_views, FusionConfig, ViewTriple};
use headfield::metrics;
use headfield::solver::{assign_conductivity, electric_field, solve_potential, ConductivityTable};
use headfield::volume as vol;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Dense scalar voxel grid with millimeter spacing.
#[pyclass]
#[derive(Clone)]
struct ScalarVolume {
    inner: vol::ScalarVolume,
}

#[pymethods]
impl ScalarVolume {
    #[new]
    fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<f32>) -> PyResult<Self> {
        Ok(Self { inner: vol::ScalarVolume::new(dims, spacing, data).map_err(err)? })
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.inner.dims
    }

    #[getter]
    fn spacing(&self) -> [f64; 3] {
        self.inner.spacing
    }

    fn data(&self) -> Vec<f32> {
        self.inner.data.clone()
    }

    fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.inner.at(x, y, z)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        vol::save_scalar(&self.inner, std::path::Path::new(path)).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let v = vol::load_volume(std::path::Path::new(path)).map_err(err)?;
        Ok(Self { inner: v.into_scalar().map_err(err)? })
    }
}

/// Dense tissue-ID voxel grid (0 = background/air, 1..=13 tissues).
#[pyclass]
#[derive(Clone)]
struct LabelVolume {
    inner: vol::LabelVolume,
}

#[pymethods]
impl LabelVolume {
    #[new]
    fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<u8>) -> PyResult<Self> {
        Ok(Self { inner: vol::LabelVolume::new(dims, spacing, data).map_err(err)? })
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.inner.dims
    }

    fn data(&self) -> Vec<u8> {
        self.inner.data.clone()
    }

    fn label_counts(&self) -> Vec<usize> {
        self.inner.label_counts().to_vec()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        vol::save_label(&self.inner, std::path::Path::new(path)).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let v = vol::load_volume(std::path::Path::new(path)).map_err(err)?;
        Ok(Self { inner: v.into_label().map_err(err)? })
    }
}

/// Generate a synthetic 13-shell head phantom; returns (mri, labels).
#[pyfunction]
#[pyo3(signature = (seed, dims, noise_level=0.01))]
fn generate_phantom(seed: u64, dims: [usize; 3], noise_level: f64) -> PyResult<(ScalarVolume, LabelVolume)> {
    let config = vol::PhantomConfig { noise_level, ..Default::default() };
    let (mri, labels) = vol::generate_phantom(seed, dims, &config).map_err(err)?;
    Ok((ScalarVolume { inner: mri }, LabelVolume { inner: labels }))
}

/// Zero-mean/unit-variance normalization followed by scaling onto [0, 1].
#[pyfunction]
fn normalize_mri(volume: &ScalarVolume) -> PyResult<ScalarVolume> {
    Ok(ScalarVolume { inner: vol::normalize_mri(&volume.inner).map_err(err)? })
}

/// Majority-vote fusion of the axial/sagittal/coronal label volumes.
/// Returns (fused, stats dict with pct_all_three / pct_two / pct_fuzzy).
#[pyfunction]
#[pyo3(signature = (axial, sagittal, coronal, window=3))]
fn fuse(
    py: Python<'_>,
    axial: &LabelVolume,
    sagittal: &LabelVolume,
    coronal: &LabelVolume,
    window: usize,
) -> PyResult<(LabelVolume, PyObject)> {
    let triple = ViewTriple::new(&axial.inner, &sagittal.inner, &coronal.inner).map_err(err)?;
    let config = FusionConfig { window, ..Default::default() };
    let (fused, stats) = fuse_views(&triple, &config).map_err(err)?;
    let dict = pyo3::types::PyDict::new_bound(py);
    dict.set_item("pct_all_three", stats.pct_all_three)?;
    dict.set_item("pct_two", stats.pct_two)?;
    dict.set_item("pct_fuzzy", stats.pct_fuzzy)?;
    Ok((LabelVolume { inner: fused }, dict.into()))
}

/// Dice coefficient (%) between one tissue's masks in two label volumes.
#[pyfunction]
fn dice(a: &LabelVolume, b: &LabelVolume, label: u8) -> PyResult<f64> {
    metrics::dice(&a.inner.mask(label), &b.inner.mask(label)).map_err(err)
}

/// Directed Hausdorff distance (mm) from one tissue's mask in `a` to its
/// mask in `b`.
#[pyfunction]
fn hausdorff(a: &LabelVolume, b: &LabelVolume, label: u8) -> PyResult<f64> {
    if a.inner.dims != b.inner.dims {
        return Err(PyValueError::new_err("volumes must share dims"));
    }
    metrics::hausdorff_directed(&a.inner.mask(label), &b.inner.mask(label), a.inner.dims, a.inner.spacing)
        .map_err(err)
}

/// Segment a volume along an axis ("axial" | "sagittal" | "coronal") with a
/// trained checkpoint.
#[pyfunction]
#[pyo3(signature = (checkpoint, volume, axis, background_threshold=0.5))]
fn segment(
    checkpoint: &str,
    volume: &ScalarVolume,
    axis: &str,
    background_threshold: Option<f32>,
) -> PyResult<LabelVolume> {
    let axis = vol::Axis::from_name(axis).map_err(err)?;
    let (mut net, _) = load_checkpoint::<f32>(std::path::Path::new(checkpoint)).map_err(err)?;
    let labels = segment_volume(&mut net, &volume.inner, axis, background_threshold).map_err(err)?;
    Ok(LabelVolume { inner: labels })
}

/// Quasi-static TMS solve over a label volume with the default figure-eight
/// coil placed above the grid; returns |E| as a ScalarVolume.
#[pyfunction]
#[pyo3(signature = (labels, tol=1e-8, coil_height_mm=10.0))]
fn solve_tms_field(labels: &LabelVolume, tol: f64, coil_height_mm: f64) -> PyResult<ScalarVolume> {
    let volume = &labels.inner;
    let pose = CoilPose {
        center: [
            volume.dims[0] as f64 * volume.spacing[0] * 0.5e-3,
            volume.dims[1] as f64 * volume.spacing[1] * 0.5e-3,
            volume.dims[2] as f64 * volume.spacing[2] * 1e-3 + coil_height_mm * 1e-3,
        ],
        normal: [0.0, 0.0, 1.0],
        handle: [1.0, 0.0, 0.0],
    };
    let params = CoilParams { segments: 64, turns: 2, ..Default::default() };
    let coil = build_figure_eight(&pose, &params).map_err(err)?;
    let grid = GridGeometry::from_spacing_mm(volume.dims, volume.spacing, [0.0; 3]);
    let a0 = vector_potential(&coil, &grid).map_err(err)?;
    let sigma = assign_conductivity(volume, &ConductivityTable::default()).map_err(err)?;
    let max_iter = headfield::solver::default_max_iterations(sigma.sigma.len());
    let psi = solve_potential(&sigma, &a0, tol, max_iter).map_err(err)?;
    let (_, magnitude) = electric_field(&psi, &a0, coil.omega()).map_err(err)?;
    let data: Vec<f32> = magnitude.iter().map(|&v| v as f32).collect();
    Ok(ScalarVolume {
        inner: vol::ScalarVolume::new(volume.dims, volume.spacing, data).map_err(err)?,
    })
}

/// Module output shapes of a freshly built network, for structural checks:
/// list of (module name, [channels, height, width]).
#[pyfunction]
#[pyo3(signature = (degree=13, depth=6, extent=256))]
fn forknet_module_shapes(degree: usize, depth: usize, extent: usize) -> PyResult<Vec<(String, [usize; 3])>> {
    let config = ForkNetConfig { degree, depth, extent, ..Default::default() };
    let net = build_forknet::<f32>(&config).map_err(err)?;
    let report = structure_report(&net).map_err(err)?;
    Ok(report.modules.into_iter().map(|m| (m.name, m.shape)).collect())
}

#[pymodule]
fn headfield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ScalarVolume>()?;
    m.add_class::<LabelVolume>()?;
    m.add_function(wrap_pyfunction!(generate_phantom, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_mri, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(hausdorff, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tms_field, m)?)?;
    m.add_function(wrap_pyfunction!(forknet_module_shapes, m)?)?;
    Ok(())
}
