//! Quasi-static scalar-potential solve on a voxel conductivity grid, and the
//! induced electric field derived from it.
//!
//! The induced field splits as E = -grad(phi) - j*omega*A0. With real
//! conductivity and a real vector potential, factoring phi = -j*omega*psi
//! turns the conduction equation div[sigma(-grad(phi) - j*omega*A0)] = 0
//! into one real problem,
//!
//!     div(sigma grad(psi)) = div(sigma A0),
//!
//! with the natural boundary condition (no current leaves the conductor).
//! omega re-enters only as the scale of E = -j*omega*(A0 - grad(psi)).
//!
//! Discretization: Galerkin with 8-node trilinear hexahedral elements, one
//! element per voxel, element-constant sigma. The assembled operator is
//! symmetric positive semidefinite with one constant null vector per
//! connected conducting component; the right-hand side is orthogonalized
//! against those constants and the solution mean over each component is
//! pinned to zero. The solve itself is matrix-free preconditioned conjugate
//! gradients with a Jacobi (diagonal) preconditioner.

use rayon::prelude::*;

use crate::coil::VectorField;
use crate::error::{Error, Result};
use crate::volume::{LabelVolume, TISSUE_COUNT};

/// Tissue conductivities in S/m at the operating frequency, indexed by
/// label ID (0 = air). `None` marks a label the caller must map explicitly.
#[derive(Debug, Clone)]
pub struct ConductivityTable {
    pub values: [Option<f64>; TISSUE_COUNT + 1],
}

impl Default for ConductivityTable {
    fn default() -> Self {
        let mut values = [None; TISSUE_COUNT + 1];
        values[0] = Some(0.0); // background / air
        values[1] = Some(0.10); // skin
        values[2] = Some(0.34); // muscle
        values[3] = Some(0.04); // fat
        values[4] = Some(0.02); // bone (cortical)
        values[5] = Some(0.08); // bone (cancellous)
        values[6] = Some(0.50); // dura
        values[7] = Some(0.70); // blood
        values[8] = Some(2.00); // CSF
        values[9] = Some(0.10); // GM
        values[10] = Some(0.07); // WM
        values[11] = Some(0.13); // cerebellum
        values[12] = Some(1.50); // vitreous humor
        values[13] = Some(0.07); // mucous tissue
        Self { values }
    }
}

/// Tissue names matching the label IDs of the conductivity table.
pub const TISSUE_NAMES: [&str; TISSUE_COUNT + 1] = [
    "background",
    "skin",
    "muscle",
    "fat",
    "bone_cortical",
    "bone_cancellous",
    "dura",
    "blood",
    "csf",
    "gm",
    "wm",
    "cerebellum",
    "vitreous_humor",
    "mucous",
];

/// Per-voxel conductivity in S/m; 0 marks non-conducting voxels.
#[derive(Debug, Clone)]
pub struct ConductivityVolume {
    pub dims: [usize; 3],
    /// Millimeters.
    pub spacing: [f64; 3],
    pub sigma: Vec<f64>,
}

impl ConductivityVolume {
    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }
}

/// Voxelwise conductivity lookup. Background maps to 0; every label that
/// occurs must be present in the table.
pub fn assign_conductivity(labels: &LabelVolume, table: &ConductivityTable) -> Result<ConductivityVolume> {
    let mut sigma = Vec::with_capacity(labels.data.len());
    for &l in &labels.data {
        match table.values[l as usize] {
            Some(v) if v.is_finite() && v >= 0.0 => sigma.push(v),
            Some(v) => {
                return Err(Error::Config(format!("conductivity {} for label {} invalid", v, l)));
            }
            None => return Err(Error::UnmappedLabel(l)),
        }
    }
    Ok(ConductivityVolume { dims: labels.dims, spacing: labels.spacing, sigma })
}

/// Scalar potential on the voxel-corner node lattice, plus solve metadata.
/// The physical phasor is phi = -j*omega*psi.
#[derive(Debug, Clone)]
pub struct PotentialField {
    /// (nx+1, ny+1, nz+1).
    pub node_dims: [usize; 3],
    /// Millimeters, matched to the conductivity grid.
    pub spacing: [f64; 3],
    /// Node-centered psi in V*s; zero on nodes not adjacent to any
    /// conducting element.
    pub psi: Vec<f64>,
    /// Nodes adjacent to at least one conducting element.
    pub active: Vec<bool>,
    pub iterations: usize,
    /// Relative residual after each iteration.
    pub residual_trace: Vec<f64>,
}

/// Unit-cube reference matrices: entries int_e dNi/da * dNj/da for each axis.
fn reference_matrices() -> [[[f64; 8]; 8]; 3] {
    // 2-point Gauss per axis integrates the trilinear gradient products
    // exactly.
    let g = [0.5 - 0.5 / f64::sqrt(3.0), 0.5 + 0.5 / f64::sqrt(3.0)];
    let dshape = |l: usize, axis: usize, p: [f64; 3]| -> f64 {
        let f = |bit: usize, t: f64| if bit == 0 { 1.0 - t } else { t };
        let df = |bit: usize| if bit == 0 { -1.0 } else { 1.0 };
        let bits = [l & 1, (l >> 1) & 1, (l >> 2) & 1];
        let mut v = 1.0;
        for a in 0..3 {
            v *= if a == axis { df(bits[a]) } else { f(bits[a], p[a]) };
        }
        v
    };
    
    let mut out = [[[0.0; 8]; 8]; 3];
    for gx in 0..2 {
        for gy in 0..2 {
            for gz in 0..2 {
                let p = [g[gx], g[gy], g[gz]];
                for axis in 0..3 {
                    for i in 0..8 {
                        let di = dshape(i, axis, p);
                        for j in 0..8 {
                            out[axis][i][j] += 0.125 * di * dshape(j, axis, p);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Element stiffness for a hx*hy*hz brick (unit conductivity).
fn element_stiffness(h: [f64; 3]) -> [[f64; 8]; 8] {
    let reference = reference_matrices();
    let vol = h[0] * h[1] * h[2];
    let mut k = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            k[i][j] = vol
                * (reference[0][i][j] / (h[0] * h[0])
                    + reference[1][i][j] / (h[1] * h[1])
                    + reference[2][i][j] / (h[2] * h[2]));
        }
    }
    k
}

/// Integral of each shape gradient over the element:
/// g[l] = (sx*hy*hz, sy*hx*hz, sz*hx*hy) / 4 with sign s per node corner.
fn element_gradient_integrals(h: [f64; 3]) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (l, gl) in g.iter_mut().enumerate() {
        let s = |bit: usize| if bit == 0 { -1.0 } else { 1.0 };
        gl[0] = s(l & 1) * h[1] * h[2] / 4.0;
        gl[1] = s((l >> 1) & 1) * h[0] * h[2] / 4.0;
        gl[2] = s((l >> 2) & 1) * h[0] * h[1] / 4.0;
    }
    g
}

struct Mesh<'a> {
    dims: [usize; 3],
    node_dims: [usize; 3],
    sigma: &'a [f64],
    k_elem: [[f64; 8]; 8],
    /// Flat node-index offset of each element-local corner.
    corner_offsets: [usize; 8],
}

impl<'a> Mesh<'a> {
    fn new(volume: &'a ConductivityVolume) -> Self {
        let dims = volume.dims;
        let node_dims = [dims[0] + 1, dims[1] + 1, dims[2] + 1];
        let h = [volume.spacing[0] * 1e-3, volume.spacing[1] * 1e-3, volume.spacing[2] * 1e-3];
        let mut corner_offsets = [0usize; 8];
        for (l, off) in corner_offsets.iter_mut().enumerate() {
            *off = (l & 1) + node_dims[0] * (((l >> 1) & 1) + node_dims[1] * ((l >> 2) & 1));
        }
        Self { dims, node_dims, sigma: &volume.sigma, k_elem: element_stiffness(h), corner_offsets }
    }

    #[inline]
    fn node_index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.node_dims[0] * (y + self.node_dims[1] * z)
    }

    fn node_count(&self) -> usize {
        self.node_dims[0] * self.node_dims[1] * self.node_dims[2]
    }

    /// out = K * psi, matrix-free, parallel over node slabs. Every node
    /// gathers from its (up to) 8 adjacent elements in a fixed order, so the
    /// result is deterministic under any thread count.
    fn apply(&self, psi: &[f64], out: &mut [f64]) {
        let [nx, ny, _nz] = self.dims;
        let node_plane = self.node_dims[0] * self.node_dims[1];
        out.par_chunks_mut(node_plane).enumerate().for_each(|(zn, out_plane)| {
            for yn in 0..self.node_dims[1] {
                for xn in 0..self.node_dims[0] {
                    let mut acc = 0.0f64;
                    for a in 0..8usize {
                        let (ax, ay, az) = (a & 1, (a >> 1) & 1, (a >> 2) & 1);
                        // adjacent element (xn-1+ax, yn-1+ay, zn-1+az)
                        if (xn + ax) < 1 || xn + ax > nx || (yn + ay) < 1 || yn + ay > ny || (zn + az) < 1 || zn + az > self.dims[2] {
                            continue;
                        }
                        let (ex, ey, ez) = (xn + ax - 1, yn + ay - 1, zn + az - 1);
                        let sigma = self.sigma[ex + nx * (ey + ny * ez)];
                        if sigma == 0.0 {
                            continue;
                        }
                        let local = (1 - ax) + 2 * (1 - ay) + 4 * (1 - az);
                        let base = self.node_index(ex, ey, ez);
                        let row = &self.k_elem[local];
                        let mut elem_acc = 0.0;
                        for l in 0..8 {
                            elem_acc += row[l] * psi[base + self.corner_offsets[l]];
                        }
                        acc += sigma * elem_acc;
                    }
                    out_plane[xn + self.node_dims[0] * yn] = acc;
                }
            }
        });
    }

    /// Jacobi diagonal of K.
    fn diagonal(&self) -> Vec<f64> {
        let [nx, ny, nz] = self.dims;
        let mut diag = vec![0.0f64; self.node_count()];
        for ez in 0..nz {
            for ey in 0..ny {
                for ex in 0..nx {
                    let sigma = self.sigma[ex + nx * (ey + ny * ez)];
                    if sigma == 0.0 {
                        continue;
                    }
                    let base = self.node_index(ex, ey, ez);
                    for l in 0..8 {
                        diag[base + self.corner_offsets[l]] += sigma * self.k_elem[l][l];
                    }
                }
            }
        }
        diag
    }
}

/// Connected conducting components of the active nodes (two nodes connect
/// when they share a conducting element). Returns (active mask, component id
/// per node, component count).
fn conducting_components(mesh: &Mesh) -> (Vec<bool>, Vec<u32>, usize) {
    let n = mesh.node_count();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], i: u32) -> u32 {
        let mut root = i;
        while parent[root as usize] != root {
            root = parent[root as usize];
        }
        let mut cur = i;
        while parent[cur as usize] != root {
            let next = parent[cur as usize];
            parent[cur as usize] = root;
            cur = next;
        }
        root
    }
    let [nx, ny, nz] = mesh.dims;
    let mut active = vec![false; n];
    for ez in 0..nz {
        for ey in 0..ny {
            for ex in 0..nx {
                if mesh.sigma[ex + nx * (ey + ny * ez)] == 0.0 {
                    continue;
                }
                let base = mesh.node_index(ex, ey, ez);
                let first = base + mesh.corner_offsets[0];
                active[first] = true;
                for l in 1..8 {
                    let node = base + mesh.corner_offsets[l];
                    active[node] = true;
                    let ra = find(&mut parent, first as u32);
                    let rb = find(&mut parent, node as u32);
                    if ra != rb {
                        parent[rb as usize] = ra;
                    }
                }
            }
        }
    }
    let mut component = vec![u32::MAX; n];
    let mut count = 0usize;
    for i in 0..n {
        if active[i] {
            let root = find(&mut parent, i as u32) as usize;
            if component[root] == u32::MAX {
                component[root] = count as u32;
                count += 1;
            }
            component[i] = component[root];
        }
    }
    (active, component, count)
}

/// Subtract the per-component mean from a node vector (orthogonalize against
/// the constant null vectors).
fn project_components(v: &mut [f64], component: &[u32], count: usize) {
    let mut sums = vec![0.0f64; count];
    let mut counts = vec![0usize; count];
    for (i, &c) in component.iter().enumerate() {
        if c != u32::MAX {
            sums[c as usize] += v[i];
            counts[c as usize] += 1;
        }
    }
    for s in 0..count {
        if counts[s] > 0 {
            sums[s] /= counts[s] as f64;
        }
    }
    for (i, &c) in component.iter().enumerate() {
        if c != u32::MAX {
            v[i] -= sums[c as usize];
        }
    }
}

pub fn default_max_iterations(node_count: usize) -> usize {
    1000 * (node_count as f64).cbrt().ceil() as usize
}

/// Solve div(sigma grad psi) = div(sigma A0) to the requested relative
/// residual. `a0` is sampled at voxel centers and treated element-constant.
pub fn solve_potential(
    sigma: &ConductivityVolume,
    a0: &VectorField,
    tol: f64,
    max_iter: usize,
) -> Result<PotentialField> {
    if sigma.dims != a0.dims {
        return Err(Error::MisalignedDims(format!("sigma {:?} vs A0 {:?}", sigma.dims, a0.dims)));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("solver tol must be > 0, got {}", tol)));
    }
    if sigma.sigma.iter().all(|&s| s == 0.0) {
        return Err(Error::AllAirVolume);
    }
    crate::runtime::keep_step_buffers_heap_resident();
    let mesh = Mesh::new(sigma);
    let n = mesh.node_count();
    let (active, component, component_count) = conducting_components(&mesh);

    // Right-hand side: f_i = sum_e sigma_e A0_e . int_e grad(N_i)
    let h = [sigma.spacing[0] * 1e-3, sigma.spacing[1] * 1e-3, sigma.spacing[2] * 1e-3];
    let grad_integrals = element_gradient_integrals(h);
    let mut b = vec![0.0f64; n];
    let [nx, ny, nz] = sigma.dims;
    for ez in 0..nz {
        for ey in 0..ny {
            for ex in 0..nx {
                let e = ex + nx * (ey + ny * ez);
                let s = sigma.sigma[e];
                if s == 0.0 {
                    continue;
                }
                let a = a0.data[e];
                let base = mesh.node_index(ex, ey, ez);
                for l in 0..8 {
                    let g = grad_integrals[l];
                    b[base + mesh.corner_offsets[l]] += s * (a[0] * g[0] + a[1] * g[1] + a[2] * g[2]);
                }
            }
        }
    }
    project_components(&mut b, &component, component_count);

    let diag = mesh.diagonal();
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut psi = vec![0.0f64; n];
    let mut trace = Vec::new();

    if norm_b == 0.0 {
        // A0 drives no net current (or is zero): psi = 0 is exact
        return Ok(PotentialField {
            node_dims: mesh.node_dims,
            spacing: sigma.spacing,
            psi,
            active,
            iterations: 0,
            residual_trace: trace,
        });
    }

    // Jacobi-preconditioned CG on the singular-but-consistent system.
    let precondition = |r: &[f64], z: &mut [f64]| {
        for i in 0..r.len() {
            z[i] = if diag[i] > 0.0 { r[i] / diag[i] } else { 0.0 };
        }
    };
    let mut r = b.clone();
    let mut z = vec![0.0f64; n];
    precondition(&r, &mut z);
    project_components(&mut z, &component, component_count);
    let mut p = z.clone();
    let mut kp = vec![0.0f64; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();

    let mut iterations = 0usize;
    let mut rel = f64::INFINITY;
    for iter in 0..max_iter {
        mesh.apply(&p, &mut kp);
        let pkp: f64 = p.iter().zip(&kp).map(|(a, b)| a * b).sum();
        if pkp <= 0.0 {
            break; // numerical breakdown; report current residual
        }
        let alpha = rz / pkp;
        for i in 0..n {
            psi[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        project_components(&mut r, &component, component_count);
        let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        rel = norm_r / norm_b;
        trace.push(rel);
        iterations = iter + 1;
        if rel <= tol {
            break;
        }
        precondition(&r, &mut z);
        project_components(&mut z, &component, component_count);
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rel > tol {
        return Err(Error::NoConvergence { residual: rel, iterations });
    }
    project_components(&mut psi, &component, component_count);
    Ok(PotentialField {
        node_dims: mesh.node_dims,
        spacing: sigma.spacing,
        psi,
        active,
        iterations,
        residual_trace: trace,
    })
}

/// Induced electric field amplitude R = omega * (A0 - grad psi) at voxel
/// centers; the physical phasor is E = -j * R. Also returns |E|.
///
/// grad psi is the trilinear-element gradient evaluated at the element
/// center (the average of the four edge differences per axis).
pub fn electric_field(
    psi: &PotentialField,
    a0: &VectorField,
    omega: f64,
) -> Result<(VectorField, Vec<f64>)> {
    let dims = [psi.node_dims[0] - 1, psi.node_dims[1] - 1, psi.node_dims[2] - 1];
    if dims != a0.dims {
        return Err(Error::MisalignedDims(format!("psi grid {:?} vs A0 {:?}", dims, a0.dims)));
    }
    let h = [psi.spacing[0] * 1e-3, psi.spacing[1] * 1e-3, psi.spacing[2] * 1e-3];
    let [nx, ny, nz] = dims;
    let node = |x: usize, y: usize, z: usize| x + psi.node_dims[0] * (y + psi.node_dims[1] * z);
    let mut field = VectorField::zeros(dims, psi.spacing);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let c = |dx: usize, dy: usize, dz: usize| psi.psi[node(x + dx, y + dy, z + dz)];
                let gx = ((c(1, 0, 0) - c(0, 0, 0))
                    + (c(1, 1, 0) - c(0, 1, 0))
                    + (c(1, 0, 1) - c(0, 0, 1))
                    + (c(1, 1, 1) - c(0, 1, 1)))
                    / (4.0 * h[0]);
                let gy = ((c(0, 1, 0) - c(0, 0, 0))
                    + (c(1, 1, 0) - c(1, 0, 0))
                    + (c(0, 1, 1) - c(0, 0, 1))
                    + (c(1, 1, 1) - c(1, 0, 1)))
                    / (4.0 * h[1]);
                let gz = ((c(0, 0, 1) - c(0, 0, 0))
                    + (c(1, 0, 1) - c(1, 0, 0))
                    + (c(0, 1, 1) - c(0, 1, 0))
                    + (c(1, 1, 1) - c(1, 1, 0)))
                    / (4.0 * h[2]);
                let a = a0.data[x + nx * (y + ny * z)];
                field.data[x + nx * (y + ny * z)] =
                    [omega * (a[0] - gx), omega * (a[1] - gy), omega * (a[2] - gz)];
            }
        }
    }
    let magnitude = field.magnitudes();
    Ok((field, magnitude))
}

/// Voxels of the region whose reference-field magnitude exceeds 70% of the
/// region maximum.
pub fn hotspot_mask(reference_magnitude: &[f64], roi: &[bool]) -> Result<Vec<bool>> {
    if reference_magnitude.len() != roi.len() {
        return Err(Error::ShapeMismatch(format!(
            "hotspot: field {} vs roi {}",
            reference_magnitude.len(),
            roi.len()
        )));
    }
    let max = reference_magnitude
        .iter()
        .zip(roi)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::EmptyRegion);
    }
    let threshold = 0.7 * max;
    Ok(reference_magnitude
        .iter()
        .zip(roi)
        .map(|(&v, &m)| m && v > threshold)
        .collect())
}
