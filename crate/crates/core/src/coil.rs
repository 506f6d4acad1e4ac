//! Figure-eight stimulation coil: thin-wire geometry and Biot-Savart
//! computation of the magnetic vector potential on a voxel grid.
//!
//! The coil is a polyline of straight current segments. Each wing is a stack
//! of circular turns with radii spaced uniformly from the inner to the outer
//! wing radius; the two wings are tangent at the pose center and carry
//! opposite winding senses, which adds up the induced field under the
//! tangency point. The vector potential uses one midpoint quadrature sample
//! per segment:
//!
//!   A(r) = (mu0 I / 4 pi) * sum_segments dl / |r - r_mid|

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv::KvBlock;

/// Vacuum permeability, exactly 4 pi x 10^-7.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: Vec3) -> Result<Vec3> {
    let n = norm(a);
    if n < 1e-12 {
        return Err(Error::DegeneratePose(format!("zero-length direction {:?}", a)));
    }
    Ok(scale(a, 1.0 / n))
}

/// Placement of the coil: tangency-point center, coil plane normal, and the
/// handle direction along which the two wing centers separate.
#[derive(Debug, Clone, Copy)]
pub struct CoilPose {
    pub center: Vec3,
    pub normal: Vec3,
    pub handle: Vec3,
}

impl Default for CoilPose {
    fn default() -> Self {
        Self { center: [0.0; 3], normal: [0.0, 0.0, 1.0], handle: [1.0, 0.0, 0.0] }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CoilParams {
    /// Outer wing diameter in meters.
    pub outer_diameter: f64,
    /// Inner wing diameter in meters.
    pub inner_diameter: f64,
    /// Circular turns per wing, radii uniformly spaced inner..outer.
    pub turns: usize,
    /// Straight segments per turn.
    pub segments: usize,
    /// Drive current amplitude in amperes.
    pub current: f64,
    /// Drive frequency in hertz (enters the field solve only as the scale
    /// omega = 2 pi f of the induced field).
    pub frequency: f64,
}

impl Default for CoilParams {
    fn default() -> Self {
        Self {
            outer_diameter: 0.097,
            inner_diameter: 0.047,
            turns: 5,
            segments: 128,
            current: 1.0,
            frequency: 10e3,
        }
    }
}

impl CoilParams {
    /// Single mean-diameter loop per wing; fast mode for tests.
    pub fn single_loop(self) -> Self {
        Self { turns: 1, ..self }
    }
}

/// One straight wire segment carrying `current`.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub start: Vec3,
    pub delta: Vec3,
    pub current: f64,
}

impl Segment {
    #[inline]
    pub fn midpoint(&self) -> Vec3 {
        add(self.start, scale(self.delta, 0.5))
    }
}

/// Discretized coil: the wire path plus the drive parameters.
#[derive(Debug, Clone)]
pub struct Coil {
    pub segments: Vec<Segment>,
    pub params: CoilParams,
    pub pose: CoilPose,
}

impl Coil {
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.params.frequency
    }
}

/// Circular loop of `segments` chords around `center` in the plane spanned
/// by `u`, `v`. `sense` +1/-1 selects the winding direction.
fn circular_loop(center: Vec3, u: Vec3, v: Vec3, radius: f64, segments: usize, sense: f64, current: f64) -> Vec<Segment> {
    let mut pts = Vec::with_capacity(segments + 1);
    for s in 0..=segments {
        let theta = sense * 2.0 * std::f64::consts::PI * (s as f64) / (segments as f64);
        let p = add(center, add(scale(u, radius * theta.cos()), scale(v, radius * theta.sin())));
        pts.push(p);
    }
    (0..segments)
        .map(|s| Segment { start: pts[s], delta: sub(pts[s + 1], pts[s]), current })
        .collect()
}

/// One wing: `turns` concentric circular loops with radii uniformly spaced
/// from the inner to the outer radius (a single turn uses the mean radius).
pub fn build_wing(center: Vec3, u: Vec3, v: Vec3, params: &CoilParams, sense: f64) -> Result<Vec<Segment>> {
    if params.segments < 16 {
        return Err(Error::SegmentsTooFew(params.segments));
    }
    let r_outer = params.outer_diameter / 2.0;
    let r_inner = params.inner_diameter / 2.0;
    if !(r_outer > 0.0) || !(r_inner > 0.0) || r_inner > r_outer {
        return Err(Error::DegeneratePose(format!(
            "wing radii inner {} outer {}",
            r_inner, r_outer
        )));
    }
    let mut segs = Vec::new();
    if params.turns <= 1 {
        let r = 0.5 * (r_inner + r_outer);
        segs.extend(circular_loop(center, u, v, r, params.segments, sense, params.current));
    } else {
        for t in 0..params.turns {
            let r = r_inner + (r_outer - r_inner) * (t as f64) / (params.turns as f64 - 1.0);
            segs.extend(circular_loop(center, u, v, r, params.segments, sense, params.current));
        }
    }
    Ok(segs)
}

/// Build the figure-eight coil: two opposite-sense wings whose outer turns
/// touch at the pose center, wing centers at center +- outer_radius along
/// the handle direction.
pub fn build_figure_eight(pose: &CoilPose, params: &CoilParams) -> Result<Coil> {
    let normal = normalize(pose.normal)?;
    let handle_raw = sub(pose.handle, scale(normal, dot(pose.handle, normal)));
    let handle = normalize(handle_raw)
        .map_err(|_| Error::DegeneratePose("handle parallel to normal".into()))?;
    // in-plane frame: u along the handle, v completes it
    let v = cross(normal, handle);

    let r_outer = params.outer_diameter / 2.0;
    let center_a = add(pose.center, scale(handle, r_outer));
    let center_b = add(pose.center, scale(handle, -r_outer));

    let mut segments = build_wing(center_a, handle, v, params, 1.0)?;
    segments.extend(build_wing(center_b, handle, v, params, -1.0)?);
    Ok(Coil { segments, params: *params, pose: *pose })
}

/// Vector potential of a segment set at one point (tesla-meter).
pub fn vector_potential_at(segments: &[Segment], point: Vec3) -> Vec3 {
    let mut a = [0.0f64; 3];
    for seg in segments {
        let r = sub(point, seg.midpoint());
        let dist = norm(r);
        let c = seg.current / dist;
        a[0] += c * seg.delta[0];
        a[1] += c * seg.delta[1];
        a[2] += c * seg.delta[2];
    }
    scale(a, MU0 / (4.0 * std::f64::consts::PI))
}

/// Magnetic flux density as the central-difference curl of the vector
/// potential, step `h` (meters).
pub fn flux_density_at(segments: &[Segment], point: Vec3, h: f64) -> Vec3 {
    let eval = |p: Vec3| vector_potential_at(segments, p);
    let dx = scale(
        sub(eval(add(point, [h, 0.0, 0.0])), eval(sub(point, [h, 0.0, 0.0]))),
        1.0 / (2.0 * h),
    );
    let dy = scale(
        sub(eval(add(point, [0.0, h, 0.0])), eval(sub(point, [0.0, h, 0.0]))),
        1.0 / (2.0 * h),
    );
    let dz = scale(
        sub(eval(add(point, [0.0, 0.0, h])), eval(sub(point, [0.0, 0.0, h]))),
        1.0 / (2.0 * h),
    );
    // curl A = (dAz/dy - dAy/dz, dAx/dz - dAz/dx, dAy/dx - dAx/dy)
    [dy[2] - dz[1], dz[0] - dx[2], dx[1] - dy[0]]
}

/// Voxel grid placement in physical space: voxel (x,y,z) center sits at
/// `origin + ((x,y,z) + 0.5) * spacing_meters`.
#[derive(Debug, Clone, Copy)]
pub struct GridGeometry {
    pub dims: [usize; 3],
    /// Spacing in meters.
    pub spacing: [f64; 3],
    /// Physical position of the voxel-grid corner (node (0,0,0)).
    pub origin: Vec3,
}

impl GridGeometry {
    /// Grid with millimeter spacing metadata converted to meters, corner at
    /// the given origin.
    pub fn from_spacing_mm(dims: [usize; 3], spacing_mm: [f64; 3], origin: Vec3) -> Self {
        Self {
            dims,
            spacing: [spacing_mm[0] * 1e-3, spacing_mm[1] * 1e-3, spacing_mm[2] * 1e-3],
            origin,
        }
    }

    #[inline]
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        [
            self.origin[0] + (x as f64 + 0.5) * self.spacing[0],
            self.origin[1] + (y as f64 + 0.5) * self.spacing[1],
            self.origin[2] + (z as f64 + 0.5) * self.spacing[2],
        ]
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }
}

/// Real 3-vector field sampled at voxel centers. Fields here are single
/// frequency phasors with the uniform -j*omega factor kept symbolic, so the
/// stored component values are real amplitudes.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub dims: [usize; 3],
    /// Spacing in millimeters (matches the volume types).
    pub spacing_mm: [f64; 3],
    /// x-fastest, 3 components per voxel.
    pub data: Vec<[f64; 3]>,
}

impl VectorField {
    pub fn zeros(dims: [usize; 3], spacing_mm: [f64; 3]) -> Self {
        Self { dims, spacing_mm, data: vec![[0.0; 3]; dims[0] * dims[1] * dims[2]] }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|v| norm(*v)).collect()
    }
}

/// Evaluate the coil's vector potential at every voxel center of the grid.
///
/// Errors when any voxel center comes closer to a segment quadrature point
/// than the guard distance (half the voxel diagonal), where the thin-wire
/// quadrature diverges.
pub fn vector_potential(coil: &Coil, grid: &GridGeometry) -> Result<VectorField> {
    let guard = 0.5
        * (grid.spacing[0] * grid.spacing[0]
            + grid.spacing[1] * grid.spacing[1]
            + grid.spacing[2] * grid.spacing[2])
            .sqrt();
    let guard_sq = guard * guard;
    let [nx, ny, _] = grid.dims;
    let mut field = VectorField::zeros(grid.dims, [
        grid.spacing[0] * 1e3,
        grid.spacing[1] * 1e3,
        grid.spacing[2] * 1e3,
    ]);
    let mids: Vec<Vec3> = coil.segments.iter().map(|s| s.midpoint()).collect();
    let mu_factor = MU0 / (4.0 * std::f64::consts::PI);

    let plane = nx * ny;
    let violations: Vec<[usize; 3]> = field
        .data
        .par_chunks_mut(plane)
        .enumerate()
        .flat_map(|(z, out_plane)| {
            let mut bad = Vec::new();
            for y in 0..ny {
                for x in 0..nx {
                    let p = grid.voxel_center(x, y, z);
                    let mut acc = [0.0f64; 3];
                    for (seg, mid) in coil.segments.iter().zip(&mids) {
                        let r = sub(p, *mid);
                        let d2 = dot(r, r);
                        if d2 < guard_sq {
                            bad.push([x, y, z]);
                            break;
                        }
                        let c = seg.current / d2.sqrt();
                        acc[0] += c * seg.delta[0];
                        acc[1] += c * seg.delta[1];
                        acc[2] += c * seg.delta[2];
                    }
                    out_plane[x + nx * y] = scale(acc, mu_factor);
                }
            }
            bad
        })
        .collect();
    if let Some(&v) = violations.first() {
        return Err(Error::SingularSegmentDistance(v));
    }
    Ok(field)
}

/// Parse a coil pose/parameter file (`key=value` lines: center, normal,
/// handle, outer_diameter, inner_diameter, turns, segments, current,
/// frequency; missing keys take defaults).
pub fn parse_pose_file(text: &str) -> Result<(CoilPose, CoilParams)> {
    let kv = KvBlock::parse(text)?;
    let mut pose = CoilPose::default();
    let mut params = CoilParams::default();
    if kv.get("center").is_some() {
        pose.center = kv.parse_triple("center")?;
    }
    if kv.get("normal").is_some() {
        pose.normal = kv.parse_triple("normal")?;
    }
    if kv.get("handle").is_some() {
        pose.handle = kv.parse_triple("handle")?;
    }
    if kv.get("outer_diameter").is_some() {
        params.outer_diameter = kv.parse_value("outer_diameter")?;
    }
    if kv.get("inner_diameter").is_some() {
        params.inner_diameter = kv.parse_value("inner_diameter")?;
    }
    if kv.get("turns").is_some() {
        params.turns = kv.parse_value("turns")?;
    }
    if kv.get("segments").is_some() {
        params.segments = kv.parse_value("segments")?;
    }
    if kv.get("current").is_some() {
        params.current = kv.parse_value("current")?;
    }
    if kv.get("frequency").is_some() {
        params.frequency = kv.parse_value("frequency")?;
    }
    Ok((pose, params))
}
