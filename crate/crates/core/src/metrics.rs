//! Segmentation and field-comparison metrics: Dice overlap, Hausdorff
//! distance (directed and symmetric, via an exact Euclidean distance
//! transform), and mean absolute field error over a region.

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, TISSUE_COUNT};

/// Dice coefficient in percent: 2|A∩B| / (|A|+|B|) * 100.
pub fn dice(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("dice: {} vs {} voxels", a.len(), b.len())));
    }
    let mut inter = 0usize;
    let mut ca = 0usize;
    let mut cb = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        ca += usize::from(x);
        cb += usize::from(y);
        inter += usize::from(x && y);
    }
    if ca + cb == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(200.0 * inter as f64 / (ca + cb) as f64)
}

const INF: f64 = f64::INFINITY;

/// One pass of the lower-envelope squared-distance transform along a line,
/// with squared sample spacing `s2`.
fn edt_1d(f: &[f64], s2: f64, d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -INF;
    z[1] = INF;
    for q in 1..n {
        if f[q] == INF {
            continue;
        }
        loop {
            let p = v[k];
            if f[p] == INF {
                // drop unreachable parabola
                if k == 0 {
                    v[0] = q;
                    z[0] = -INF;
                    z[1] = INF;
                    break;
                }
                k -= 1;
                continue;
            }
            let s = ((f[q] + s2 * (q * q) as f64) - (f[p] + s2 * (p * p) as f64))
                / (2.0 * s2 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = -INF;
                    z[1] = INF;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = INF;
                break;
            }
        }
    }
    if f[v[0]] == INF {
        // no seeds on this line
        d[..n].fill(INF);
        return;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = s2 * dq * dq + f[p];
    }
}

/// Exact squared Euclidean distance transform of a 3D mask, in mm^2, with
/// anisotropic spacing. Voxels inside the mask get 0; voxels on a grid with
/// no mask voxels at all get +inf.
pub fn distance_transform_sq(mask: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let mut dist: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { INF }).collect();

    let max_n = nx.max(ny).max(nz);
    let mut f = vec![0.0f64; max_n];
    let mut d = vec![0.0f64; max_n];
    let mut v = vec![0usize; max_n];
    let mut z = vec![0.0f64; max_n + 1];

    // x pass
    let s2 = spacing[0] * spacing[0];
    for zi in 0..nz {
        for yi in 0..ny {
            let base = nx * (yi + ny * zi);
            f[..nx].copy_from_slice(&dist[base..base + nx]);
            edt_1d(&f[..nx], s2, &mut d[..nx], &mut v, &mut z);
            dist[base..base + nx].copy_from_slice(&d[..nx]);
        }
    }
    // y pass
    let s2 = spacing[1] * spacing[1];
    for zi in 0..nz {
        for xi in 0..nx {
            for yi in 0..ny {
                f[yi] = dist[xi + nx * (yi + ny * zi)];
            }
            edt_1d(&f[..ny], s2, &mut d[..ny], &mut v, &mut z);
            for yi in 0..ny {
                dist[xi + nx * (yi + ny * zi)] = d[yi];
            }
        }
    }
    // z pass
    let s2 = spacing[2] * spacing[2];
    for yi in 0..ny {
        for xi in 0..nx {
            for zi in 0..nz {
                f[zi] = dist[xi + nx * (yi + ny * zi)];
            }
            edt_1d(&f[..nz], s2, &mut d[..nz], &mut v, &mut z);
            for zi in 0..nz {
                dist[xi + nx * (yi + ny * zi)] = d[zi];
            }
        }
    }
    dist
}

/// Directed Hausdorff distance from A to B in millimeters:
/// max over a in A of the distance from a to the nearest b in B.
pub fn hausdorff_directed(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Result<f64> {
    let n = dims[0] * dims[1] * dims[2];
    if a.len() != n || b.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "hausdorff: masks {} / {} vs dims {:?}",
            a.len(),
            b.len(),
            dims
        )));
    }
    if !a.iter().any(|&m| m) || !b.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    let dist_to_b = distance_transform_sq(b, dims, spacing);
    let mut worst = 0.0f64;
    for (i, &inside) in a.iter().enumerate() {
        if inside && dist_to_b[i] > worst {
            worst = dist_to_b[i];
        }
    }
    Ok(worst.sqrt())
}

/// Symmetric Hausdorff distance: max of the two directed distances.
pub fn hausdorff_symmetric(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Result<f64> {
    Ok(hausdorff_directed(a, b, dims, spacing)?.max(hausdorff_directed(b, a, dims, spacing)?))
}

/// Mean absolute error (in percent of the normalized field scale) between
/// two field-magnitude volumes over a region. Unless `raw` is set, each
/// field is divided by its own maximum over the region first, which makes
/// the comparison drive-amplitude independent.
pub fn mae(reference: &[f64], test: &[f64], region: &[bool], raw: bool) -> Result<f64> {
    if reference.len() != test.len() || reference.len() != region.len() {
        return Err(Error::ShapeMismatch(format!(
            "mae: fields {} / {} vs region {}",
            reference.len(),
            test.len(),
            region.len()
        )));
    }
    let count = region.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    let (scale_ref, scale_test) = if raw {
        (1.0, 1.0)
    } else {
        let max_of = |field: &[f64]| {
            field
                .iter()
                .zip(region)
                .filter(|(_, &m)| m)
                .map(|(&v, _)| v)
                .fold(0.0f64, f64::max)
        };
        let r = max_of(reference);
        let t = max_of(test);
        if r <= 0.0 || t <= 0.0 {
            return Err(Error::EmptyRegion);
        }
        (r, t)
    };
    let mut acc = 0.0;
    for i in 0..reference.len() {
        if region[i] {
            acc += (reference[i] / scale_ref - test[i] / scale_test).abs();
        }
    }
    Ok(100.0 * acc / count as f64)
}

/// Metrics for one tissue label.
#[derive(Debug, Clone)]
pub struct TissueMetrics {
    pub label: u8,
    pub truth_voxels: usize,
    pub predicted_voxels: usize,
    /// None when the tissue is absent from both volumes.
    pub dice_pct: Option<f64>,
    /// Directed prediction->truth distance; None when either side is empty.
    pub hausdorff_directed_mm: Option<f64>,
    pub hausdorff_symmetric_mm: Option<f64>,
}

/// Per-tissue segmentation metrics (labels 1..=13; background excluded).
pub fn segmentation_report(predicted: &LabelVolume, truth: &LabelVolume) -> Result<Vec<TissueMetrics>> {
    if predicted.dims != truth.dims {
        return Err(Error::MisalignedDims(format!("{:?} vs {:?}", predicted.dims, truth.dims)));
    }
    let mut rows = Vec::with_capacity(TISSUE_COUNT);
    for label in 1..=TISSUE_COUNT as u8 {
        let pm = predicted.mask(label);
        let tm = truth.mask(label);
        let np = pm.iter().filter(|&&m| m).count();
        let nt = tm.iter().filter(|&&m| m).count();
        let dice_pct = if np + nt > 0 { Some(dice(&pm, &tm)?) } else { None };
        let (hd_dir, hd_sym) = if np > 0 && nt > 0 {
            (
                Some(hausdorff_directed(&pm, &tm, truth.dims, truth.spacing)?),
                Some(hausdorff_symmetric(&pm, &tm, truth.dims, truth.spacing)?),
            )
        } else {
            (None, None)
        };
        rows.push(TissueMetrics {
            label,
            truth_voxels: nt,
            predicted_voxels: np,
            dice_pct,
            hausdorff_directed_mm: hd_dir,
            hausdorff_symmetric_mm: hd_sym,
        });
    }
    Ok(rows)
}
