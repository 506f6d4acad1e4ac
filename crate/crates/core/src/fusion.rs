//! Merge the three per-direction label volumes into one head model.
//!
//! Per voxel: if at least two of the three views agree, the majority label
//! wins. Fully disagreeing ("fuzzy") voxels fall back to a neighborhood
//! majority vote: label occurrences are counted over a window-sized cube
//! around the voxel in all three volumes and the most frequent label wins,
//! ties resolving to the lowest label ID (or to the axial view's label under
//! the axial-priority policy). Agreement statistics are collected before any
//! fuzzy resolution.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::LabelVolume;

/// The three per-direction segmentations, voxel-aligned.
#[derive(Debug, Clone)]
pub struct ViewTriple<'a> {
    pub axial: &'a LabelVolume,
    pub sagittal: &'a LabelVolume,
    pub coronal: &'a LabelVolume,
}

impl<'a> ViewTriple<'a> {
    pub fn new(axial: &'a LabelVolume, sagittal: &'a LabelVolume, coronal: &'a LabelVolume) -> Result<Self> {
        if axial.dims != sagittal.dims || axial.dims != coronal.dims {
            return Err(Error::MisalignedDims(format!(
                "axial {:?}, sagittal {:?}, coronal {:?}",
                axial.dims, sagittal.dims, coronal.dims
            )));
        }
        Ok(Self { axial, sagittal, coronal })
    }

    fn dims(&self) -> [usize; 3] {
        self.axial.dims
    }
}

/// Percentages of voxels whose three views all agree, exactly two agree, or
/// all disagree. The three always sum to 100.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementStats {
    pub pct_all_three: f64,
    pub pct_two: f64,
    pub pct_fuzzy: f64,
}

/// How fuzzy (three-way disagreement) voxels are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuzzyPolicy {
    /// Neighborhood vote; count ties break to the lowest label ID.
    NeighborhoodLowestId,
    /// Take the axial view's label directly.
    AxialPriority,
}

/// Neighborhood shape for the fuzzy vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodMode {
    /// window^3 cube in each of the three volumes.
    Cube,
    /// window^2 in-plane patch per volume, oriented by that volume's slicing
    /// direction (axial: fixed z, sagittal: fixed x, coronal: fixed y).
    InPlane,
}

#[derive(Debug, Clone, Copy)]
pub struct FusionConfig {
    /// Odd window extent for the neighborhood vote.
    pub window: usize,
    pub fuzzy_policy: FuzzyPolicy,
    pub neighborhood: NeighborhoodMode,
    /// Restrict the agreement statistics to head voxels (nonzero in at
    /// least one view) instead of all voxels.
    pub stats_on_head_only: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            window: 3,
            fuzzy_policy: FuzzyPolicy::NeighborhoodLowestId,
            neighborhood: NeighborhoodMode::Cube,
            stats_on_head_only: false,
        }
    }
}

impl FusionConfig {
    fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Config(format!("fusion window must be odd and >= 3, got {}", self.window)));
        }
        Ok(())
    }
}

#[inline]
fn majority(a: u8, b: u8, c: u8) -> Option<u8> {
    if a == b || a == c {
        Some(a)
    } else if b == c {
        Some(b)
    } else {
        None
    }
}

fn count_labels_cube(volume: &LabelVolume, center: [usize; 3], half: usize, counts: &mut [u32]) {
    let [nx, ny, nz] = volume.dims;
    let x0 = center[0].saturating_sub(half);
    let x1 = (center[0] + half).min(nx - 1);
    let y0 = center[1].saturating_sub(half);
    let y1 = (center[1] + half).min(ny - 1);
    let z0 = center[2].saturating_sub(half);
    let z1 = (center[2] + half).min(nz - 1);
    for z in z0..=z1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                counts[volume.at(x, y, z) as usize] += 1;
            }
        }
    }
}

fn count_labels_plane(volume: &LabelVolume, center: [usize; 3], half: usize, fixed_axis: usize, counts: &mut [u32]) {
    let [nx, ny, nz] = volume.dims;
    let lo = |c: usize| c.saturating_sub(half);
    let hi = |c: usize, n: usize| (c + half).min(n - 1);
    let (xr, yr, zr) = match fixed_axis {
        2 => ((lo(center[0]), hi(center[0], nx)), (lo(center[1]), hi(center[1], ny)), (center[2], center[2])),
        0 => ((center[0], center[0]), (lo(center[1]), hi(center[1], ny)), (lo(center[2]), hi(center[2], nz))),
        _ => ((lo(center[0]), hi(center[0], nx)), (center[1], center[1]), (lo(center[2]), hi(center[2], nz))),
    };
    for z in zr.0..=zr.1 {
        for y in yr.0..=yr.1 {
            for x in xr.0..=xr.1 {
                counts[volume.at(x, y, z) as usize] += 1;
            }
        }
    }
}

/// Most frequent label around one voxel, counted over all three volumes.
/// Count ties break to the lowest label ID. Boundaries clamp the window.
pub fn neighborhood_vote(triple: &ViewTriple, voxel: [usize; 3], config: &FusionConfig) -> Result<u8> {
    config.validate()?;
    let dims = triple.dims();
    if voxel.iter().zip(&dims).any(|(&v, &d)| v >= d) {
        return Err(Error::IndexOutOfRange(format!("voxel {:?} outside dims {:?}", voxel, dims)));
    }
    let half = config.window / 2;
    let mut counts = [0u32; 256];
    match config.neighborhood {
        NeighborhoodMode::Cube => {
            count_labels_cube(triple.axial, voxel, half, &mut counts);
            count_labels_cube(triple.sagittal, voxel, half, &mut counts);
            count_labels_cube(triple.coronal, voxel, half, &mut counts);
        }
        NeighborhoodMode::InPlane => {
            count_labels_plane(triple.axial, voxel, half, 2, &mut counts);
            count_labels_plane(triple.sagittal, voxel, half, 0, &mut counts);
            count_labels_plane(triple.coronal, voxel, half, 1, &mut counts);
        }
    }
    let mut best_label = 0u8;
    let mut best_count = 0u32;
    for (label, &count) in counts.iter().enumerate() {
        if count > best_count {
            best_count = count;
            best_label = label as u8;
        }
    }
    Ok(best_label)
}

/// Fuse the three views into the final head model and report agreement
/// statistics (collected before fuzzy resolution).
pub fn fuse_views(triple: &ViewTriple, config: &FusionConfig) -> Result<(LabelVolume, AgreementStats)> {
    config.validate()?;
    let dims = triple.dims();
    let [nx, ny, nz] = dims;
    let n = nx * ny * nz;

    let mut out = LabelVolume::zeros(dims, triple.axial.spacing);
    let mut classes: Vec<u8> = vec![0; n]; // 0 = unanimous, 1 = two-way, 2 = fuzzy

    let chunk = nx * ny; // one z-plane per task
    out.data
        .par_chunks_mut(chunk)
        .zip(classes.par_chunks_mut(chunk))
        .enumerate()
        .for_each(|(z, (out_plane, class_plane))| {
            for y in 0..ny {
                for x in 0..nx {
                    let i = x + nx * y;
                    let gi = i + chunk * z;
                    let a = triple.axial.data[gi];
                    let b = triple.sagittal.data[gi];
                    let c = triple.coronal.data[gi];
                    if a == b && b == c {
                        out_plane[i] = a;
                        class_plane[i] = 0;
                    } else if let Some(m) = majority(a, b, c) {
                        out_plane[i] = m;
                        class_plane[i] = 1;
                    } else {
                        class_plane[i] = 2;
                        out_plane[i] = match config.fuzzy_policy {
                            FuzzyPolicy::AxialPriority => a,
                            FuzzyPolicy::NeighborhoodLowestId => {
                                neighborhood_vote(triple, [x, y, z], config).expect("voxel in range")
                            }
                        };
                    }
                }
            }
        });

    let mut counted = 0usize;
    let mut tallies = [0usize; 3];
    for i in 0..n {
        if config.stats_on_head_only
            && triple.axial.data[i] == 0
            && triple.sagittal.data[i] == 0
            && triple.coronal.data[i] == 0
        {
            continue;
        }
        tallies[classes[i] as usize] += 1;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::EmptyRegion);
    }
    let pct = |k: usize| 100.0 * tallies[k] as f64 / counted as f64;
    let stats = AgreementStats { pct_all_three: pct(0), pct_two: pct(1), pct_fuzzy: pct(2) };
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn volume_from(dims: [usize; 3], data: Vec<u8>) -> LabelVolume {
        LabelVolume::new(dims, [1.0; 3], data).unwrap()
    }

    fn random_volume(dims: [usize; 3], max_label: u8, seed: u64) -> LabelVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims[0] * dims[1] * dims[2];
        volume_from(dims, (0..n).map(|_| rng.gen_range(0..=max_label)).collect())
    }

    /// Naive per-voxel reference: re-derives the vote rules directly.
    fn brute_force_vote(triple: &ViewTriple, voxel: [usize; 3], config: &FusionConfig) -> u8 {
        let a = triple.axial.at(voxel[0], voxel[1], voxel[2]);
        let b = triple.sagittal.at(voxel[0], voxel[1], voxel[2]);
        let c = triple.coronal.at(voxel[0], voxel[1], voxel[2]);
        if a == b && b == c {
            return a;
        }
        if a == b || a == c {
            return a;
        }
        if b == c {
            return b;
        }
        if config.fuzzy_policy == FuzzyPolicy::AxialPriority {
            return a;
        }
        // count every label in the clamped cube across all three volumes
        let half = (config.window / 2) as isize;
        let mut counts = std::collections::BTreeMap::<u8, u32>::new();
        let dims = triple.dims();
        for vol in [triple.axial, triple.sagittal, triple.coronal] {
            for dz in -half..=half {
                for dy in -half..=half {
                    for dx in -half..=half {
                        let x = voxel[0] as isize + dx;
                        let y = voxel[1] as isize + dy;
                        let z = voxel[2] as isize + dz;
                        if x < 0 || y < 0 || z < 0 {
                            continue;
                        }
                        let (x, y, z) = (x as usize, y as usize, z as usize);
                        if x >= dims[0] || y >= dims[1] || z >= dims[2] {
                            continue;
                        }
                        *counts.entry(vol.at(x, y, z)).or_insert(0) += 1;
                    }
                }
            }
        }
        // most frequent; BTreeMap iteration order makes the lowest ID win ties
        let mut best = (0u8, 0u32);
        for (&label, &count) in &counts {
            if count > best.1 {
                best = (label, count);
            }
        }
        best.0
    }

    #[test]
    fn unanimous_and_pairwise_rows() {
        let dims = [1, 1, 1];
        let mk = |a, b, c| {
            let va = volume_from(dims, vec![a]);
            let vb = volume_from(dims, vec![b]);
            let vc = volume_from(dims, vec![c]);
            (va, vb, vc)
        };
        for (a, b, c, expect) in [
            (4u8, 4u8, 4u8, 4u8), // unanimous
            (4, 4, 7, 4),         // axial = sagittal
            (4, 7, 7, 7),         // sagittal = coronal
            (4, 7, 4, 4),         // axial = coronal
        ] {
            let (va, vb, vc) = mk(a, b, c);
            let triple = ViewTriple::new(&va, &vb, &vc).unwrap();
            let (fused, _) = fuse_views(&triple, &FusionConfig::default()).unwrap();
            assert_eq!(fused.data[0], expect, "({},{},{})", a, b, c);
        }
    }

    #[test]
    fn idempotent_identical_views() {
        let v = random_volume([8, 8, 8], 13, 3);
        let triple = ViewTriple::new(&v, &v, &v).unwrap();
        let (fused, stats) = fuse_views(&triple, &FusionConfig::default()).unwrap();
        assert_eq!(fused.data, v.data);
        assert_eq!(stats.pct_all_three, 100.0);
        assert_eq!(stats.pct_two, 0.0);
        assert_eq!(stats.pct_fuzzy, 0.0);
    }

    #[test]
    fn permutation_symmetry_on_majority_voxels() {
        let a = random_volume([6, 6, 6], 3, 1);
        let b = random_volume([6, 6, 6], 3, 2);
        let c = random_volume([6, 6, 6], 3, 3);
        let base = fuse_views(&ViewTriple::new(&a, &b, &c).unwrap(), &FusionConfig::default()).unwrap().0;
        for (x, y, z) in [(&b, &a, &c), (&c, &b, &a), (&b, &c, &a)] {
            let permuted = fuse_views(&ViewTriple::new(x, y, z).unwrap(), &FusionConfig::default()).unwrap().0;
            for i in 0..base.data.len() {
                if majority(a.data[i], b.data[i], c.data[i]).is_some() {
                    assert_eq!(base.data[i], permuted.data[i], "voxel {}", i);
                }
            }
        }
    }

    #[test]
    fn stats_constructed_fixture() {
        // 1000 voxels: 858 unanimous, 136 two-way, 6 fuzzy
        let dims = [10, 10, 10];
        let mut a = vec![1u8; 1000];
        let mut b = vec![1u8; 1000];
        let mut c = vec![1u8; 1000];
        for i in 858..994 {
            // two-way agreement: coronal deviates
            c[i] = 2;
        }
        for i in 994..1000 {
            a[i] = 1;
            b[i] = 2;
            c[i] = 3;
        }
        let va = volume_from(dims, a);
        let vb = volume_from(dims, b);
        let vc = volume_from(dims, c);
        let triple = ViewTriple::new(&va, &vb, &vc).unwrap();
        let (_, stats) = fuse_views(&triple, &FusionConfig::default()).unwrap();
        assert!((stats.pct_all_three - 85.8).abs() < 1e-12);
        assert!((stats.pct_two - 13.6).abs() < 1e-12);
        assert!((stats.pct_fuzzy - 0.6).abs() < 1e-12);
    }

    #[test]
    fn stats_sum_to_100() {
        for seed in 0..5 {
            let a = random_volume([9, 9, 9], 4, seed);
            let b = random_volume([9, 9, 9], 4, seed + 100);
            let c = random_volume([9, 9, 9], 4, seed + 200);
            let triple = ViewTriple::new(&a, &b, &c).unwrap();
            let (_, stats) = fuse_views(&triple, &FusionConfig::default()).unwrap();
            assert!((stats.pct_all_three + stats.pct_two + stats.pct_fuzzy - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_brute_force_oracle() {
        for window in [3usize, 5] {
            let config = FusionConfig { window, ..Default::default() };
            let a = random_volume([16, 16, 16], 5, 7);
            let b = random_volume([16, 16, 16], 5, 8);
            let c = random_volume([16, 16, 16], 5, 9);
            let triple = ViewTriple::new(&a, &b, &c).unwrap();
            let (fused, _) = fuse_views(&triple, &config).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            for _ in 0..2000 {
                let v = [rng.gen_range(0..16), rng.gen_range(0..16), rng.gen_range(0..16)];
                let expect = brute_force_vote(&triple, v, &config);
                assert_eq!(fused.at(v[0], v[1], v[2]), expect, "voxel {:?} window {}", v, window);
            }
        }
    }

    #[test]
    fn neighborhood_vote_unanimity_and_dominance() {
        // all three volumes uniformly label 4
        let v = volume_from([5, 5, 5], vec![4; 125]);
        let triple = ViewTriple::new(&v, &v, &v).unwrap();
        assert_eq!(neighborhood_vote(&triple, [2, 2, 2], &FusionConfig::default()).unwrap(), 4);

        // label 7 dominates the neighborhood counts
        let mut data = vec![0u8; 125];
        for (i, item) in data.iter_mut().enumerate() {
            *item = if i % 2 == 0 { 7 } else { (i % 5) as u8 };
        }
        let dominated = volume_from([5, 5, 5], data);
        let t2 = ViewTriple::new(&dominated, &dominated, &dominated).unwrap();
        assert_eq!(neighborhood_vote(&t2, [2, 2, 2], &FusionConfig::default()).unwrap(), 7);
    }

    #[test]
    fn corner_voxel_clamps_window() {
        // corner neighborhood covers only the 2x2x2 clamped region
        let mut data = vec![9u8; 27];
        // make the 2x2x2 corner region all 5s
        let v = |x: usize, y: usize, z: usize| x + 3 * (y + 3 * z);
        for z in 0..2 {
            for y in 0..2 {
                for x in 0..2 {
                    data[v(x, y, z)] = 5;
                }
            }
        }
        let vol = volume_from([3, 3, 3], data);
        let triple = ViewTriple::new(&vol, &vol, &vol).unwrap();
        assert_eq!(neighborhood_vote(&triple, [0, 0, 0], &FusionConfig::default()).unwrap(), 5);
    }

    #[test]
    fn vote_out_of_range_voxel_is_error() {
        let v = volume_from([3, 3, 3], vec![0; 27]);
        let triple = ViewTriple::new(&v, &v, &v).unwrap();
        assert!(neighborhood_vote(&triple, [3, 0, 0], &FusionConfig::default()).is_err());
    }

    #[test]
    fn misaligned_views_rejected() {
        let a = volume_from([3, 3, 3], vec![0; 27]);
        let b = volume_from([3, 3, 4], vec![0; 36]);
        assert!(ViewTriple::new(&a, &b, &a).is_err());
    }

    #[test]
    fn axial_priority_policy() {
        let a = volume_from([1, 1, 1], vec![3]);
        let b = volume_from([1, 1, 1], vec![5]);
        let c = volume_from([1, 1, 1], vec![9]);
        let triple = ViewTriple::new(&a, &b, &c).unwrap();
        let config = FusionConfig { fuzzy_policy: FuzzyPolicy::AxialPriority, ..Default::default() };
        let (fused, stats) = fuse_views(&triple, &config).unwrap();
        assert_eq!(fused.data[0], 3);
        assert_eq!(stats.pct_fuzzy, 100.0);
    }

    #[test]
    fn head_only_stats_skip_background() {
        // half the voxels are air in all three views
        let dims = [4, 4, 2];
        let mut a = vec![0u8; 32];
        let mut b = vec![0u8; 32];
        let mut c = vec![0u8; 32];
        for i in 0..16 {
            a[i] = 1;
            b[i] = 1;
            c[i] = if i < 8 { 1 } else { 2 };
        }
        let va = volume_from(dims, a);
        let vb = volume_from(dims, b);
        let vc = volume_from(dims, c);
        let triple = ViewTriple::new(&va, &vb, &vc).unwrap();
        let config = FusionConfig { stats_on_head_only: true, ..Default::default() };
        let (_, stats) = fuse_views(&triple, &config).unwrap();
        assert_eq!(stats.pct_all_three, 50.0);
        assert_eq!(stats.pct_two, 50.0);
    }
}
