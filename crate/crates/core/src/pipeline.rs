//! Pipeline orchestration: phantom generation, per-axis training, three-view
//! segmentation, fusion, field simulation, and evaluation, each stage
//! re-runnable on its own against artifacts on disk.
//!
//! The last phantom of the corpus acts as the held-out test subject: the
//! networks train on the others, and the segment/fuse/simulate stages touch
//! only its MRI (never its ground-truth labels; an access log makes that
//! auditable). The evaluate stage is the one place the ground truth is read.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::coil::{
    build_figure_eight, parse_pose_file, vector_potential, Coil, CoilParams, CoilPose,
    GridGeometry, VectorField,
};
use crate::error::{Error, Result};
use crate::forknet::{
    build_forknet, build_unet, load_checkpoint, save_checkpoint, segment_volume, train,
    ForkNetConfig, OutputMode, SliceDataset, TrainSchedule,
};
use crate::fusion::{fuse_views, AgreementStats, FusionConfig, FuzzyPolicy, NeighborhoodMode, ViewTriple};
use crate::kv::KvBlock;
use crate::metrics::{mae, segmentation_report, TissueMetrics};
use crate::solver::{
    assign_conductivity, electric_field, hotspot_mask, solve_potential, ConductivityTable,
    PotentialField, TISSUE_NAMES,
};
use crate::volume::{
    generate_phantom, load_volume, save_label, save_scalar, Axis, LabelVolume, PhantomConfig,
    ScalarVolume,
};

/// Environment variable overriding the configured output directory.
pub const OUTDIR_ENV: &str = "HEADFIELD_OUTDIR";

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub outdir: PathBuf,
    pub seed: u64,
    pub dims: [usize; 3],
    pub phantom_count: usize,
    pub phantom: PhantomConfig,
    pub arch: NetworkArch,
    pub degree: usize,
    pub depth: usize,
    pub extent: usize,
    pub output_mode: OutputMode,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub split: f64,
    pub fusion: FusionConfig,
    /// Background threshold for argmax labeling; the phantom pipeline keeps
    /// it on because air is part of the scene.
    pub background_threshold: Option<f32>,
    pub solver_tol: f64,
    pub solver_max_iter: Option<usize>,
    pub coil_pose_path: Option<PathBuf>,
    pub raw_mae: bool,
    /// Tissue label whose mask is the field-comparison region.
    pub roi_label: u8,
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkArch {
    ForkNet,
    UNet,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            outdir: PathBuf::from("out"),
            seed: 0,
            dims: [64, 64, 64],
            phantom_count: 20,
            phantom: PhantomConfig::default(),
            arch: NetworkArch::ForkNet,
            degree: 13,
            depth: 4,
            extent: 64,
            output_mode: OutputMode::LogSigmoid,
            epochs: 8,
            batch: 2,
            learning_rate: 1e-3,
            split: 0.9,
            fusion: FusionConfig { stats_on_head_only: true, ..Default::default() },
            background_threshold: Some(0.5),
            solver_tol: 1e-6,
            solver_max_iter: None,
            coil_pose_path: None,
            raw_mae: false,
            roi_label: 9,
            jobs: 0,
        }
    }
}

impl PipelineConfig {
    /// Parse a `key=value` config file body; unknown keys are rejected so
    /// typos surface instead of silently using defaults.
    pub fn from_kv(kv: &KvBlock) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for key in kv.keys() {
            match key {
                "outdir" => config.outdir = PathBuf::from(kv.require("outdir")?),
                "seed" => config.seed = kv.parse_value("seed")?,
                "dims" => config.dims = kv.parse_triple("dims")?,
                "phantoms" => config.phantom_count = kv.parse_value("phantoms")?,
                "noise" => config.phantom.noise_level = kv.parse_value("noise")?,
                "jitter" => config.phantom.jitter = kv.parse_value("jitter")?,
                "shell_power" => config.phantom.shell_power = kv.parse_value("shell_power")?,
                "arch" => {
                    config.arch = match kv.require("arch")? {
                        "forknet" => NetworkArch::ForkNet,
                        "unet" => NetworkArch::UNet,
                        other => return Err(Error::Config(format!("unknown arch {:?}", other))),
                    }
                }
                "degree" => config.degree = kv.parse_value("degree")?,
                "depth" => config.depth = kv.parse_value("depth")?,
                "extent" => config.extent = kv.parse_value("extent")?,
                "mode" => config.output_mode = OutputMode::from_name(kv.require("mode")?)?,
                "epochs" => config.epochs = kv.parse_value("epochs")?,
                "batch" => config.batch = kv.parse_value("batch")?,
                "lr" => config.learning_rate = kv.parse_value("lr")?,
                "split" => config.split = kv.parse_value("split")?,
                "window" => config.fusion.window = kv.parse_value("window")?,
                "fuzzy" => {
                    config.fusion.fuzzy_policy = match kv.require("fuzzy")? {
                        "lowest-id" => FuzzyPolicy::NeighborhoodLowestId,
                        "axial-priority" => FuzzyPolicy::AxialPriority,
                        other => return Err(Error::Config(format!("unknown fuzzy policy {:?}", other))),
                    }
                }
                "neighborhood" => {
                    config.fusion.neighborhood = match kv.require("neighborhood")? {
                        "cube" => NeighborhoodMode::Cube,
                        "plane" => NeighborhoodMode::InPlane,
                        other => return Err(Error::Config(format!("unknown neighborhood {:?}", other))),
                    }
                }
                "stats_on_head_only" => {
                    config.fusion.stats_on_head_only = kv.parse_value("stats_on_head_only")?
                }
                "background" => {
                    let raw = kv.require("background")?;
                    config.background_threshold = match raw {
                        "off" => None,
                        value => Some(value.parse().map_err(|_| {
                            Error::Config(format!("background must be 'off' or a threshold, got {:?}", value))
                        })?),
                    }
                }
                "tol" => config.solver_tol = kv.parse_value("tol")?,
                "max_iter" => config.solver_max_iter = Some(kv.parse_value("max_iter")?),
                "coil_pose" => config.coil_pose_path = Some(PathBuf::from(kv.require("coil_pose")?)),
                "raw_mae" => config.raw_mae = kv.parse_value("raw_mae")?,
                "roi_label" => config.roi_label = kv.parse_value("roi_label")?,
                "jobs" => config.jobs = kv.parse_value("jobs")?,
                other => return Err(Error::Config(format!("unknown config key {:?}", other))),
            }
        }
        if let Ok(outdir) = std::env::var(OUTDIR_ENV) {
            config.outdir = PathBuf::from(outdir);
        }
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut kv = match path {
            Some(p) => KvBlock::load(p)?,
            None => KvBlock::new(),
        };
        for (k, v) in overrides {
            kv.set(k, v);
        }
        Self::from_kv(&kv)
    }

    fn network_config(&self) -> ForkNetConfig {
        ForkNetConfig {
            degree: self.degree,
            depth: self.depth,
            extent: self.extent,
            output_mode: self.output_mode,
            seed: self.seed,
        }
    }

    fn validate(&self) -> Result<()> {
        self.network_config().validate()?;
        if self.phantom_count < 2 {
            return Err(Error::Config("phantoms must be >= 2 (training corpus plus held-out subject)".into()));
        }
        if self.dims.iter().any(|&d| d != self.extent) {
            return Err(Error::Config(format!(
                "dims {:?} must equal the network extent {} so every slicing direction fits",
                self.dims, self.extent
            )));
        }
        Ok(())
    }

    /// Index of the held-out test subject.
    pub fn test_subject(&self) -> usize {
        self.phantom_count - 1
    }

    pub fn mri_path(&self, index: usize) -> PathBuf {
        self.outdir.join(format!("phantoms/p{:03}_mri.vol", index))
    }

    pub fn truth_path(&self, index: usize) -> PathBuf {
        self.outdir.join(format!("phantoms/p{:03}_labels.vol", index))
    }

    pub fn checkpoint_path(&self, axis: Axis) -> PathBuf {
        self.outdir.join(format!("net_{}.ckpt", axis.name()))
    }

    pub fn segmentation_path(&self, axis: Axis) -> PathBuf {
        self.outdir.join(format!("seg_{}.vol", axis.name()))
    }
}

/// Record of every input file a stage opened; tests audit it to prove the
/// segment/fuse/simulate stages never look at the ground-truth labels.
#[derive(Debug, Default, Clone)]
pub struct AccessLog {
    pub reads: Vec<PathBuf>,
}

impl AccessLog {
    fn load(&mut self, path: &Path) -> Result<crate::volume::Volume> {
        self.reads.push(path.to_path_buf());
        load_volume(path)
    }

    fn load_scalar(&mut self, path: &Path) -> Result<ScalarVolume> {
        self.load(path)?.into_scalar()
    }

    fn load_label(&mut self, path: &Path) -> Result<LabelVolume> {
        self.load(path)?.into_label()
    }

    fn read_text(&mut self, path: &Path) -> Result<String> {
        self.reads.push(path.to_path_buf());
        Ok(std::fs::read_to_string(path)?)
    }
}

pub fn stage_phantom(config: &PipelineConfig) -> Result<()> {
    config.validate()?;
    std::fs::create_dir_all(config.outdir.join("phantoms"))?;
    for i in 0..config.phantom_count {
        let (mri, labels) = generate_phantom(config.seed + i as u64, config.dims, &config.phantom)?;
        save_scalar(&mri, &config.mri_path(i))?;
        save_label(&labels, &config.truth_path(i))?;
    }
    Ok(())
}

pub fn stage_train(config: &PipelineConfig, axis: Axis, log: &mut AccessLog) -> Result<()> {
    config.validate()?;
    let mut volumes = Vec::new();
    for i in 0..config.phantom_count {
        if i == config.test_subject() {
            continue;
        }
        let mri = log.load_scalar(&config.mri_path(i))?;
        let labels = log.load_label(&config.truth_path(i))?;
        volumes.push((mri, labels));
    }
    let dataset = SliceDataset::new(volumes, axis)?;
    let net_config = config.network_config();
    let mut net = match config.arch {
        NetworkArch::ForkNet => build_forknet::<f32>(&net_config)?,
        NetworkArch::UNet => build_unet::<f32>(&net_config)?,
    };
    let schedule = TrainSchedule {
        epochs: config.epochs,
        batch_size: config.batch,
        learning_rate: config.learning_rate,
        seed: config.seed,
        split: config.split,
    };
    let trace = train(&mut net, &dataset, &schedule, config.output_mode)?;
    save_checkpoint(&net, &net_config, &config.checkpoint_path(axis))?;

    let mut text = String::new();
    for (epoch, loss) in trace.train.iter().enumerate() {
        let val = trace
            .validation
            .get(epoch)
            .map(|v| format!(" validation={v:.6}"))
            .unwrap_or_default();
        let _ = writeln!(text, "epoch={} train={:.6}{}", epoch + 1, loss, val);
    }
    std::fs::write(config.outdir.join(format!("loss_{}.txt", axis.name())), text)?;
    Ok(())
}

pub fn stage_segment(config: &PipelineConfig, axis: Axis, log: &mut AccessLog) -> Result<()> {
    config.validate()?;
    let mri = log.load_scalar(&config.mri_path(config.test_subject()))?;
    let ckpt_path = config.checkpoint_path(axis);
    log.reads.push(ckpt_path.clone());
    let (mut net, _) = load_checkpoint::<f32>(&ckpt_path)?;
    let labels = segment_volume(&mut net, &mri, axis, config.background_threshold)?;
    save_label(&labels, &config.segmentation_path(axis))?;
    Ok(())
}

fn render_fusion_stats(stats: &AgreementStats) -> String {
    format!(
        "three-view agreement over counted voxels\n\
         all three match : {:7.3} %\n\
         exactly two     : {:7.3} %\n\
         fuzzy           : {:7.3} %\n\
         \n\
         pct_all_three={}\npct_two={}\npct_fuzzy={}\n",
        stats.pct_all_three, stats.pct_two, stats.pct_fuzzy,
        stats.pct_all_three, stats.pct_two, stats.pct_fuzzy
    )
}

pub fn stage_fuse(config: &PipelineConfig, log: &mut AccessLog) -> Result<(LabelVolume, AgreementStats)> {
    config.validate()?;
    let mut views = Vec::new();
    for axis in Axis::ALL {
        let path = config.segmentation_path(axis);
        if !path.exists() {
            return Err(Error::MissingView(axis.name().to_string()));
        }
        views.push(log.load_label(&path)?);
    }
    let triple = ViewTriple::new(&views[0], &views[1], &views[2])?;
    let (fused, stats) = fuse_views(&triple, &config.fusion)?;
    save_label(&fused, &config.outdir.join("fused.vol"))?;
    std::fs::write(config.outdir.join("fusion_stats.txt"), render_fusion_stats(&stats))?;
    Ok((fused, stats))
}

fn pipeline_coil(config: &PipelineConfig, log: &mut AccessLog) -> Result<Coil> {
    let (pose, params) = match &config.coil_pose_path {
        Some(path) => parse_pose_file(&log.read_text(path)?)?,
        None => {
            // default: coil 10 mm above the top of the grid, centered
            let pose = CoilPose {
                center: [
                    config.dims[0] as f64 * 0.5e-3,
                    config.dims[1] as f64 * 0.5e-3,
                    config.dims[2] as f64 * 1e-3 + 0.010,
                ],
                normal: [0.0, 0.0, 1.0],
                handle: [1.0, 0.0, 0.0],
            };
            (pose, CoilParams { segments: 64, turns: 2, ..Default::default() })
        }
    };
    build_figure_eight(&pose, &params)
}

fn solve_field(
    config: &PipelineConfig,
    labels: &LabelVolume,
    a0: &VectorField,
    omega: f64,
) -> Result<(Vec<f64>, PotentialField)> {
    let sigma = assign_conductivity(labels, &ConductivityTable::default())?;
    let max_iter = config
        .solver_max_iter
        .unwrap_or_else(|| crate::solver::default_max_iterations(sigma.sigma.len()));
    let psi = solve_potential(&sigma, a0, config.solver_tol, max_iter)?;
    let (_, magnitude) = electric_field(&psi, a0, omega)?;
    Ok((magnitude, psi))
}

fn save_magnitude(mag: &[f64], dims: [usize; 3], spacing: [f64; 3], path: &Path) -> Result<()> {
    let volume = ScalarVolume::new(dims, spacing, mag.iter().map(|&v| v as f32).collect())?;
    save_scalar(&volume, path)
}

fn solver_log_text(psi: &PotentialField) -> String {
    let mut text = format!("iterations={}\n", psi.iterations);
    for (i, r) in psi.residual_trace.iter().enumerate() {
        let _ = writeln!(text, "iter={} relative_residual={:.6e}", i + 1, r);
    }
    text
}

pub fn stage_simulate(config: &PipelineConfig, log: &mut AccessLog) -> Result<()> {
    config.validate()?;
    let fused_path = config.outdir.join("fused.vol");
    if !fused_path.exists() {
        return Err(Error::MissingView("fused head model (run fuse first)".into()));
    }
    let fused = log.load_label(&fused_path)?;
    let coil = pipeline_coil(config, log)?;
    let grid = GridGeometry::from_spacing_mm(fused.dims, fused.spacing, [0.0; 3]);
    let a0 = vector_potential(&coil, &grid)?;
    let (magnitude, psi) = solve_field(config, &fused, &a0, coil.omega())?;
    save_magnitude(&magnitude, fused.dims, fused.spacing, &config.outdir.join("efield_test.vol"))?;
    std::fs::write(config.outdir.join("solver_test.log"), solver_log_text(&psi))?;
    Ok(())
}

/// Evaluation artifacts: per-tissue segmentation metrics plus field errors.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub tissues: Vec<TissueMetrics>,
    pub agreement: Option<AgreementStats>,
    pub mae_pct: f64,
    pub mae_hotspot_pct: f64,
    /// Self-consistency row: MAE of the reference field against itself.
    pub mae_self_pct: f64,
}

pub fn render_report_text(report: &EvaluationReport) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "{:<16} {:>8} {:>8} {:>9} {:>9}", "tissue", "dice%", "hd_mm", "truth_vox", "pred_vox");
    for row in &report.tissues {
        let dice = row.dice_pct.map(|d| format!("{:8.2}", d)).unwrap_or_else(|| format!("{:>8}", "-"));
        let hd = row
            .hausdorff_symmetric_mm
            .map(|d| format!("{:8.2}", d))
            .unwrap_or_else(|| format!("{:>8}", "-"));
        let _ = writeln!(
            text,
            "{:<16} {} {} {:9} {:9}",
            TISSUE_NAMES[row.label as usize], dice, hd, row.truth_voxels, row.predicted_voxels
        );
    }
    let _ = writeln!(text, "\nfield error over ROI");
    let _ = writeln!(text, "mae           : {:8.4} %", report.mae_pct);
    let _ = writeln!(text, "mae (hotspot) : {:8.4} %", report.mae_hotspot_pct);
    let _ = writeln!(text, "mae (self)    : {:8.4} %", report.mae_self_pct);
    text
}

pub fn render_report_kv(report: &EvaluationReport) -> String {
    let mut kv = KvBlock::new();
    for row in &report.tissues {
        let name = TISSUE_NAMES[row.label as usize];
        if let Some(d) = row.dice_pct {
            kv.set(&format!("dice_{name}"), format!("{d:.6}"));
        }
        if let Some(h) = row.hausdorff_directed_mm {
            kv.set(&format!("hd_directed_{name}"), format!("{h:.6}"));
        }
        if let Some(h) = row.hausdorff_symmetric_mm {
            kv.set(&format!("hd_{name}"), format!("{h:.6}"));
        }
    }
    if let Some(stats) = &report.agreement {
        kv.set("pct_all_three", format!("{:.6}", stats.pct_all_three));
        kv.set("pct_two", format!("{:.6}", stats.pct_two));
        kv.set("pct_fuzzy", format!("{:.6}", stats.pct_fuzzy));
    }
    kv.set("mae", format!("{:.6}", report.mae_pct));
    kv.set("mae_hotspot", format!("{:.6}", report.mae_hotspot_pct));
    kv.set("mae_self", format!("{:.6}", report.mae_self_pct));
    kv.render()
}

pub fn stage_evaluate(config: &PipelineConfig, log: &mut AccessLog) -> Result<EvaluationReport> {
    config.validate()?;
    let truth = log.load_label(&config.truth_path(config.test_subject()))?;
    let fused = log.load_label(&config.outdir.join("fused.vol"))?;
    let test_field = log.load_scalar(&config.outdir.join("efield_test.vol"))?;

    // reference field from the ground-truth labels
    let coil = pipeline_coil(config, log)?;
    let grid = GridGeometry::from_spacing_mm(truth.dims, truth.spacing, [0.0; 3]);
    let a0 = vector_potential(&coil, &grid)?;
    let (reference, psi) = solve_field(config, &truth, &a0, coil.omega())?;
    save_magnitude(&reference, truth.dims, truth.spacing, &config.outdir.join("efield_ref.vol"))?;
    std::fs::write(config.outdir.join("solver_ref.log"), solver_log_text(&psi))?;

    let tissues = segmentation_report(&fused, &truth)?;
    let roi = truth.mask(config.roi_label);
    if !roi.iter().any(|&m| m) {
        return Err(Error::EmptyRegion);
    }
    let test_mag: Vec<f64> = test_field.data.iter().map(|&v| f64::from(v)).collect();
    let mae_pct = mae(&reference, &test_mag, &roi, config.raw_mae)?;
    let hotspot = hotspot_mask(&reference, &roi)?;
    let mae_hotspot_pct = mae(&reference, &test_mag, &hotspot, config.raw_mae)?;
    let mae_self_pct = mae(&reference, &reference, &roi, config.raw_mae)?;

    let agreement = std::fs::read_to_string(config.outdir.join("fusion_stats.txt"))
        .ok()
        .and_then(|text| {
            let kv = KvBlock::parse(&text).ok()?;
            Some(AgreementStats {
                pct_all_three: kv.parse_value("pct_all_three").ok()?,
                pct_two: kv.parse_value("pct_two").ok()?,
                pct_fuzzy: kv.parse_value("pct_fuzzy").ok()?,
            })
        });

    let report = EvaluationReport { tissues, agreement, mae_pct, mae_hotspot_pct, mae_self_pct };
    std::fs::write(config.outdir.join("report.txt"), render_report_text(&report))?;
    std::fs::write(config.outdir.join("report.kv"), render_report_kv(&report))?;
    Ok(report)
}

/// Run the full chain with per-stage timing. Any stage failure aborts with a
/// stage-tagged error.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvaluationReport> {
    config.validate()?;
    crate::runtime::keep_step_buffers_heap_resident();
    std::fs::create_dir_all(&config.outdir)?;
    let mut timings = String::new();
    let clock = |name: &str, result: Result<()>| -> Result<()> {
        result.map_err(|e| Error::Config(format!("[stage {name}] {e}")))
    };

    let mut log = AccessLog::default();
    let stages: Vec<(&str, Box<dyn FnOnce(&mut AccessLog) -> Result<()>>)> = vec![
        ("phantom", Box::new(|_log: &mut AccessLog| stage_phantom(config))),
        ("train-axial", Box::new(|log: &mut AccessLog| stage_train(config, Axis::Axial, log))),
        ("train-sagittal", Box::new(|log: &mut AccessLog| stage_train(config, Axis::Sagittal, log))),
        ("train-coronal", Box::new(|log: &mut AccessLog| stage_train(config, Axis::Coronal, log))),
        ("segment-axial", Box::new(|log: &mut AccessLog| stage_segment(config, Axis::Axial, log))),
        ("segment-sagittal", Box::new(|log: &mut AccessLog| stage_segment(config, Axis::Sagittal, log))),
        ("segment-coronal", Box::new(|log: &mut AccessLog| stage_segment(config, Axis::Coronal, log))),
        ("fuse", Box::new(|log: &mut AccessLog| stage_fuse(config, log).map(|_| ()))),
        ("simulate", Box::new(|log: &mut AccessLog| stage_simulate(config, log))),
    ];
    for (name, stage) in stages {
        let start = Instant::now();
        clock(name, stage(&mut log))?;
        let _ = writeln!(timings, "{}={:.3}s", name, start.elapsed().as_secs_f64());
    }
    let start = Instant::now();
    let report = stage_evaluate(config, &mut log)
        .map_err(|e| Error::Config(format!("[stage evaluate] {e}")))?;
    let _ = writeln!(timings, "evaluate={:.3}s", start.elapsed().as_secs_f64());
    std::fs::write(config.outdir.join("timings.txt"), &timings)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_overrides() {
        let kv = KvBlock::parse("seed=5\ndims=32,32,32\nextent=32\ndepth=3\nepochs=1\nfuzzy=axial-priority\n").unwrap();
        let config = PipelineConfig::from_kv(&kv).unwrap();
        assert_eq!(config.seed, 5);
        assert_eq!(config.dims, [32, 32, 32]);
        assert_eq!(config.fusion.fuzzy_policy, FuzzyPolicy::AxialPriority);
    }

    #[test]
    fn unknown_key_rejected() {
        let kv = KvBlock::parse("nonsense=1\n").unwrap();
        assert!(PipelineConfig::from_kv(&kv).is_err());
    }

    #[test]
    fn dims_must_match_extent() {
        let kv = KvBlock::parse("dims=64,64,32\nextent=64\n").unwrap();
        let config = PipelineConfig::from_kv(&kv).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn fuse_without_views_is_missing_view() {
        let dir = tempfile::tempdir().unwrap();
        let kv = KvBlock::parse(&format!("outdir={}\ndims=32,32,32\nextent=32\ndepth=3\n", dir.path().display())).unwrap();
        let config = PipelineConfig::from_kv(&kv).unwrap();
        let mut log = AccessLog::default();
        match stage_fuse(&config, &mut log) {
            Err(Error::MissingView(v)) => assert_eq!(v, "axial"),
            other => panic!("expected missing view, got {:?}", other.map(|_| ())),
        }
    }
}
