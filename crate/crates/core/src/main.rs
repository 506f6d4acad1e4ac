//! Command-line front end for the segmentation + dosimetry pipeline.
//!
//! Exit codes: 0 success, 1 configuration error, 2 stage failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use headfield::error::Error;
use headfield::pipeline::{
    render_report_text, run_pipeline, stage_evaluate, stage_fuse, stage_phantom, stage_segment,
    stage_simulate, stage_train, AccessLog, PipelineConfig,
};
use headfield::volume::Axis;

#[derive(Parser)]
#[command(name = "headfield", about = "Head-tissue segmentation and TMS field simulation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config file (key=value lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set epochs=2 (repeatable).
    #[arg(long = "set", value_parser = parse_key_value)]
    overrides: Vec<(String, String)>,
    /// Cap the worker thread count (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn parse_key_value(raw: &str) -> Result<(String, String), String> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {raw:?}"))
}

#[derive(Args)]
struct AxisArg {
    /// Slicing direction; omit to run all three.
    #[arg(long)]
    axis: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic phantom corpus.
    Phantom(ConfigArgs),
    /// Train the per-direction segmentation network(s).
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        axis: AxisArg,
    },
    /// Segment the held-out subject along one or all slicing directions.
    Segment {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        axis: AxisArg,
    },
    /// Fuse the three per-direction segmentations into the head model.
    Fuse(ConfigArgs),
    /// Solve the induced field over the fused head model.
    Simulate(ConfigArgs),
    /// Solve the reference field and report segmentation + field metrics.
    Evaluate(ConfigArgs),
    /// Run the whole chain: phantom, train x3, segment x3, fuse, simulate,
    /// evaluate.
    Pipeline(ConfigArgs),
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig, Error> {
    let mut config = PipelineConfig::load(args.config.as_deref(), &args.overrides)?;
    if args.jobs > 0 {
        config.jobs = args.jobs;
    }
    if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&config.outdir)?;
    Ok(config)
}

fn axes_from(arg: &AxisArg) -> Result<Vec<Axis>, Error> {
    match &arg.axis {
        None => Ok(Axis::ALL.to_vec()),
        Some(name) => Ok(vec![Axis::from_name(name)?]),
    }
}

fn run() -> Result<(), (u8, Error)> {
    headfield::runtime::keep_step_buffers_heap_resident();
    let cli = Cli::parse();
    let config_error = |e: Error| (1u8, e);
    let stage_error = |e: Error| (2u8, e);

    match cli.command {
        Command::Phantom(args) => {
            let config = load_config(&args).map_err(config_error)?;
            stage_phantom(&config).map_err(stage_error)?;
            println!("wrote {} phantoms under {}", config.phantom_count, config.outdir.display());
        }
        Command::Train { config: args, axis } => {
            let config = load_config(&args).map_err(config_error)?;
            let mut log = AccessLog::default();
            for axis in axes_from(&axis).map_err(config_error)? {
                let start = std::time::Instant::now();
                stage_train(&config, axis, &mut log).map_err(stage_error)?;
                println!(
                    "trained {} network in {:.1}s -> {}",
                    axis.name(),
                    start.elapsed().as_secs_f64(),
                    config.checkpoint_path(axis).display()
                );
            }
        }
        Command::Segment { config: args, axis } => {
            let config = load_config(&args).map_err(config_error)?;
            let mut log = AccessLog::default();
            for axis in axes_from(&axis).map_err(config_error)? {
                stage_segment(&config, axis, &mut log).map_err(stage_error)?;
                println!("wrote {}", config.segmentation_path(axis).display());
            }
        }
        Command::Fuse(args) => {
            let config = load_config(&args).map_err(config_error)?;
            let mut log = AccessLog::default();
            let (_, stats) = stage_fuse(&config, &mut log).map_err(stage_error)?;
            println!(
                "fused head model written; agreement all/two/fuzzy = {:.2}/{:.2}/{:.2} %",
                stats.pct_all_three, stats.pct_two, stats.pct_fuzzy
            );
        }
        Command::Simulate(args) => {
            let config = load_config(&args).map_err(config_error)?;
            let mut log = AccessLog::default();
            stage_simulate(&config, &mut log).map_err(stage_error)?;
            println!("wrote {}", config.outdir.join("efield_test.vol").display());
        }
        Command::Evaluate(args) => {
            let config = load_config(&args).map_err(config_error)?;
            let mut log = AccessLog::default();
            let report = stage_evaluate(&config, &mut log).map_err(stage_error)?;
            print!("{}", render_report_text(&report));
        }
        Command::Pipeline(args) => {
            let config = load_config(&args).map_err(config_error)?;
            let report = run_pipeline(&config).map_err(stage_error)?;
            print!("{}", render_report_text(&report));
            println!("artifacts under {}", config.outdir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err}");
            ExitCode::from(code)
        }
    }
}
