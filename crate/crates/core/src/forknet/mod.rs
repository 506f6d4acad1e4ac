//! Multi-decoder segmentation network: one shared encoder feeding N parallel
//! per-tissue decoder tracks, plus the single-track U-net baseline, training,
//! slice inference, checkpoints, and a structural conformance walker.

pub mod build;
pub mod checkpoint;
pub mod graph;
pub mod infer;
pub mod train;
pub mod walker;

pub use build::{build_forknet, build_unet, ForkNetConfig, OutputMode};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use graph::{ArchKind, NetworkGraph, Tape};
pub use infer::{argmax_labels, segment_slice, segment_volume};
pub use train::{split_dataset, train, LossTrace, SliceDataset, TrainSchedule};
pub use walker::{structure_report, ModuleShape, StructureReport};
