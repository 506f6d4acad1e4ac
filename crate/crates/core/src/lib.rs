//! Head-tissue segmentation and TMS dosimetry toolkit.
//!
//! The pipeline runs in five stages over millimeter voxel grids: per-slice
//! multi-decoder segmentation of an MRI volume along the three anatomical
//! axes, majority-vote fusion of the three label volumes into one head model,
//! tissue-conductivity assignment, figure-eight coil field computation, and a
//! quasi-static finite-element solve for the induced electric field, with
//! segmentation and field-error metrics on top.

pub mod coil;
pub mod error;
pub mod forknet;
pub mod fusion;
pub mod kv;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod runtime;
pub mod solver;
pub mod volume;

pub use error::{Error, Result};
