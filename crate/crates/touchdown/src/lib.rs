//! IO, configuration and pipelines for the touchdown landing-zone evaluator.
//!
//! The perception kernels live in [`touchdown_core`]; this crate reads and
//! writes PGM/PPM/PFM/CSV/JSON files and wires the kernels into the `mono`,
//! `stereo`, `bench`, `simulate` and `combine` commands.

pub mod config;
pub mod csv_io;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod report;
pub mod scene_file;
pub mod simulate;

pub use config::PipelineConfig;
pub use error::{Error, Result};
